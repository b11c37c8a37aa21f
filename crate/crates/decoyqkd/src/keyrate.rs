//! Secret-key length and rate: privacy amplification credit from the
//! certified single-photon bounds minus the error-correction cost, plus the
//! infinite-decoy reference rate.

use crate::bounds::entropy_bits;
use crate::channel::{gain_and_qber, photon_yield_and_error, ChannelParams};
use crate::estimator::{EstimatePair, Flags, ObservedTallies, PulseEnsemble, StateKind};

/// Key output of one full protocol evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateResult {
    pub key_bits_z: f64,
    pub key_bits_x: f64,
    /// Secret bits per pulse sent.
    pub rate: f64,
    pub ec_cost_z: f64,
    pub ec_cost_x: f64,
    /// How far below zero the raw key lengths went before clamping; zero for
    /// feasible points. Lets a search distinguish barely-zero from hopeless.
    pub pre_clamp_deficit: f64,
    pub flags: Flags,
}

impl KeyRateResult {
    pub fn zero(flags: Flags) -> Self {
        KeyRateResult {
            key_bits_z: 0.0,
            key_bits_x: 0.0,
            rate: 0.0,
            ec_cost_z: 0.0,
            ec_cost_x: 0.0,
            pre_clamp_deficit: 0.0,
            flags,
        }
    }
}

/// Key length of one direction: m1_signal (1 - h(phase error)) minus the
/// error-correction cost f M h(QBER), clamped at zero.
///
/// A phase error at or beyond 1/2 voids the privacy-amplification term.
/// Returns (key bits, ec cost, pre-clamp deficit, flags).
pub fn finite_key_length(
    m1_signal_lower: f64,
    phase_error_upper: f64,
    signal_detections: f64,
    signal_qber: f64,
    ec_inefficiency: f64,
) -> (f64, f64, f64, Flags) {
    debug_assert!(ec_inefficiency >= 1.0);
    let pa_credit = if phase_error_upper >= 0.5 {
        0.0
    } else {
        m1_signal_lower * (1.0 - entropy_bits(phase_error_upper))
    };
    let ec_cost = signal_detections * ec_inefficiency * entropy_bits(signal_qber.clamp(0.0, 1.0));
    let raw = pa_credit - ec_cost;
    if raw < 0.0 {
        (0.0, ec_cost, -raw, Flags::KEY_CLAMPED)
    } else {
        (raw, ec_cost, 0.0, Flags::default())
    }
}

/// Combines both key directions into bits and a per-pulse rate.
pub fn finite_key_rate(
    estimates: &EstimatePair,
    tallies: &ObservedTallies,
    ensemble: &PulseEnsemble,
    ec_inefficiency: f64,
) -> KeyRateResult {
    let signal = StateKind::Signal.index();
    let qber = |detections: f64, errors: f64| {
        if detections > 0.0 {
            errors / detections
        } else {
            0.0
        }
    };
    let (kz, ecz, dz, fz) = finite_key_length(
        estimates.z.m1_signal_lower,
        estimates.z.phase_error_upper,
        tallies.z.detections[signal],
        qber(tallies.z.detections[signal], tallies.z.errors[signal]),
        ec_inefficiency,
    );
    let (kx, ecx, dx, fx) = finite_key_length(
        estimates.x.m1_signal_lower,
        estimates.x.phase_error_upper,
        tallies.x.detections[signal],
        qber(tallies.x.detections[signal], tallies.x.errors[signal]),
        ec_inefficiency,
    );
    KeyRateResult {
        key_bits_z: kz,
        key_bits_x: kx,
        rate: (kz + kx) / ensemble.total_pulses,
        ec_cost_z: ecz,
        ec_cost_x: ecx,
        pre_clamp_deficit: dz + dx,
        flags: estimates
            .z
            .flags
            .union(estimates.x.flags)
            .union(fz)
            .union(fx),
    }
}

/// Infinite-decoy, infinite-data reference rate per pulse at the given
/// signal intensity: sift * [mu e^{-mu} Y1 (1 - h(e1)) - Q f h(E)], clamped
/// at zero. The decoy fraction is idealized away, and both bases contribute
/// through the sifting factor q_z^2 + (1-q_z)^2.
pub fn asymptotic_key_rate(
    signal_intensity: f64,
    params: &ChannelParams,
    q_z: f64,
    ec_inefficiency: f64,
) -> f64 {
    let eta = params.total_transmittance();
    let (gain, error_gain) = gain_and_qber(
        signal_intensity,
        eta,
        params.background_yield,
        params.misalignment,
    );
    let (y1, e1y1) = photon_yield_and_error(1, eta, params.background_yield, params.misalignment);
    if gain <= 0.0 || y1 <= 0.0 {
        return 0.0;
    }
    let qber = (error_gain / gain).min(1.0);
    let e1 = (e1y1 / y1).min(0.5);
    let sift = q_z * q_z + (1.0 - q_z) * (1.0 - q_z);
    let pa = signal_intensity * (-signal_intensity).exp() * y1 * (1.0 - entropy_bits(e1));
    let ec = gain * ec_inefficiency * entropy_bits(qber);
    (sift * (pa - ec)).max(0.0)
}
