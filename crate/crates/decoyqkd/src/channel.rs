//! Fiber-channel model: deterministic expected tallies and seeded Monte-Carlo
//! tallies for a threshold-detector BB84 link with background counts and
//! misalignment.

use crate::estimator::{BasisTallies, ObservedTallies, PulseEnsemble, StateKind};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

/// Error rate of a background click; a dark count carries no signal
/// information, so it is wrong half the time.
pub const BACKGROUND_ERROR_RATE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel parameter {name}: {value}")]
    Invalid { name: &'static str, value: f64 },
}

/// Detector and fiber parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Detection efficiency of Bob's apparatus.
    pub detector_efficiency: f64,
    /// Background (dark-count) yield per pulse.
    pub background_yield: f64,
    /// Misalignment error probability for detected signal photons.
    pub misalignment: f64,
    /// Fiber attenuation in dB per km.
    pub loss_db_per_km: f64,
    /// Link length in km.
    pub distance_km: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let checks = [
            ("detector_efficiency", self.detector_efficiency, 0.0, 1.0),
            ("background_yield", self.background_yield, 0.0, 1.0),
            ("misalignment", self.misalignment, 0.0, 1.0),
            ("loss_db_per_km", self.loss_db_per_km, 0.0, f64::INFINITY),
            ("distance_km", self.distance_km, 0.0, f64::INFINITY),
        ];
        for (name, value, lo, hi) in checks {
            if !(value >= lo && value <= hi) || value.is_nan() {
                return Err(ChannelError::Invalid { name, value });
            }
        }
        Ok(())
    }

    /// End-to-end transmittance: detector efficiency times fiber loss.
    pub fn total_transmittance(&self) -> f64 {
        self.detector_efficiency * 10f64.powf(-self.loss_db_per_km * self.distance_km / 10.0)
    }

    /// Same channel at a different distance.
    pub fn at_distance(&self, distance_km: f64) -> ChannelParams {
        ChannelParams {
            distance_km,
            ..*self
        }
    }
}

/// Gain and error gain of a coherent pulse of the given intensity:
/// Q = Y0 + (1 - Y0)(1 - e^{-eta mu}), E Q = e0 Y0 + e_d (Q - Y0).
pub fn gain_and_qber(intensity: f64, eta: f64, background: f64, misalignment: f64) -> (f64, f64) {
    let click = -(-(eta * intensity)).exp_m1(); // 1 - e^{-eta mu} without cancellation
    let gain = background + (1.0 - background) * click;
    let error = BACKGROUND_ERROR_RATE * background + misalignment * (gain - background);
    (gain, error)
}

/// Yield and error gain of the i-photon channel:
/// Y_i = 1 - (1 - Y0)(1 - eta)^i, e_i Y_i = e0 Y0 + e_d (Y_i - Y0).
pub fn photon_yield_and_error(
    photon_number: u32,
    eta: f64,
    background: f64,
    misalignment: f64,
) -> (f64, f64) {
    // 1 - (1-eta)^i evaluated in log space so Y_0 = Y0 holds exactly and
    // tiny background yields survive the subtraction
    let click = if photon_number == 0 {
        0.0
    } else if eta >= 1.0 {
        1.0
    } else {
        -(photon_number as f64 * (-eta).ln_1p()).exp_m1()
    };
    let yield_i = background + (1.0 - background) * click;
    let error = BACKGROUND_ERROR_RATE * background + misalignment * (yield_i - background);
    (yield_i, error)
}

fn per_basis_expected(
    ensemble: &PulseEnsemble,
    params: &ChannelParams,
    basis_prob: f64,
) -> BasisTallies {
    let eta = params.total_transmittance();
    let sift = basis_prob * basis_prob;
    let mut tallies = BasisTallies::default();
    for state in StateKind::ALL {
        let i = state.index();
        let (gain, error_gain) = gain_and_qber(
            ensemble.intensity(state),
            eta,
            params.background_yield,
            params.misalignment,
        );
        let pulses = ensemble.total_pulses * ensemble.share(state) * sift;
        tallies.detections[i] = pulses * gain;
        tallies.errors[i] = pulses * error_gain;
    }
    tallies
}

/// Expected tallies for both bases: detections N q^a q_gamma^2 Q^a and the
/// matching error-weighted counts, as real numbers. Both parties pick the
/// Z basis with probability `q_z`.
pub fn expected_tallies(
    ensemble: &PulseEnsemble,
    params: &ChannelParams,
    q_z: f64,
) -> ObservedTallies {
    ObservedTallies {
        z: per_basis_expected(ensemble, params, q_z),
        x: per_basis_expected(ensemble, params, 1.0 - q_z),
    }
}

fn binomial_draw(rng: &mut ChaCha12Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("validated binomial parameters").sample(rng)
}

/// Draws one experiment's worth of tallies: detections are binomial in the
/// committed pulse count, errors binomial in the detections. Deterministic
/// for a fixed seed.
pub fn sample_tallies(
    ensemble: &PulseEnsemble,
    params: &ChannelParams,
    q_z: f64,
    seed: u64,
) -> ObservedTallies {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let eta = params.total_transmittance();
    let mut out = ObservedTallies::default();
    for (tallies, basis_prob) in [(&mut out.z, q_z), (&mut out.x, 1.0 - q_z)] {
        let sift = basis_prob * basis_prob;
        for state in StateKind::ALL {
            let i = state.index();
            let (gain, error_gain) = gain_and_qber(
                ensemble.intensity(state),
                eta,
                params.background_yield,
                params.misalignment,
            );
            let pulses = (ensemble.total_pulses * ensemble.share(state) * sift).round() as u64;
            let detections = binomial_draw(&mut rng, pulses, gain);
            let qber = if gain > 0.0 { error_gain / gain } else { 0.0 };
            let errors = binomial_draw(&mut rng, detections, qber);
            tallies.detections[i] = detections as f64;
            tallies.errors[i] = errors as f64;
        }
    }
    out
}
