#![allow(clippy::excessive_precision)] // frozen oracle digits

//! End-to-end pipeline checks against an independent high-precision
//! evaluation of the reference system (100 km link, optimized source),
//! plus cross-engine and infinite-data consistency.

use decoyqkd::bounds::BoundMethod;
use decoyqkd::channel::{expected_tallies, gain_and_qber, photon_yield_and_error, ChannelParams};
use decoyqkd::estimator::{
    self, collapsed_gain_bounds, estimate, single_photon_counts_and_error,
    single_photon_error_product_upper, single_photon_yield_lower, Flags, PulseEnsemble, StateKind,
};
use decoyqkd::keyrate::finite_key_rate;

fn reference_channel() -> ChannelParams {
    ChannelParams {
        detector_efficiency: 0.045,
        background_yield: 1.7e-6,
        misalignment: 0.033,
        loss_db_per_km: 0.21,
        distance_km: 100.0,
    }
}

fn reference_ensemble() -> PulseEnsemble {
    PulseEnsemble::new(0.370, 0.126, 0.650, 0.250, 1e10).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Every intermediate of the estimation chain at the reference point,
/// frozen from a 60-digit independent evaluation of the same formulas.
#[test]
fn reference_point_reproduces_frozen_intermediates() {
    let ensemble = reference_ensemble();
    let channel = reference_channel();
    let tallies = expected_tallies(&ensemble, &channel, 0.5);

    assert!(rel(tallies.z.detections[0], 217663.356411765) < 1e-9);
    assert!(rel(tallies.z.detections[1], 29210.8250820563) < 1e-9);
    assert!(rel(tallies.z.detections[2], 425.0) < 1e-12);
    assert!(rel(tallies.z.errors[0], 8472.97826158825) < 1e-9);
    assert!(rel(tallies.z.errors[1], 1460.14472770786) < 1e-9);
    assert!(rel(tallies.z.errors[2], 212.5) < 1e-12);

    let eps_step = 1e-10;
    let gains = estimator::mean_gain_bounds(
        &tallies.z,
        2.5e9,
        &ensemble,
        eps_step,
        BoundMethod::ExactChernoff,
    )
    .unwrap();
    let s = StateKind::Signal.index();
    let w = StateKind::Weak.index();
    let v = StateKind::Vacuum.index();
    assert!(rel(gains.gain[s].upper, 1.35950856513053e-4) < 1e-9);
    assert!(rel(gains.gain[w].lower, 4.48634809067863e-5) < 1e-9);
    assert!(rel(gains.gain[v].upper, 2.33885267455223e-6) < 1e-9);
    assert!(rel(gains.error_gain[w].upper, 2.78299881287723e-6) < 1e-9);
    assert!(rel(gains.error_gain[v].lower, 5.08991179342556e-7) < 1e-9);

    let (y1, _) = single_photon_yield_lower(&gains, &ensemble);
    assert!(rel(y1, 3.12850537877279e-4) < 1e-9);
    let (e1y1, _) = single_photon_error_product_upper(&gains, &ensemble);
    assert!(rel(e1y1, 2.10136091147374e-5) < 1e-9);
    let (m1, e1) = single_photon_counts_and_error(y1, e1y1, 2.5e9, &ensemble);
    assert!(rel(m1, 151648.412103279) < 1e-9);
    assert!(rel(e1, 0.0671682051669682) < 1e-9);

    let pair = estimate(&tallies, &ensemble, 0.5, eps_step, BoundMethod::ExactChernoff).unwrap();
    assert!(rel(pair.z.m1_lower, 151648.412103279) < 1e-9);
    assert!(rel(pair.z.e1_bit_upper, 0.0671682051669682) < 1e-9);
    assert!(rel(pair.z.m1_signal_lower, 127433.551692402) < 1e-9);
    assert!(rel(pair.z.theta, 0.00595302018762362) < 1e-8);
    assert!(rel(pair.z.phase_error_upper, 0.0731212253545918) < 1e-8);
    assert!(pair.z.flags.is_empty(), "flags: {}", pair.z.flags);
    // symmetric sifting: the X direction mirrors the Z direction
    assert!(rel(pair.x.m1_signal_lower, pair.z.m1_signal_lower) < 1e-12);

    let result = finite_key_rate(&pair, &tallies, &ensemble, 1.22);
    assert!(rel(result.key_bits_z, 16303.5566351561) < 1e-7);
    assert!(rel(result.rate, 3.26071132703122e-6) < 1e-7);
    assert_eq!(result.pre_clamp_deficit, 0.0);
}

/// With collapsed (infinite-data) bounds the estimator must stay on the
/// conservative side of the exact channel values everywhere on a grid.
#[test]
fn collapsed_estimates_bound_exact_channel_values() {
    let ensemble = reference_ensemble();
    for km in [0.0, 25.0, 50.0, 75.0, 100.0, 120.0] {
        let channel = reference_channel().at_distance(km);
        let eta = channel.total_transmittance();
        let tallies = expected_tallies(&ensemble, &channel, 0.5);
        let gains = collapsed_gain_bounds(&tallies.z, 2.5e9, &ensemble);
        let (y1_lower, _) = single_photon_yield_lower(&gains, &ensemble);
        let (e1y1_upper, _) = single_photon_error_product_upper(&gains, &ensemble);
        let (y1_true, e1y1_true) =
            photon_yield_and_error(1, eta, channel.background_yield, channel.misalignment);
        assert!(
            y1_lower <= y1_true * (1.0 + 1e-12),
            "km = {km}: {y1_lower} vs {y1_true}"
        );
        assert!(y1_lower > 0.0, "km = {km}");
        let e1_true = e1y1_true / y1_true;
        let (_, e1_upper) = single_photon_counts_and_error(y1_lower, e1y1_upper, 2.5e9, &ensemble);
        assert!(
            e1_upper >= e1_true * (1.0 - 1e-12),
            "km = {km}: {e1_upper} vs {e1_true}"
        );
    }
}

/// Swapping the Chernoff+Hoeffding engine for the exact engine never costs
/// single-photon credit while the C+H regime tests pass.
#[test]
fn exact_engine_dominates_ch_engine() {
    let ensemble = reference_ensemble();
    for km in [0.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0] {
        let channel = reference_channel().at_distance(km);
        let tallies = expected_tallies(&ensemble, &channel, 0.5);
        let exact = estimate(&tallies, &ensemble, 0.5, 1e-10, BoundMethod::ExactChernoff).unwrap();
        let ch = estimate(
            &tallies,
            &ensemble,
            0.5,
            1e-10,
            BoundMethod::ChernoffHoeffding,
        )
        .unwrap();
        if ch.z.flags.contains(Flags::CH_FALLBACK) {
            continue;
        }
        assert!(
            exact.z.m1_signal_lower >= ch.z.m1_signal_lower,
            "km = {km}: exact {} < ch {}",
            exact.z.m1_signal_lower,
            ch.z.m1_signal_lower
        );
    }
}

/// The Gaussian engine runs the same chain and lands near the exact-Chernoff
/// result at the reference point (its interval multiplier is of the same
/// scale), sanity-checking the engine dispatch.
#[test]
fn gaussian_engine_produces_comparable_estimates() {
    let ensemble = reference_ensemble();
    let channel = reference_channel();
    let tallies = expected_tallies(&ensemble, &channel, 0.5);
    let exact = estimate(&tallies, &ensemble, 0.5, 1e-10, BoundMethod::ExactChernoff).unwrap();
    let gauss = estimate(&tallies, &ensemble, 0.5, 1e-10, BoundMethod::Gaussian).unwrap();
    assert!(gauss.z.m1_signal_lower > 0.9 * exact.z.m1_signal_lower);
    assert!(gauss.z.m1_signal_lower < 1.1 * exact.z.m1_signal_lower);
}

/// Sampled tallies run through the full chain without flags at a healthy
/// operating point, and the certified count stays below the expectation's
/// neighborhood.
#[test]
fn sampled_tallies_flow_through() {
    let ensemble = PulseEnsemble::new(0.370, 0.126, 0.650, 0.250, 1e8).unwrap();
    let channel = reference_channel().at_distance(30.0);
    let tallies = decoyqkd::channel::sample_tallies(&ensemble, &channel, 0.5, 123);
    let pair = estimate(&tallies, &ensemble, 0.5, 1e-6, BoundMethod::ExactChernoff).unwrap();
    assert!(pair.z.m1_signal_lower > 0.0);
    let result = finite_key_rate(&pair, &tallies, &ensemble, 1.22);
    assert!(result.rate > 0.0);
}

/// The finite-key rate never exceeds the infinite-decoy reference at the
/// same signal intensity and channel.
#[test]
fn finite_rate_below_asymptotic_reference() {
    let ensemble = reference_ensemble();
    for km in [10.0, 50.0, 100.0, 110.0] {
        let channel = reference_channel().at_distance(km);
        let tallies = expected_tallies(&ensemble, &channel, 0.5);
        let pair =
            estimate(&tallies, &ensemble, 0.5, 1e-10, BoundMethod::ExactChernoff).unwrap();
        let finite = finite_key_rate(&pair, &tallies, &ensemble, 1.22).rate;
        let reference = decoyqkd::keyrate::asymptotic_key_rate(
            ensemble.signal_intensity,
            &channel,
            0.5,
            1.22,
        );
        assert!(finite <= reference, "km = {km}: {finite} > {reference}");
    }
}

/// The coherent-pulse gain matches the Poisson mixture of photon-number
/// yields (consistency between the two channel descriptions).
#[test]
fn channel_gain_is_poisson_mixture_of_yields() {
    let channel = reference_channel();
    let eta = channel.total_transmittance();
    for mu in [0.126, 0.370, 0.9] {
        let (q, _) = gain_and_qber(mu, eta, channel.background_yield, channel.misalignment);
        let mut sum = 0.0;
        let mut weight = (-mu).exp();
        for i in 0..=60u32 {
            let (y, _) =
                photon_yield_and_error(i, eta, channel.background_yield, channel.misalignment);
            sum += weight * y;
            weight *= mu / (i as f64 + 1.0);
        }
        assert!(rel(sum, q) < 1e-10, "mu = {mu}");
    }
}
