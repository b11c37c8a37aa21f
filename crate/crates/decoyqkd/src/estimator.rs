//! Decoy-state estimation: turns per-state tallies into certified bounds on
//! single-photon detections, bit errors, and phase errors.
//!
//! The vacuum+weak scheme lower-bounds the single-photon yield from the three
//! observed gains, upper-bounds the single-photon error product from the two
//! error tallies, converts the result into a signal-only detection count, and
//! bridges bit to phase error with a random-sampling deviation. Every mean
//! bound comes from an injectable fluctuation engine.

use crate::bounds::{
    self, BoundMethod, CHBudget, FailureProbability, MeanBounds, StatError,
};
use thiserror::Error;

/// Errors from ensemble/tally validation and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid tallies: {0}")]
    InvalidTallies(String),
    #[error("insufficient counts: {0}")]
    InsufficientCounts(String),
    #[error(transparent)]
    Stat(#[from] StatError),
}

/// The three pulse classes of the vacuum+weak protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Signal,
    Weak,
    Vacuum,
}

impl StateKind {
    pub const ALL: [StateKind; 3] = [StateKind::Signal, StateKind::Weak, StateKind::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            StateKind::Signal => "signal",
            StateKind::Weak => "weak",
            StateKind::Vacuum => "vacuum",
        }
    }
}

impl std::str::FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "signal" | "s" => Ok(StateKind::Signal),
            "weak" | "w" => Ok(StateKind::Weak),
            "vacuum" | "v" => Ok(StateKind::Vacuum),
            other => Err(format!("unknown state '{other}'")),
        }
    }
}

/// Source configuration: intensities, mixing ratios, and pulse count.
///
/// The vacuum share is the remainder 1 - q_signal - q_weak; all three shares
/// must be strictly positive and the intensities ordered mu > nu > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEnsemble {
    pub signal_intensity: f64,
    pub weak_intensity: f64,
    pub signal_share: f64,
    pub weak_share: f64,
    pub vacuum_share: f64,
    pub total_pulses: f64,
}

impl PulseEnsemble {
    pub fn new(
        signal_intensity: f64,
        weak_intensity: f64,
        signal_share: f64,
        weak_share: f64,
        total_pulses: f64,
    ) -> Result<Self, EstimateError> {
        let bad = |msg: String| Err(EstimateError::InvalidEnsemble(msg));
        if !(signal_intensity.is_finite() && weak_intensity.is_finite()) {
            return bad("intensities must be finite".into());
        }
        if !(signal_intensity > weak_intensity && weak_intensity > 0.0) {
            return bad(format!(
                "intensities must satisfy mu > nu > 0, got mu = {signal_intensity}, nu = {weak_intensity}"
            ));
        }
        let vacuum_share = 1.0 - signal_share - weak_share;
        for (name, v) in [
            ("signal share", signal_share),
            ("weak share", weak_share),
            ("vacuum share", vacuum_share),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie strictly inside (0,1), got {v}"));
            }
        }
        if !(total_pulses >= 1.0 && total_pulses.is_finite()) {
            return bad(format!("total pulses must be >= 1, got {total_pulses}"));
        }
        Ok(Self {
            signal_intensity,
            weak_intensity,
            signal_share,
            weak_share,
            vacuum_share,
            total_pulses,
        })
    }

    pub fn intensity(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Signal => self.signal_intensity,
            StateKind::Weak => self.weak_intensity,
            StateKind::Vacuum => 0.0,
        }
    }

    pub fn share(&self, state: StateKind) -> f64 {
        match state {
            StateKind::Signal => self.signal_share,
            StateKind::Weak => self.weak_share,
            StateKind::Vacuum => self.vacuum_share,
        }
    }
}

/// Detection and error-weighted counts for one measurement basis,
/// indexed by [signal, weak, vacuum]. Values are non-negative reals:
/// experiments produce integers, simulations produce expectations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BasisTallies {
    pub detections: [f64; 3],
    pub errors: [f64; 3],
}

impl BasisTallies {
    pub fn validate(&self) -> Result<(), EstimateError> {
        for state in StateKind::ALL {
            let i = state.index();
            let (m, e) = (self.detections[i], self.errors[i]);
            if !(m.is_finite() && e.is_finite() && m >= 0.0 && e >= 0.0) {
                return Err(EstimateError::InvalidTallies(format!(
                    "{} tallies must be finite and non-negative, got ({m}, {e})",
                    state.label()
                )));
            }
            if e > m {
                return Err(EstimateError::InvalidTallies(format!(
                    "{} error tally {e} exceeds detection tally {m}",
                    state.label()
                )));
            }
        }
        Ok(())
    }

    pub fn total_detections(&self) -> f64 {
        self.detections.iter().sum()
    }
}

/// Tallies for both measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservedTallies {
    pub z: BasisTallies,
    pub x: BasisTallies,
}

impl ObservedTallies {
    pub fn validate(&self) -> Result<(), EstimateError> {
        self.z.validate()?;
        self.x.validate()
    }
}

/// Clamp/cap markers accumulated along the estimation chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags(u16);

impl Flags {
    pub const LOWER_CLAMPED: Flags = Flags(1);
    pub const YIELD_CLAMPED: Flags = Flags(1 << 1);
    pub const ERROR_PRODUCT_CLAMPED: Flags = Flags(1 << 2);
    pub const NO_SINGLE_PHOTON_CREDIT: Flags = Flags(1 << 3);
    pub const PHASE_CAPPED: Flags = Flags(1 << 4);
    pub const SAMPLING_SATURATED: Flags = Flags(1 << 5);
    pub const SAMPLING_REGULARIZED: Flags = Flags(1 << 6);
    pub const CH_FALLBACK: Flags = Flags(1 << 7);
    pub const ENGINE_FALLBACK: Flags = Flags(1 << 8);
    pub const INSUFFICIENT_COUNTS: Flags = Flags(1 << 9);
    pub const KEY_CLAMPED: Flags = Flags(1 << 10);

    const NAMES: [(Flags, &'static str); 11] = [
        (Flags::LOWER_CLAMPED, "lower-clamped"),
        (Flags::YIELD_CLAMPED, "yield-clamped"),
        (Flags::ERROR_PRODUCT_CLAMPED, "error-product-clamped"),
        (Flags::NO_SINGLE_PHOTON_CREDIT, "no-single-photon-credit"),
        (Flags::PHASE_CAPPED, "phase-capped"),
        (Flags::SAMPLING_SATURATED, "sampling-saturated"),
        (Flags::SAMPLING_REGULARIZED, "sampling-regularized"),
        (Flags::CH_FALLBACK, "ch-hoeffding-fallback"),
        (Flags::ENGINE_FALLBACK, "engine-fallback"),
        (Flags::INSUFFICIENT_COUNTS, "insufficient-counts"),
        (Flags::KEY_CLAMPED, "key-clamped"),
    ];

    pub fn insert(&mut self, other: Flags) {
        self.0 |= other.0;
    }

    pub fn contains(self, other: Flags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: Flags) -> Flags {
        Flags(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for Flags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let mut first = true;
        for (flag, name) in Flags::NAMES {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// Conditional probabilities that an i-photon pulse came from each state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonConditional {
    pub photon_number: u32,
    /// Indexed by [signal, weak, vacuum]; sums to one.
    pub probabilities: [f64; 3],
}

/// Bayes weights of the photon-number channel: the chance that an i-photon
/// pulse was emitted as signal, weak, or vacuum. The vacuum term follows the
/// 0^0 = 1 convention, contributing only at i = 0.
pub fn poisson_conditional(photon_number: u32, ensemble: &PulseEnsemble) -> PoissonConditional {
    let weight = |state: StateKind| {
        let mu = ensemble.intensity(state);
        let w = if mu == 0.0 {
            if photon_number == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (-mu).exp() * mu.powi(photon_number as i32)
        };
        ensemble.share(state) * w
    };
    let raw = [
        weight(StateKind::Signal),
        weight(StateKind::Weak),
        weight(StateKind::Vacuum),
    ];
    let total: f64 = raw.iter().sum();
    PoissonConditional {
        photon_number,
        probabilities: [raw[0] / total, raw[1] / total, raw[2] / total],
    }
}

// ---------------------------------------------------------------------------
// Fluctuation engine dispatch
// ---------------------------------------------------------------------------

struct EngineCtx {
    method: BoundMethod,
    /// Failure budget of the estimation step this engine call belongs to.
    step_eps: f64,
    /// Bernoulli trials behind the basis (total detections), for the
    /// Chernoff+Hoeffding pre-estimate.
    trials: u64,
    /// Sigma multiplier at step_eps, shared by every Gaussian tally bound.
    gaussian_multiplier: f64,
}

impl EngineCtx {
    fn new(method: BoundMethod, step_eps: f64, trials: u64) -> Result<Self, StatError> {
        let gaussian_multiplier = match method {
            BoundMethod::Gaussian => {
                bounds::gaussian_sigma_multiplier(FailureProbability::new(step_eps)?)
            }
            _ => 0.0,
        };
        Ok(Self {
            method,
            step_eps,
            trials,
            gaussian_multiplier,
        })
    }

    /// Mean bounds on an observed tally. `one_sided_share` is the slice of
    /// the step budget carried by each side of this interval; the Gaussian
    /// engine keeps a single deviation multiplier per step and the C+H
    /// engine budgets each of its three parts with the full step epsilon.
    fn bounds(&self, chi: f64, one_sided_share: f64) -> Result<(MeanBounds, Flags), StatError> {
        let mut flags = Flags::default();
        let bounds = match self.method {
            BoundMethod::ExactChernoff => {
                let interval = FailureProbability::new(2.0 * one_sided_share)?;
                bounds::invert_mean_bounds_exact(chi, interval)?
            }
            BoundMethod::SimplifiedChernoff => {
                let interval = FailureProbability::new(2.0 * one_sided_share)?;
                if chi > 6.0 * interval.beta() {
                    bounds::invert_mean_bounds_simplified(chi, interval, true)?
                } else {
                    flags.insert(Flags::ENGINE_FALLBACK);
                    bounds::invert_mean_bounds_exact(chi, interval)?
                }
            }
            BoundMethod::AsymptoticChernoff => {
                let interval = FailureProbability::new(2.0 * one_sided_share)?;
                if chi > 2.0 * interval.beta() {
                    bounds::invert_mean_bounds_asymptotic(chi, interval)?
                } else {
                    flags.insert(Flags::ENGINE_FALLBACK);
                    bounds::invert_mean_bounds_exact(chi, interval)?
                }
            }
            BoundMethod::Gaussian => {
                let b = bounds::gaussian_bounds_at(chi, self.gaussian_multiplier, self.step_eps);
                if chi > 0.0 && b.lower == 0.0 {
                    flags.insert(Flags::LOWER_CLAMPED);
                }
                b
            }
            BoundMethod::ChernoffHoeffding => {
                let budget = CHBudget::new(self.step_eps, self.step_eps, self.step_eps, self.trials)?;
                let out = bounds::ch_mean_bounds(chi, &budget);
                if out.fallback {
                    flags.insert(Flags::CH_FALLBACK);
                }
                if chi > 0.0 && out.bounds.lower == 0.0 {
                    flags.insert(Flags::LOWER_CLAMPED);
                }
                out.bounds
            }
        };
        Ok((bounds, flags))
    }
}

/// Per-state mean bounds on the gains Q^a and error gains E^a Q^a,
/// normalized by the per-state pulse counts of one basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBounds {
    pub gain: [MeanBounds; 3],
    pub error_gain: [MeanBounds; 3],
    pub flags: Flags,
}

/// Bounds the expected gains of one basis from its tallies.
///
/// `basis_pulses` is the number of pulses Alice committed to this basis that
/// Bob also measured in it (N q_gamma^2). The count step spreads its budget
/// over the three one-sided bounds the yield formula consumes, the error
/// step over its two.
pub fn mean_gain_bounds(
    tallies: &BasisTallies,
    basis_pulses: f64,
    ensemble: &PulseEnsemble,
    eps_step: f64,
    method: BoundMethod,
) -> Result<GainBounds, EstimateError> {
    tallies.validate()?;
    if basis_pulses <= 0.0 || basis_pulses.is_nan() {
        return Err(EstimateError::InvalidTallies(format!(
            "basis pulse count must be positive, got {basis_pulses}"
        )));
    }
    let trials = (tallies.total_detections().ceil() as u64).max(1);
    let ctx = EngineCtx::new(method, eps_step, trials)?;
    let mut flags = Flags::default();
    let mut gain = [MeanBounds {
        lower: 0.0,
        upper: 0.0,
        epsilon: 0.0,
    }; 3];
    let mut error_gain = gain;
    for state in StateKind::ALL {
        let i = state.index();
        let pulses = basis_pulses * ensemble.share(state);
        let (counts, f) = ctx.bounds(tallies.detections[i], eps_step / 3.0)?;
        flags.insert(f);
        let (errors, f) = ctx.bounds(tallies.errors[i], eps_step / 2.0)?;
        flags.insert(f);
        gain[i] = MeanBounds {
            lower: counts.lower / pulses,
            upper: counts.upper / pulses,
            epsilon: counts.epsilon,
        };
        error_gain[i] = MeanBounds {
            lower: errors.lower / pulses,
            upper: errors.upper / pulses,
            epsilon: errors.epsilon,
        };
    }
    Ok(GainBounds {
        gain,
        error_gain,
        flags,
    })
}

/// Infinite-data reference: every bound collapses onto the observed rate.
pub fn collapsed_gain_bounds(
    tallies: &BasisTallies,
    basis_pulses: f64,
    ensemble: &PulseEnsemble,
) -> GainBounds {
    let collapse = |v: f64| MeanBounds {
        lower: v,
        upper: v,
        epsilon: 0.0,
    };
    let mut gain = [collapse(0.0); 3];
    let mut error_gain = gain;
    for state in StateKind::ALL {
        let i = state.index();
        let pulses = basis_pulses * ensemble.share(state);
        gain[i] = collapse(tallies.detections[i] / pulses);
        error_gain[i] = collapse(tallies.errors[i] / pulses);
    }
    GainBounds {
        gain,
        error_gain,
        flags: Flags::default(),
    }
}

// ---------------------------------------------------------------------------
// Vacuum+weak closed-form bounds
// ---------------------------------------------------------------------------

/// Lower bound on the single-photon yield from the three gain intervals,
/// clamped at zero.
pub fn single_photon_yield_lower(gains: &GainBounds, ensemble: &PulseEnsemble) -> (f64, Flags) {
    let mu = ensemble.signal_intensity;
    let nu = ensemble.weak_intensity;
    let qw_low = gains.gain[StateKind::Weak.index()].lower;
    let qs_high = gains.gain[StateKind::Signal.index()].upper;
    let qv_high = gains.gain[StateKind::Vacuum.index()].upper;
    let raw = mu / (mu * nu - nu * nu)
        * (qw_low * nu.exp()
            - qs_high * mu.exp() * nu * nu / (mu * mu)
            - (mu * mu - nu * nu) / (mu * mu) * qv_high);
    if raw < 0.0 {
        (0.0, Flags::YIELD_CLAMPED)
    } else {
        (raw, Flags::default())
    }
}

/// Upper bound on the single-photon error product e1 Y1 from the weak and
/// vacuum error-gain intervals, clamped at zero.
pub fn single_photon_error_product_upper(
    gains: &GainBounds,
    ensemble: &PulseEnsemble,
) -> (f64, Flags) {
    let nu = ensemble.weak_intensity;
    let ew_high = gains.error_gain[StateKind::Weak.index()].upper;
    let ev_low = gains.error_gain[StateKind::Vacuum.index()].lower;
    let raw = (ew_high - ev_low * (-nu).exp()) / (nu * (-nu).exp());
    if raw < 0.0 {
        (0.0, Flags::ERROR_PRODUCT_CLAMPED)
    } else {
        (raw, Flags::default())
    }
}

/// Converts the yield and error-product bounds into a single-photon
/// detection count and error rate for one basis. A vanishing yield yields
/// no credit: zero detections at the trivial error rate 1/2.
pub fn single_photon_counts_and_error(
    yield_lower: f64,
    error_product_upper: f64,
    basis_pulses: f64,
    ensemble: &PulseEnsemble,
) -> (f64, f64) {
    if yield_lower <= 0.0 {
        return (0.0, 0.5);
    }
    let mu = ensemble.signal_intensity;
    let nu = ensemble.weak_intensity;
    let single_photon_pulses = basis_pulses
        * ((-mu).exp() * mu * ensemble.signal_share + (-nu).exp() * nu * ensemble.weak_share);
    let m1 = yield_lower * single_photon_pulses;
    let e1 = (error_product_upper / yield_lower).max(0.0);
    (m1, e1)
}

/// Restricts a basis-wide single-photon count to signal pulses only: scales
/// by the signal conditional p1 and takes the lower observation bound of the
/// resulting mean.
pub fn signal_single_photon_lower(
    m1_lower_basis: f64,
    p1_signal: f64,
    eps_step: f64,
) -> Result<f64, StatError> {
    debug_assert!(m1_lower_basis >= 0.0 && (0.0..=1.0).contains(&p1_signal));
    let mean = p1_signal * m1_lower_basis;
    let eps = FailureProbability::new(eps_step)?;
    Ok(bounds::observation_bounds_from_mean(mean, eps).lower)
}

/// Upper-bounds the phase error rate of the key pool from the bit error rate
/// observed on the complementary pool, capped at 1/2.
///
/// Returns (phase error upper bound, deviation theta, flags).
pub fn phase_error_upper(
    e1_bit_upper: f64,
    m1_lower_other_basis: f64,
    m1_signal_lower: f64,
    eps_step: f64,
) -> Result<(f64, f64, Flags), EstimateError> {
    if m1_lower_other_basis < 1.0 || m1_signal_lower < 1.0 {
        return Err(EstimateError::InsufficientCounts(format!(
            "single-photon pools must hold at least one count, got ({m1_lower_other_basis}, {m1_signal_lower})"
        )));
    }
    let mut flags = Flags::default();
    if e1_bit_upper >= 0.5 {
        flags.insert(Flags::PHASE_CAPPED);
        return Ok((0.5, 0.0, flags));
    }
    let dev = bounds::random_sampling_deviation(
        e1_bit_upper,
        m1_lower_other_basis,
        m1_signal_lower,
        eps_step,
    )?;
    if dev.saturated {
        flags.insert(Flags::SAMPLING_SATURATED);
    }
    if dev.regularized {
        flags.insert(Flags::SAMPLING_REGULARIZED);
    }
    let mut phase = e1_bit_upper + dev.theta;
    if phase >= 0.5 {
        phase = 0.5;
        flags.insert(Flags::PHASE_CAPPED);
    }
    Ok((phase, dev.theta, flags))
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Certified single-photon quantities for one key basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePhotonEstimate {
    /// Lower bound on single-photon detections across all states, this basis.
    pub m1_lower: f64,
    /// Upper bound on the single-photon bit error rate of the complementary
    /// basis, which sources this basis's phase error.
    pub e1_bit_upper: f64,
    /// Lower bound on single-photon detections from signal pulses only.
    pub m1_signal_lower: f64,
    /// Upper bound on the phase error rate, capped at 1/2.
    pub phase_error_upper: f64,
    /// Random-sampling deviation between bit and phase error rates.
    pub theta: f64,
    /// Failure budget consumed for this key direction.
    pub budget_spent: f64,
    pub flags: Flags,
}

impl SinglePhotonEstimate {
    fn no_credit(eps_step: f64, flags: Flags) -> Self {
        Self {
            m1_lower: 0.0,
            e1_bit_upper: 0.5,
            m1_signal_lower: 0.0,
            phase_error_upper: 0.5,
            theta: 0.0,
            budget_spent: 4.0 * eps_step,
            flags: flags.union(Flags::NO_SINGLE_PHOTON_CREDIT),
        }
    }
}

/// Estimates for both key directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePair {
    pub z: SinglePhotonEstimate,
    pub x: SinglePhotonEstimate,
}

struct BasisCore {
    m1_lower: f64,
    e1_upper: f64,
    flags: Flags,
}

fn basis_core(
    tallies: &BasisTallies,
    basis_pulses: f64,
    ensemble: &PulseEnsemble,
    eps_step: f64,
    method: BoundMethod,
) -> Result<BasisCore, EstimateError> {
    let gains = mean_gain_bounds(tallies, basis_pulses, ensemble, eps_step, method)?;
    let mut flags = gains.flags;
    let (y1, f) = single_photon_yield_lower(&gains, ensemble);
    flags.insert(f);
    let (e1y1, f) = single_photon_error_product_upper(&gains, ensemble);
    flags.insert(f);
    let (m1_lower, e1_upper) = single_photon_counts_and_error(y1, e1y1, basis_pulses, ensemble);
    Ok(BasisCore {
        m1_lower,
        e1_upper,
        flags,
    })
}

/// Runs the full estimation chain for both key directions.
///
/// Each direction consumes four budget steps of `eps_step`: its own count
/// bounds, the complementary basis's error bounds, the signal restriction,
/// and the random-sampling bridge; eight steps across the whole protocol.
/// Degenerate sub-steps (no single-photon credit, starved pools) produce a
/// flagged zero-credit estimate rather than an error.
pub fn estimate(
    tallies: &ObservedTallies,
    ensemble: &PulseEnsemble,
    q_z: f64,
    eps_step: f64,
    method: BoundMethod,
) -> Result<EstimatePair, EstimateError> {
    tallies.validate()?;
    if !(q_z > 0.0 && q_z < 1.0) {
        return Err(EstimateError::InvalidTallies(format!(
            "basis probability must lie in (0,1), got {q_z}"
        )));
    }
    FailureProbability::new(eps_step).map_err(EstimateError::Stat)?;

    let pulses_z = ensemble.total_pulses * q_z * q_z;
    let pulses_x = ensemble.total_pulses * (1.0 - q_z) * (1.0 - q_z);
    let core_z = basis_core(&tallies.z, pulses_z, ensemble, eps_step, method)?;
    let core_x = basis_core(&tallies.x, pulses_x, ensemble, eps_step, method)?;
    let p1_signal = poisson_conditional(1, ensemble).probabilities[StateKind::Signal.index()];

    let direction = |own: &BasisCore, other: &BasisCore| -> Result<SinglePhotonEstimate, EstimateError> {
        let flags = own.flags.union(other.flags);
        if own.m1_lower <= 0.0 {
            return Ok(SinglePhotonEstimate::no_credit(eps_step, flags));
        }
        let m1_signal = signal_single_photon_lower(own.m1_lower, p1_signal, eps_step)?;
        if m1_signal < 1.0 || other.m1_lower < 1.0 {
            let mut f = flags;
            f.insert(Flags::INSUFFICIENT_COUNTS);
            return Ok(SinglePhotonEstimate::no_credit(eps_step, f));
        }
        let (phase, theta, f) =
            phase_error_upper(other.e1_upper.min(1.0), other.m1_lower, m1_signal, eps_step)?;
        Ok(SinglePhotonEstimate {
            m1_lower: own.m1_lower,
            e1_bit_upper: other.e1_upper,
            m1_signal_lower: m1_signal,
            phase_error_upper: phase,
            theta,
            budget_spent: 4.0 * eps_step,
            flags: flags.union(f),
        })
    };

    Ok(EstimatePair {
        z: direction(&core_z, &core_x)?,
        x: direction(&core_x, &core_z)?,
    })
}
