//! Statistical fluctuation primitives: Chernoff tail bounds and their
//! inversions in both directions (observation -> mean and mean -> observation),
//! the Gaussian and Chernoff+Hoeffding baselines, and the random-sampling
//! deviation solver used for phase-error estimation.
//!
//! All tail quantities are computed in log space; observed values up to ~1e10
//! never touch a direct power.

mod erf;
mod solve;

pub use erf::{erf, erfc};

use solve::{solve_monotone, SolveFailure};
use thiserror::Error;

/// Errors from the statistical primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("{name} must satisfy {requirement}, got {value}")]
    Domain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("precondition violated in {what}: {detail}")]
    Precondition { what: &'static str, detail: String },
    #[error("root finding failed in {what}")]
    NumericFailure { what: &'static str },
}

fn check_domain(name: &'static str, value: f64, ok: bool, requirement: &'static str) -> Result<(), StatError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(StatError::Domain {
            name,
            requirement,
            value,
        })
    }
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Total failure probability of a two-sided confidence interval.
///
/// Each one-sided bound is budgeted half of it, so the derived exponent is
/// `beta = -ln(epsilon/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureProbability(f64);

impl FailureProbability {
    pub fn new(epsilon: f64) -> Result<Self, StatError> {
        check_domain("epsilon", epsilon, epsilon > 0.0 && epsilon < 1.0, "0 < epsilon < 1")?;
        Ok(Self(epsilon))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// -ln(epsilon/2), the one-sided tail exponent. Always above ln 2.
    pub fn beta(self) -> f64 {
        -(self.0 / 2.0).ln()
    }
}

/// Two-sided bound on an unknown expectation value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanBounds {
    pub lower: f64,
    pub upper: f64,
    /// Total failure probability carried by the interval.
    pub epsilon: f64,
}

/// Confidence interval on a future observation given its expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationBounds {
    pub lower: f64,
    pub upper: f64,
    pub epsilon: f64,
}

/// Relative deviations defining a mean interval [chi/(1+dL), chi/(1-dU)].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationPair {
    pub delta_lower: f64,
    pub delta_upper: f64,
}

impl DeviationPair {
    pub fn new(delta_lower: f64, delta_upper: f64) -> Result<Self, StatError> {
        check_domain("delta_lower", delta_lower, delta_lower > 0.0, "> 0")?;
        check_domain("delta_upper", delta_upper, delta_upper > 0.0 && delta_upper < 1.0, "in (0,1)")?;
        Ok(Self {
            delta_lower,
            delta_upper,
        })
    }
}

/// Which fluctuation engine converts observed tallies into mean bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    ExactChernoff,
    SimplifiedChernoff,
    AsymptoticChernoff,
    Gaussian,
    ChernoffHoeffding,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 5] = [
        BoundMethod::ExactChernoff,
        BoundMethod::SimplifiedChernoff,
        BoundMethod::AsymptoticChernoff,
        BoundMethod::Gaussian,
        BoundMethod::ChernoffHoeffding,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundMethod::ExactChernoff => "exact",
            BoundMethod::SimplifiedChernoff => "simplified",
            BoundMethod::AsymptoticChernoff => "asymptotic",
            BoundMethod::Gaussian => "gaussian",
            BoundMethod::ChernoffHoeffding => "ch",
        }
    }
}

impl std::str::FromStr for BoundMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "exact-chernoff" | "chernoff" => Ok(BoundMethod::ExactChernoff),
            "simplified" | "simplified-chernoff" => Ok(BoundMethod::SimplifiedChernoff),
            "asymptotic" | "asymptotic-chernoff" => Ok(BoundMethod::AsymptoticChernoff),
            "gaussian" | "gauss" => Ok(BoundMethod::Gaussian),
            "ch" | "chernoff-hoeffding" => Ok(BoundMethod::ChernoffHoeffding),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

impl std::fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Failure budget and trial count for the Chernoff+Hoeffding baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CHBudget {
    /// Hoeffding pre-estimate budget.
    pub eps1: f64,
    /// Upper-bound budget.
    pub eps2: f64,
    /// Lower-bound budget.
    pub eps3: f64,
    /// Number of Bernoulli trials behind the observation.
    pub trials: u64,
}

impl CHBudget {
    pub fn new(eps1: f64, eps2: f64, eps3: f64, trials: u64) -> Result<Self, StatError> {
        check_domain("eps1", eps1, eps1 > 0.0 && eps1 < 1.0, "in (0,1)")?;
        check_domain("eps2", eps2, eps2 > 0.0 && eps2 < 1.0, "in (0,1)")?;
        check_domain("eps3", eps3, eps3 > 0.0 && eps3 < 1.0, "in (0,1)")?;
        if trials == 0 {
            return Err(StatError::Domain {
                name: "trials",
                requirement: ">= 1",
                value: 0.0,
            });
        }
        Ok(Self {
            eps1,
            eps2,
            eps3,
            trials,
        })
    }
}

// ---------------------------------------------------------------------------
// Elementary functions
// ---------------------------------------------------------------------------

/// Shannon binary entropy in bits, with the 0 log 0 = 0 convention.
pub fn binary_entropy(x: f64) -> Result<f64, StatError> {
    check_domain("x", x, (0.0..=1.0).contains(&x), "in [0,1]")?;
    Ok(entropy_bits(x))
}

/// Entropy for callers whose inputs are in range by construction.
pub(crate) fn entropy_bits(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    -(x * x.log2() + (1.0 - x) * (1.0 - x).log2())
}

/// Chernoff exponent rate: (1+delta) ln(1+delta) - delta, for delta > -1.
///
/// Zero only at delta = 0; the tail bound is g(delta, mean) = e^{-mean * g2(delta)}.
pub fn g2(delta: f64) -> Result<f64, StatError> {
    check_domain("delta", delta, delta > -1.0, "> -1")?;
    Ok(g2_unchecked(delta))
}

fn g2_unchecked(delta: f64) -> f64 {
    if delta.abs() < 0.5 {
        // sum_{k>=2} (-1)^k delta^k / (k(k-1)); avoids the cancellation of
        // (1+d) ln(1+d) - d, whose leading terms are both ~d
        let mut term = delta * delta; // delta^k
        let mut sum = term / 2.0;
        let mut k = 3.0;
        loop {
            term *= -delta;
            let add = term / (k * (k - 1.0));
            sum += add;
            if add.abs() <= sum.abs() * 1e-17 || k > 60.0 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        (1.0 + delta) * delta.ln_1p() - delta
    }
}

/// Multiplicative Chernoff tail bound [e^delta / (1+delta)^{1+delta}]^mean,
/// evaluated as exp(-mean * g2(delta)).
pub fn chernoff_g(delta: f64, mean: f64) -> Result<f64, StatError> {
    check_domain("delta", delta, delta > -1.0, "> -1")?;
    check_domain("mean", mean, mean >= 0.0, ">= 0")?;
    Ok((-mean * g2_unchecked(delta)).exp())
}

/// phi(1+w) = w - ln(1+w); strictly increasing for w > 0, strictly
/// decreasing for -1 < w < 0, zero at w = 0.
fn phi_shifted(w: f64) -> f64 {
    if w.abs() < 0.5 {
        // sum_{k>=2} (-1)^k w^k / k
        let mut term = w * w;
        let mut sum = term / 2.0;
        let mut k = 3.0;
        loop {
            term *= -w;
            let add = term / k;
            sum += add;
            if add.abs() <= sum.abs() * 1e-17 || k > 80.0 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        w - w.ln_1p()
    }
}

/// psi(y) = e^{-y} + y - 1 = phi(e^{-y}); strictly increasing for y >= 0.
fn psi(y: f64) -> f64 {
    if y < 0.5 {
        // sum_{k>=2} (-y)^k / k!
        let mut term = y * y / 2.0;
        let mut sum = term;
        let mut k = 3.0;
        loop {
            term *= -y / k;
            sum += term;
            if term.abs() <= sum.abs() * 1e-17 || k > 40.0 {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        (-y).exp() + y - 1.0
    }
}

// ---------------------------------------------------------------------------
// Exact Chernoff inversion (observation -> mean)
// ---------------------------------------------------------------------------

/// One-sided lower bound on the mean: the smallest m with
/// Pr[observing >= chi | mean = m] bounded by `failure`.
///
/// Solves (1+d) ln(1+d) - d = beta * (1+d)/chi through the substitution
/// m = chi e^{-y}, which turns the equation into e^{-y} + y - 1 = beta/chi
/// and stays stable when the bound is many orders below chi.
pub fn exact_mean_lower(chi: f64, failure: f64) -> Result<f64, StatError> {
    check_domain("chi", chi, chi >= 0.0, ">= 0")?;
    check_domain("failure", failure, failure > 0.0 && failure < 1.0, "in (0,1)")?;
    if chi == 0.0 {
        return Ok(0.0);
    }
    let beta = -failure.ln();
    let target = beta / chi;
    if !target.is_finite() {
        return Ok(0.0);
    }
    let y = solve_monotone(psi, target, 0.0, target + 1.0).map_err(solve_err("exact_mean_lower"))?;
    Ok(chi * (-y).exp())
}

/// One-sided upper bound on the mean: the largest m with
/// Pr[observing <= chi | mean = m] bounded by `failure`.
pub fn exact_mean_upper(chi: f64, failure: f64) -> Result<f64, StatError> {
    check_domain("chi", chi, chi >= 0.0, ">= 0")?;
    check_domain("failure", failure, failure > 0.0 && failure < 1.0, "in (0,1)")?;
    let beta = -failure.ln();
    if chi == 0.0 {
        return Ok(beta);
    }
    let target = beta / chi;
    if !target.is_finite() {
        return Ok(beta);
    }
    // m = chi (1+w); solve w - ln(1+w) = beta/chi on w > 0
    let mut hi = 1.0;
    while phi_shifted(hi) < target {
        hi = hi * 2.0 + 2.0;
        if hi > 1e308 {
            return Err(StatError::NumericFailure {
                what: "exact_mean_upper",
            });
        }
    }
    let w = solve_monotone(phi_shifted, target, 0.0, hi).map_err(solve_err("exact_mean_upper"))?;
    Ok(chi * (1.0 + w))
}

fn solve_err(what: &'static str) -> impl Fn(SolveFailure) -> StatError {
    move |_| StatError::NumericFailure { what }
}

/// Exact inversion of the Chernoff tail bounds: the tightest interval on the
/// unknown mean consistent with observing `chi`, at total failure `eps`
/// (half per side). chi = 0 yields [0, beta].
pub fn invert_mean_bounds_exact(chi: f64, eps: FailureProbability) -> Result<MeanBounds, StatError> {
    let half = eps.value() / 2.0;
    Ok(MeanBounds {
        lower: exact_mean_lower(chi, half)?,
        upper: exact_mean_upper(chi, half)?,
        epsilon: eps.value(),
    })
}

/// Closed-form deviations from the symmetric Chernoff bound, valid for
/// chi > 6 beta. `symmetric` reuses the lower-branch delta for both sides;
/// otherwise the slightly tighter upper-branch root is used.
pub fn invert_mean_bounds_simplified(
    chi: f64,
    eps: FailureProbability,
    symmetric: bool,
) -> Result<MeanBounds, StatError> {
    check_domain("chi", chi, chi >= 0.0, ">= 0")?;
    let beta = eps.beta();
    if chi <= 6.0 * beta {
        return Err(StatError::Precondition {
            what: "invert_mean_bounds_simplified",
            detail: format!("requires chi > 6*beta, got chi = {chi}, 6*beta = {}", 6.0 * beta),
        });
    }
    let delta_lower = (3.0 * beta + (8.0 * beta * chi + beta * beta).sqrt()) / (2.0 * (chi - beta));
    let delta_upper = if symmetric {
        delta_lower
    } else {
        ((8.0 * beta * chi + 9.0 * beta * beta).sqrt() - beta) / (2.0 * (chi + beta))
    };
    Ok(MeanBounds {
        lower: chi / (1.0 + delta_lower),
        upper: chi / (1.0 - delta_upper),
        epsilon: eps.value(),
    })
}

/// Large-chi limit of the exact inversion: chi -/+ sqrt(2 beta chi).
pub fn invert_mean_bounds_asymptotic(chi: f64, eps: FailureProbability) -> Result<MeanBounds, StatError> {
    check_domain("chi", chi, chi > 0.0, "> 0")?;
    let beta = eps.beta();
    if chi <= 2.0 * beta {
        return Err(StatError::Precondition {
            what: "invert_mean_bounds_asymptotic",
            detail: format!("requires chi > 2*beta, got chi = {chi}, 2*beta = {}", 2.0 * beta),
        });
    }
    let dev = (2.0 * beta * chi).sqrt();
    Ok(MeanBounds {
        lower: chi - dev,
        upper: chi + dev,
        epsilon: eps.value(),
    })
}

/// Total failure probability of the mean interval
/// [chi/(1+delta_lower), chi/(1-delta_upper)] for observation chi.
///
/// Each one-sided term is the tail bound evaluated at the interval endpoint;
/// values of 1 or more mean the interval carries no confidence.
pub fn interval_failure_probability(chi: f64, deltas: &DeviationPair) -> f64 {
    debug_assert!(chi > 0.0);
    let mean_low = chi / (1.0 + deltas.delta_lower);
    let mean_high = chi / (1.0 - deltas.delta_upper);
    (-mean_low * g2_unchecked(deltas.delta_lower)).exp()
        + (-mean_high * g2_unchecked(-deltas.delta_upper)).exp()
}

// ---------------------------------------------------------------------------
// Mean -> observation (symmetric Chernoff form)
// ---------------------------------------------------------------------------

/// Interval that a future observation falls into with probability 1 - eps,
/// given its expectation. The deviation solves
/// 2 exp(-delta^2 mean / (2+delta)) = eps in closed form. A zero mean gives
/// the degenerate interval (0,0): a sum of Bernoullis with zero mean is
/// surely zero.
pub fn observation_bounds_from_mean(mean: f64, eps: FailureProbability) -> ObservationBounds {
    debug_assert!(mean >= 0.0);
    if mean == 0.0 {
        return ObservationBounds {
            lower: 0.0,
            upper: 0.0,
            epsilon: eps.value(),
        };
    }
    let beta = eps.beta();
    let delta = (beta + (beta * beta + 8.0 * beta * mean).sqrt()) / (2.0 * mean);
    ObservationBounds {
        lower: (mean * (1.0 - delta)).max(0.0),
        upper: mean * (1.0 + delta),
        epsilon: eps.value(),
    }
}

// ---------------------------------------------------------------------------
// Gaussian baseline
// ---------------------------------------------------------------------------

/// Number of standard deviations n with erfc(n/sqrt(2)) = eps.
pub fn gaussian_sigma_multiplier(eps: FailureProbability) -> f64 {
    std::f64::consts::SQRT_2 * erf::erfc_inv(eps.value())
}

/// Gaussian-approximation bounds chi -/+ n_alpha sqrt(chi), lower clamped
/// at zero. At chi = 0 both bounds are zero.
pub fn gaussian_mean_bounds(chi: f64, eps: FailureProbability) -> MeanBounds {
    gaussian_bounds_at(chi, gaussian_sigma_multiplier(eps), eps.value())
}

/// Gaussian bounds at a precomputed sigma multiplier; hot paths invert the
/// error function once per failure budget instead of once per tally.
pub(crate) fn gaussian_bounds_at(chi: f64, n_alpha: f64, epsilon: f64) -> MeanBounds {
    debug_assert!(chi >= 0.0);
    let dev = n_alpha * chi.sqrt();
    MeanBounds {
        lower: (chi - dev).max(0.0),
        upper: chi + dev,
        epsilon,
    }
}

// ---------------------------------------------------------------------------
// Chernoff+Hoeffding baseline
// ---------------------------------------------------------------------------

/// Hoeffding lower bound on the mean: chi - sqrt(n ln(1/eps1) / 2).
/// May be negative; callers clamp.
pub fn hoeffding_lower_mean(chi: f64, trials: u64, eps1: f64) -> f64 {
    debug_assert!(chi >= 0.0 && eps1 > 0.0 && eps1 <= 1.0);
    chi - (trials as f64 * (1.0 / eps1).ln() / 2.0).sqrt()
}

/// Result of the Chernoff+Hoeffding bound selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChOutcome {
    pub bounds: MeanBounds,
    /// Outcomes of the three regime tests on the pre-estimate.
    pub tests: [bool; 3],
    /// Set when the pre-estimate was non-positive and both deviations fell
    /// back to the Hoeffding form.
    pub fallback: bool,
}

/// Chernoff+Hoeffding mean bounds: a Hoeffding pre-estimate picks between
/// Chernoff-form and Hoeffding-form deviations per side.
pub fn ch_mean_bounds(chi: f64, budget: &CHBudget) -> ChOutcome {
    debug_assert!(chi >= 0.0);
    let n = budget.trials as f64;
    let g = |x: f64, log_inv_y: f64| (2.0 * x * log_inv_y).sqrt();
    let mu_lower = hoeffding_lower_mean(chi, budget.trials, budget.eps1);
    let hoeffding_dev = |e: f64| (n / 2.0 * (1.0 / e).ln()).sqrt();

    let (tests, delta_up, delta_down, fallback) = if mu_lower <= 0.0 {
        ([false; 3], hoeffding_dev(budget.eps2), hoeffding_dev(budget.eps3), true)
    } else {
        let test1 = (2.0 / budget.eps2).ln() / mu_lower <= 0.5;
        let test2 = (1.0 / budget.eps3).ln() / mu_lower < 1.0 / 3.0;
        let t3_limit = (2.0 * std::f64::consts::E - 1.0) / 2.0;
        let test3 = budget.eps3.ln() / mu_lower < t3_limit * t3_limit;
        let up = if test1 {
            // ln(16 / eps2^4)
            g(chi, 16f64.ln() + 4.0 * (1.0 / budget.eps2).ln())
        } else {
            hoeffding_dev(budget.eps2)
        };
        let down = if test2 {
            g(chi, 1.5 * (1.0 / budget.eps3).ln())
        } else if test3 {
            g(chi, 2.0 * (1.0 / budget.eps3).ln())
        } else {
            hoeffding_dev(budget.eps3)
        };
        ([test1, test2, test3], up, down, false)
    };

    ChOutcome {
        bounds: MeanBounds {
            lower: (chi - delta_down).max(0.0),
            upper: chi + delta_up,
            epsilon: budget.eps1 + budget.eps2 + budget.eps3,
        },
        tests,
        fallback,
    }
}

// ---------------------------------------------------------------------------
// Random sampling deviation
// ---------------------------------------------------------------------------

/// Deviation between the bit error rate observed on one pool and the phase
/// error rate of the complementary pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingDeviation {
    pub theta: f64,
    /// No deviation within (0, 1 - e] satisfies the budget; theta saturates
    /// at 1 - e and the resulting bound is vacuous.
    pub saturated: bool,
    /// The error rate sat on a boundary and was nudged inward by half a count.
    pub regularized: bool,
}

/// Smallest theta such that the random-sampling tail probability of the
/// complementary pool exceeding `e_bx + theta` stays below `eps`.
///
/// The tail is prefactor * 2^{-(n_x+n_z) xi(theta)} with
/// xi(t) = h(e + t - q t) - q h(e) - (1-q) h(e + t), q = n_x/(n_x+n_z);
/// xi is increasing on the relevant range, so bisection applies.
pub fn random_sampling_deviation(
    e_bx: f64,
    n_x: f64,
    n_z: f64,
    eps: f64,
) -> Result<SamplingDeviation, StatError> {
    check_domain("e_bx", e_bx, (0.0..=1.0).contains(&e_bx), "in [0,1]")?;
    check_domain("n_x", n_x, n_x >= 1.0, ">= 1")?;
    check_domain("n_z", n_z, n_z >= 1.0, ">= 1")?;
    check_domain("eps", eps, eps > 0.0 && eps < 1.0, "in (0,1)")?;

    // The prefactor diverges at e in {0,1}; nudge inward by half a count.
    let half_count = 1.0 / (2.0 * n_x);
    let e = e_bx.clamp(half_count, 1.0 - half_count);
    let regularized = e != e_bx;

    let total = n_x + n_z;
    let q_x = n_x / total;
    let prefactor = total.sqrt() / (e * (1.0 - e) * n_x * n_z).sqrt();
    if prefactor <= eps {
        return Ok(SamplingDeviation {
            theta: 0.0,
            saturated: false,
            regularized,
        });
    }
    let target = (prefactor / eps).log2() / total;
    let xi = |t: f64| {
        entropy_bits(e + t - q_x * t) - q_x * entropy_bits(e) - (1.0 - q_x) * entropy_bits(e + t)
    };
    let theta_max = 1.0 - e;
    if xi(theta_max) < target {
        return Ok(SamplingDeviation {
            theta: theta_max,
            saturated: true,
            regularized,
        });
    }
    let theta = solve_monotone(xi, target, 0.0, theta_max)
        .map_err(solve_err("random_sampling_deviation"))?;
    Ok(SamplingDeviation {
        theta,
        saturated: false,
        regularized,
    })
}

// ---------------------------------------------------------------------------
// Gaussian / exact-Chernoff lower-bound crossover
// ---------------------------------------------------------------------------

/// Smallest observation chi at which the Gaussian lower bound overtakes the
/// one-sided exact-Chernoff lower bound at failure `eps`, found by bisection.
///
/// The Gaussian deviation uses n_alpha with erfc(n_alpha/sqrt(2)) = eps;
/// the Chernoff side budgets the full eps to its single side.
pub fn gaussian_chernoff_lower_crossover(eps: FailureProbability) -> Result<f64, StatError> {
    let n_alpha = gaussian_sigma_multiplier(eps);
    let diff = |chi: f64| {
        let gauss = chi - n_alpha * chi.sqrt();
        gauss - exact_mean_lower(chi, eps.value()).unwrap_or(f64::INFINITY)
    };
    let mut lo = n_alpha * n_alpha + 1.0;
    if diff(lo) >= 0.0 {
        return Ok(lo);
    }
    let mut hi = 2.0 * lo;
    while diff(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(StatError::NumericFailure {
                what: "gaussian_chernoff_lower_crossover",
            });
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if diff(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS10: f64 = 1e-10;

    fn fp(eps: f64) -> FailureProbability {
        FailureProbability::new(eps).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    // ---- entropy ----

    #[test]
    fn entropy_endpoints_and_maximum() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
    }

    #[test]
    fn entropy_reference_value() {
        // mpmath, 60 digits
        assert!(rel(binary_entropy(0.033).unwrap(), 0.20922047786915264672) < 1e-14);
    }

    #[test]
    fn entropy_rejects_out_of_range() {
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    // ---- g2 and the tail bound ----

    #[test]
    fn g2_values() {
        assert_eq!(g2(0.0).unwrap(), 0.0);
        assert!(rel(g2(0.1).unwrap(), 0.0048411977847573460483) < 1e-13);
        assert!(rel(g2(1.0).unwrap(), 0.38629436111989061883) < 1e-14);
        // negative branch is positive and grows toward delta = -1
        assert!(rel(g2(-1.0 + 1e-9).unwrap(), 0.99999997827673416305) < 1e-12);
        assert!(g2(-0.3).unwrap() > 0.0);
        assert!(g2(-1.0).is_err());
    }

    #[test]
    fn g2_strictly_increasing_in_magnitude() {
        let mut prev = 0.0;
        for i in 1..100 {
            let v = g2(i as f64 * 0.05).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let mut prev = 0.0;
        for i in 1..19 {
            let v = g2(-(i as f64) * 0.05).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn chernoff_g_values() {
        assert_eq!(chernoff_g(0.0, 1e9).unwrap(), 1.0);
        assert_eq!(chernoff_g(3.0, 0.0).unwrap(), 1.0);
        assert!(rel(chernoff_g(1.0, 100.0).unwrap(), 1.6728194042202236205e-17) < 1e-12);
        assert!(chernoff_g(-1.0, 1.0).is_err());
    }

    // ---- exact inversion ----

    #[test]
    fn beta_at_1e_minus_10() {
        assert!((fp(EPS10).beta() - 23.7189981105004).abs() < 5e-11);
    }

    #[test]
    fn exact_inversion_at_zero() {
        let b = invert_mean_bounds_exact(0.0, fp(EPS10)).unwrap();
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - 23.7190).abs() < 5e-5);
    }

    #[test]
    fn exact_inversion_reference_values() {
        // mpmath bisection at 60 digits
        let b = invert_mean_bounds_exact(100.0, fp(EPS10)).unwrap();
        assert!(rel(b.lower, 45.943740034023488715) < 1e-11);
        assert!(rel(b.upper, 185.5162010603038655) < 1e-11);
        let b = invert_mean_bounds_exact(1e6, fp(EPS10)).unwrap();
        assert!(rel(b.lower, 993128.27890097891422) < 1e-11);
        assert!(rel(b.upper, 1006903.3464131657397) < 1e-11);
        // tiny observation: upper tends to beta from above
        let b = invert_mean_bounds_exact(0.425, fp(EPS10)).unwrap();
        assert!(rel(b.upper, 25.890554446094739192) < 1e-11);
        assert!(b.lower < 1e-20);
    }

    /// Independent oracle: plain bisection on the deviation form
    /// ln(1+d) - d/(1+d) = beta/chi, nothing shared with the implementation.
    fn oracle_exact(chi: f64, beta: f64) -> (f64, f64) {
        let g_lower = |d: f64| (1.0 + d).ln() - d / (1.0 + d);
        let g_upper = |d: f64| (1.0 - d).ln() + d / (1.0 - d);
        let target = beta / chi;
        let mut hi = 1.0;
        while g_lower(hi) < target {
            hi *= 2.0;
        }
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g_lower(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d_lower = 0.5 * (lo + hi);
        let (mut lo, mut hi) = (0.0, 1.0 - 1e-15);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g_upper(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d_upper = 0.5 * (lo + hi);
        (chi / (1.0 + d_lower), chi / (1.0 - d_upper))
    }

    #[test]
    fn exact_inversion_matches_independent_bisection() {
        for chi in [0.5, 3.0, 100.0, 1e4, 1e8] {
            let b = invert_mean_bounds_exact(chi, fp(EPS10)).unwrap();
            let (lo, up) = oracle_exact(chi, fp(EPS10).beta());
            assert!(rel(b.lower, lo) < 1e-9, "chi = {chi}");
            assert!(rel(b.upper, up) < 1e-9, "chi = {chi}");
        }
    }

    #[test]
    fn exact_inversion_round_trip() {
        // the returned bounds must solve the defining equations:
        // g2(d) * bound = beta with d read back off the bound itself
        let beta = fp(EPS10).beta();
        for chi in [1e-3, 0.1, 1.0, 10.0, 1e3, 1e5, 1e7, 1e9, 1e10, 1e11] {
            let b = invert_mean_bounds_exact(chi, fp(EPS10)).unwrap();
            if b.lower > 0.0 {
                let d = chi / b.lower - 1.0;
                assert!(rel(g2(d).unwrap() * b.lower, beta) < 1e-10, "lower, chi = {chi}");
            }
            let d = 1.0 - chi / b.upper;
            assert!(rel(g2(-d).unwrap() * b.upper, beta) < 1e-10, "upper, chi = {chi}");
        }
    }

    #[test]
    fn exact_inversion_asymptotic_agreement() {
        // deltas approach sqrt(2 beta / chi): within 10% at chi = 1e4 beta,
        // within 1% at chi = 1e8 beta
        let beta = fp(EPS10).beta();
        for (mult, tol) in [(1e4, 0.1), (1e8, 0.01)] {
            let chi = beta * mult;
            let b = invert_mean_bounds_exact(chi, fp(EPS10)).unwrap();
            let reference = (2.0 * beta / chi).sqrt();
            let d_lower = chi / b.lower - 1.0;
            let d_upper = 1.0 - chi / b.upper;
            assert!((d_lower / reference - 1.0).abs() < tol);
            assert!((d_upper / reference - 1.0).abs() < tol);
        }
    }

    // ---- simplified inversion ----

    #[test]
    fn simplified_rejects_small_chi() {
        let beta = fp(EPS10).beta();
        assert!(invert_mean_bounds_simplified(6.0 * beta, fp(EPS10), true).is_err());
        assert!(invert_mean_bounds_simplified(6.0 * beta - 1.0, fp(EPS10), true).is_err());
    }

    #[test]
    fn simplified_reference_and_exact_agreement() {
        let beta = fp(EPS10).beta();
        let chi = 1e6 * beta;
        let sym = invert_mean_bounds_simplified(chi, fp(EPS10), true).unwrap();
        assert!(rel(sym.lower, 23685466.23908920293) < 1e-11);
        assert!(rel(sym.upper, 23752625.059665738362) < 1e-11);
        let asym = invert_mean_bounds_simplified(chi, fp(EPS10), false).unwrap();
        assert!(rel(asym.upper, 23752577.436679681535) < 1e-11);
        assert_eq!(sym.lower, asym.lower);

        let exact = invert_mean_bounds_exact(chi, fp(EPS10)).unwrap();
        assert!(rel(sym.lower, exact.lower) < 0.01);
        assert!(rel(sym.upper, exact.upper) < 0.01);
    }

    #[test]
    fn simplified_delta_tends_to_asymptotic() {
        let beta = fp(EPS10).beta();
        let chi = 1e12;
        let b = invert_mean_bounds_simplified(chi, fp(EPS10), true).unwrap();
        let d = chi / b.lower - 1.0;
        assert!((d / (2.0 * beta / chi).sqrt() - 1.0).abs() < 1e-3);
    }

    // ---- asymptotic inversion ----

    #[test]
    fn asymptotic_boundary_and_columns() {
        let beta = fp(EPS10).beta();
        assert!(invert_mean_bounds_asymptotic(2.0 * beta, fp(EPS10)).is_err());
        let b = invert_mean_bounds_asymptotic(2.0 * beta + 1e-9, fp(EPS10)).unwrap();
        assert!(b.lower >= 0.0 && b.lower < 1e-4);
        // fixed-deviation failure 2 e^{-n^2/2}: n = 5 lands at 1e-5.13
        let eps_at = |n: f64| 2.0 * (-n * n / 2.0).exp();
        assert!((eps_at(5.0).log10() + 5.13).abs() < 0.01);
    }

    // ---- interval failure probability ----

    #[test]
    fn deviation_pair_validation() {
        assert!(DeviationPair::new(0.0, 0.5).is_err());
        assert!(DeviationPair::new(0.5, 1.0).is_err());
        assert!(DeviationPair::new(0.5, -0.1).is_err());
        assert!(DeviationPair::new(2.0, 0.999).is_ok());
    }

    #[test]
    fn interval_failure_probability_saturates_for_tiny_deltas() {
        let d = DeviationPair::new(1e-12, 1e-12).unwrap();
        let p = interval_failure_probability(1000.0, &d);
        assert!(p >= 1.0 && (p - 2.0).abs() < 1e-6);
    }

    #[test]
    fn interval_failure_probability_matches_fixed_deviation_limit() {
        // deviation n sqrt(chi) at chi = 1e10 reproduces the asymptotic
        // failure 2 e^{-n^2/2} to better than 0.01 in log10
        let chi: f64 = 1e10;
        for n in [3.0, 5.0, 7.0, 9.0] {
            let d = n / chi.sqrt();
            let pair = DeviationPair::new(d, d).unwrap();
            let p = interval_failure_probability(chi, &pair);
            let limit = 2.0 * (-n * n / 2.0).exp();
            assert!((p.log10() - limit.log10()).abs() < 0.01, "n = {n}");
        }
    }

    // ---- observation bounds ----

    #[test]
    fn observation_bounds_degenerate_and_reference() {
        let b = observation_bounds_from_mean(0.0, fp(EPS10));
        assert_eq!((b.lower, b.upper), (0.0, 0.0));

        let b = observation_bounds_from_mean(1e4, fp(EPS10));
        // mpmath: delta = 0.070071406275345894178
        assert!(rel(b.lower, 9299.2859372465410582) < 1e-12);
        assert!(rel(b.upper, 10700.714062753458942) < 1e-12);
    }

    #[test]
    fn observation_bounds_delta_solves_symmetric_form() {
        for mean in [0.5, 30.0, 1e4, 1e8] {
            let b = observation_bounds_from_mean(mean, fp(EPS10));
            let delta = b.upper / mean - 1.0;
            let residual = 2.0 * (-delta * delta * mean / (2.0 + delta)).exp();
            assert!(rel(residual, EPS10) < 1e-10, "mean = {mean}");
        }
    }

    #[test]
    fn observation_bounds_relative_width_vanishes() {
        let b1 = observation_bounds_from_mean(1e6, fp(EPS10));
        let b2 = observation_bounds_from_mean(1e13, fp(EPS10));
        assert!((b2.upper - b2.lower) / 1e13 < (b1.upper - b1.lower) / 1e6);
        assert!((b2.upper - b2.lower) / 1e13 < 1e-5);
    }

    // ---- gaussian ----

    #[test]
    fn gaussian_sigma_multiplier_reference() {
        assert!(rel(gaussian_sigma_multiplier(fp(EPS10)), 6.4669510872405161718) < 1e-10);
    }

    #[test]
    fn gaussian_bounds_zero_and_clamp() {
        let b = gaussian_mean_bounds(0.0, fp(EPS10));
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        let b = gaussian_mean_bounds(4.0, fp(EPS10));
        assert_eq!(b.lower, 0.0);
        assert!(b.upper > 4.0);
    }

    // ---- hoeffding ----

    #[test]
    fn hoeffding_values() {
        assert_eq!(hoeffding_lower_mean(42.0, 1000, 1.0), 42.0);
        assert!(rel(hoeffding_lower_mean(0.0, 100, EPS10), -33.930702122075558989) < 1e-13);
        // looser with more trials at fixed observation
        assert!(hoeffding_lower_mean(10.0, 10_000, EPS10) < hoeffding_lower_mean(10.0, 100, EPS10));
    }

    // ---- chernoff + hoeffding ----

    #[test]
    fn ch_bounds_reference() {
        let budget = CHBudget::new(5e-11, 5e-11, 5e-11, 10_000_000).unwrap();
        let out = ch_mean_bounds(1e6, &budget);
        assert_eq!(out.tests, [true, true, true]);
        assert!(!out.fallback);
        assert!(rel(out.bounds.lower, 991564.53947128544696) < 1e-12);
        assert!(rel(out.bounds.upper, 1013974.876111382268) < 1e-12);
    }

    #[test]
    fn ch_upper_deviation_exceeds_lower() {
        let budget = CHBudget::new(5e-11, 5e-11, 5e-11, 10_000_000).unwrap();
        let out = ch_mean_bounds(1e6, &budget);
        assert!(out.bounds.upper - 1e6 > 1e6 - out.bounds.lower);
    }

    #[test]
    fn ch_asymptotic_forms() {
        // with every test passing and eps2 = eps3 = eps/2 the deviations are
        // sqrt(3 beta chi) below and ~2 sqrt((2 beta - ln 2) chi) above
        let eps = EPS10;
        let beta = fp(eps).beta();
        let chi = 1e12;
        let budget = CHBudget::new(eps / 2.0, eps / 2.0, eps / 2.0, 2e12 as u64).unwrap();
        let out = ch_mean_bounds(chi, &budget);
        assert_eq!(out.tests, [true, true, true]);
        assert!(rel(out.bounds.lower, chi - (3.0 * beta * chi).sqrt()) < 1e-14);
        let limit_form = 2.0 * ((2.0 * beta - 2f64.ln()) * chi).sqrt();
        assert!(rel(out.bounds.upper - chi, limit_form) < 0.03);
    }

    #[test]
    fn ch_degenerate_pre_estimate_falls_back() {
        let budget = CHBudget::new(0.5, 0.5, 0.5, 1_000_000).unwrap();
        let out = ch_mean_bounds(3.0, &budget);
        assert!(out.fallback);
        assert_eq!(out.bounds.lower, 0.0);
        let dev = (1e6 / 2.0 * 2f64.ln()).sqrt();
        assert!(rel(out.bounds.upper - 3.0, dev) < 1e-12);
    }

    // ---- random sampling ----

    #[test]
    fn sampling_reference_value() {
        let d = random_sampling_deviation(0.033, 1e6, 1e6, EPS10).unwrap();
        assert!(rel(d.theta, 0.0015406392438452328968) < 1e-9);
        assert!(!d.saturated && !d.regularized);
    }

    #[test]
    fn sampling_theta_vanishes_with_pool_size() {
        let big = random_sampling_deviation(0.033, 1e12, 1e12, EPS10).unwrap();
        assert!(big.theta < 2e-6);
        let small = random_sampling_deviation(0.033, 1e4, 1e4, EPS10).unwrap();
        assert!(big.theta < small.theta);
    }

    #[test]
    fn sampling_saturates_on_tiny_pools() {
        let d = random_sampling_deviation(0.5, 2.0, 2.0, EPS10).unwrap();
        assert!(d.saturated);
        assert_eq!(d.theta, 0.5);
    }

    #[test]
    fn sampling_regularizes_boundary_error_rates() {
        let d = random_sampling_deviation(0.0, 1e6, 1e6, EPS10).unwrap();
        assert!(d.regularized);
        assert!(d.theta > 0.0);
        let d = random_sampling_deviation(1.0, 1e6, 1e6, EPS10).unwrap();
        assert!(d.regularized);
    }

    #[test]
    fn sampling_prefactor_below_eps_gives_zero() {
        let d = random_sampling_deviation(0.1, 1e8, 1e8, 0.9).unwrap();
        assert_eq!(d.theta, 0.0);
    }

    // ---- crossover ----

    #[test]
    fn gaussian_crossover_reference_value() {
        let chi = gaussian_chernoff_lower_crossover(fp(EPS10)).unwrap();
        assert!(rel(chi, 2257.09589312875) < 1e-6, "chi = {chi}");
    }

    // ---- property suites ----

    proptest! {
        #[test]
        fn sandwich_every_method(chi in 1e-2f64..1e9, eps_exp in -40f64..-1.0) {
            let eps = fp(10f64.powf(eps_exp));
            let exact = invert_mean_bounds_exact(chi, eps).unwrap();
            prop_assert!(exact.lower <= chi && chi <= exact.upper);
            let gauss = gaussian_mean_bounds(chi, eps);
            prop_assert!(gauss.lower <= chi && chi <= gauss.upper);
            let budget = CHBudget::new(eps.value(), eps.value(), eps.value(), (chi * 10.0) as u64 + 1).unwrap();
            let ch = ch_mean_bounds(chi, &budget);
            prop_assert!(ch.bounds.lower <= chi && chi <= ch.bounds.upper);
            if chi > 6.0 * eps.beta() {
                let simp = invert_mean_bounds_simplified(chi, eps, false).unwrap();
                prop_assert!(simp.lower <= chi && chi <= simp.upper);
            }
        }

        #[test]
        fn exact_bounds_monotone_in_chi(chi in 1e-2f64..1e8, factor in 1.001f64..4.0) {
            let eps = fp(EPS10);
            let a = invert_mean_bounds_exact(chi, eps).unwrap();
            let b = invert_mean_bounds_exact(chi * factor, eps).unwrap();
            prop_assert!(b.lower >= a.lower);
            prop_assert!(b.upper >= a.upper);
        }

        #[test]
        fn interval_widens_as_eps_shrinks(chi in 1.0f64..1e8, e1 in -30f64..-2.0, gap in 1.0f64..10.0) {
            let tighter = fp(10f64.powf(e1 - gap));
            let looser = fp(10f64.powf(e1));
            let narrow = invert_mean_bounds_exact(chi, looser).unwrap();
            let wide = invert_mean_bounds_exact(chi, tighter).unwrap();
            prop_assert!(wide.lower <= narrow.lower + 1e-12 * narrow.lower.abs());
            prop_assert!(wide.upper >= narrow.upper - 1e-12 * narrow.upper);
        }

        #[test]
        fn exact_round_trip_random(chi in 1e-1f64..1e9, eps_exp in -30f64..-2.0) {
            let eps = fp(10f64.powf(eps_exp));
            let beta = eps.beta();
            let b = invert_mean_bounds_exact(chi, eps).unwrap();
            if b.lower > 1e-280 {
                let d = chi / b.lower - 1.0;
                prop_assert!(rel(g2(d).unwrap() * b.lower, beta) < 1e-9);
            }
            let d = 1.0 - chi / b.upper;
            prop_assert!(rel(g2(-d).unwrap() * b.upper, beta) < 1e-9);
        }

        #[test]
        fn new_method_contained_in_ch_when_tests_pass(exp in 3f64..9.0) {
            // equal total budget: eps split evenly across the three C+H parts
            let chi = 10f64.powf(exp);
            let eps = fp(EPS10);
            let part = eps.value() / 3.0;
            let budget = CHBudget::new(part, part, part, (chi * 10.0) as u64).unwrap();
            let ch = ch_mean_bounds(chi, &budget);
            prop_assert_eq!(ch.tests, [true, true, true]);
            let exact = invert_mean_bounds_exact(chi, eps).unwrap();
            prop_assert!(exact.lower >= ch.bounds.lower);
            prop_assert!(exact.upper <= ch.bounds.upper);
        }
    }
}
