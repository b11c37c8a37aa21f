//! Bracketed root finding for strictly monotone functions.

/// Outcome of a failed bracketed solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SolveFailure {
    /// f(lo) and f(hi) do not straddle the target.
    NoBracket,
    /// Iteration limit reached before the bracket collapsed.
    NoConvergence,
}

const MAX_ITERS: usize = 200;

/// Solves f(x) = target for a function strictly monotone on [lo, hi].
///
/// Bisection with a secant step interleaved whenever the secant lands
/// strictly inside the bracket; bisection alone guarantees convergence,
/// the secant step speeds it up. Converges to ~1e-15 relative on x.
pub(crate) fn solve_monotone<F: Fn(f64) -> f64>(
    f: F,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, SolveFailure> {
    let mut flo = f(lo) - target;
    let mut fhi = f(hi) - target;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(SolveFailure::NoBracket);
    }

    let mut use_secant = true;
    for _ in 0..MAX_ITERS {
        let width = hi - lo;
        if width <= 1e-15 * lo.abs().max(hi.abs()) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = if use_secant && fhi != flo {
            let s = lo - flo * width / (fhi - flo);
            // fall back to bisection when the secant stalls at the edges
            if s > lo + 1e-3 * width && s < hi - 1e-3 * width {
                s
            } else {
                0.5 * (lo + hi)
            }
        } else {
            0.5 * (lo + hi)
        };
        use_secant = !use_secant;
        let fm = f(mid) - target;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // The bracket is still valid; report the midpoint if it is tight enough
    // in absolute terms, otherwise give up.
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
        Ok(0.5 * (lo + hi))
    } else {
        Err(SolveFailure::NoConvergence)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_square_root() {
        let r = solve_monotone(|x| x * x, 2.0, 0.0, 2.0).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn handles_decreasing_functions() {
        let r = solve_monotone(|x| -x, -3.0, 0.0, 10.0).unwrap();
        assert!((r - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_unbracketed_target() {
        assert_eq!(
            solve_monotone(|x| x, 5.0, 0.0, 1.0),
            Err(SolveFailure::NoBracket)
        );
    }

    #[test]
    fn exact_endpoint_hits() {
        assert_eq!(solve_monotone(|x| x, 0.0, 0.0, 1.0), Ok(0.0));
        assert_eq!(solve_monotone(|x| x, 1.0, 0.0, 1.0), Ok(1.0));
    }
}
