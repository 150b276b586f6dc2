//! Standard normal distribution helpers.
//!
//! The CDF is the closed form `0.5 * erfc(-x / sqrt 2)`; quantiles are found
//! by bisection on that CDF, which is monotone and needs no derivative.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Bisection stops once the bracket is narrower than this.
pub const BISECTION_TOL: f64 = 1e-12;

const SEARCH_LIMIT: f64 = 40.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// P(Z <= x).
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// P(Z > x), accurate far into the upper tail.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Probability mass of the interval `[lo, hi]`; infinite ends allowed.
pub fn mass(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    // Subtract in whichever tail keeps precision.
    if lo >= 0.0 {
        sf(lo) - sf(hi)
    } else {
        cdf(hi) - cdf(lo)
    }
}

/// Inverse CDF by bisection. `p` must lie in (0, 1).
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability {p} outside (0, 1)");
    if p > 0.5 {
        return -upper_quantile(p.min(1.0 - f64::EPSILON));
    }
    // Bisect on the lower tail directly for small p.
    bisect(|x| cdf(x) - p)
}

/// The `x` with `P(Z > x) = q`, i.e. `-quantile(q)` computed without
/// cancellation for tiny `q`.
pub fn upper_quantile(q: f64) -> f64 {
    assert!(q > 0.0 && q < 1.0, "tail probability {q} outside (0, 1)");
    // sf is decreasing, so negate to keep the bracket orientation.
    bisect(|x| q - sf(x))
}

/// Root of an increasing function on [-SEARCH_LIMIT, SEARCH_LIMIT].
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-SEARCH_LIMIT, SEARCH_LIMIT);
    for _ in 0..200 {
        if hi - lo < BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
