//! Per-bracket exponential rate: the maximizer of the concave auxiliary function
//!
//! ```text
//! J(λ) = y λ - ln ∫_lower^upper e^(λ t) dt
//! ```
//!
//! whose stationarity condition says the exponential piece on the bracket
//! has conditional mean `y`.

use super::kernel;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200;
/// Stop once the normalized mean residual is below this, relative to the normalized mean.
const MEAN_TOLERANCE: f64 = 1e-14;

fn boundary(lower: f64, upper: f64, mean: f64) -> Error {
    Error::MeanOnBoundary {
        bracket: None,
        lower,
        upper,
        mean,
    }
}

/// Rate `λ*` of the maximum-entropy piece on `[lower, upper)` with conditional mean `mean`.
///
/// `upper` may be infinite, in which case `λ* = -1 / (mean - lower)`.
pub fn solve_rate(lower: f64, upper: f64, mean: f64) -> Result<f64> {
    if !lower.is_finite() || !mean.is_finite() || upper.is_nan() {
        return Err(boundary(lower, upper, mean));
    }
    if upper == f64::INFINITY {
        if mean > lower {
            return Ok(-1.0 / (mean - lower));
        }
        return Err(boundary(lower, upper, mean));
    }
    if !(lower < mean && mean < upper) {
        return Err(boundary(lower, upper, mean));
    }
    let width = upper - lower;
    let r = (mean - lower) / width;
    if !(r > 0.0 && r < 1.0) {
        return Err(boundary(lower, upper, mean));
    }
    Ok(solve_tilt(r) / width)
}

/// Tilt `x` with `mean_fraction(x) = r`, for `0 < r < 1`.
///
/// Safeguarded Newton: the sign of `x` follows from `r - 1/2`, a sign-change
/// bracket `[lo, hi]` is grown geometrically from 0, and every iterate stays
/// inside the current bracket, falling back to bisection when a Newton step
/// would leave it.
pub fn solve_tilt(r: f64) -> f64 {
    if r == 0.5 {
        return 0.0;
    }
    let residual = |x: f64| kernel::mean_fraction(x) - r;

    let (mut lo, mut hi) = if r > 0.5 {
        let mut hi = 1.0f64;
        let mut lo = 0.0f64;
        while residual(hi) < 0.0 && hi < 1e300 {
            lo = hi;
            hi *= 2.0;
        }
        (lo, hi)
    } else {
        let mut lo = -1.0f64;
        let mut hi = 0.0f64;
        while residual(lo) > 0.0 && lo > -1e300 {
            hi = lo;
            lo *= 2.0;
        }
        (lo, hi)
    };

    let guess = if r > 0.75 {
        1.0 / (1.0 - r)
    } else if r < 0.25 {
        -1.0 / r
    } else {
        12.0 * (r - 0.5)
    };
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };

    let tol = MEAN_TOLERANCE * r;
    for _ in 0..MAX_ITERATIONS {
        let f = residual(x);
        if f.abs() <= tol {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
        let slope = kernel::mean_fraction_slope(x);
        let newton = x - f / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    x
}

/// Auxiliary function `J(λ)` for a bracket; `upper` may be infinite.
pub fn auxiliary(lower: f64, upper: f64, mean: f64, rate: f64) -> f64 {
    if upper == f64::INFINITY {
        if rate >= 0.0 {
            return f64::NEG_INFINITY;
        }
        return rate * (mean - lower) + (-rate).ln();
    }
    let width = upper - lower;
    rate * (mean - lower) - width.ln() - kernel::log_exprel(rate * width)
}
