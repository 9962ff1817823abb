//! Closed-form integrals of one exponential piece.
//!
//! A piece on `[lower, upper)` with rate `λ` is handled in normalized form:
//! position `s = (y - lower) / Δ` in `[0, 1]` and tilt `x = λ Δ`, where
//! `Δ = upper - lower`. The normalized density is `x e^(x s) / (e^x - 1)`.
//!
//! Every function here has a `direct` form built on `expm1`/`log1p` and a
//! truncated Taylor `series` form used when `|x|` is below [`SERIES_CUTOFF`]
//! (or [`MEAN_SERIES_CUTOFF`] for the moment functions, whose direct forms
//! lose about `ε / |x|` to cancellation).

/// Below this `|x|` the normalizer, mass and density functions use their series.
pub const SERIES_CUTOFF: f64 = 1e-6;

/// Below this `|x|` the mean-fraction functions use their series.
pub const MEAN_SERIES_CUTOFF: f64 = 0.5;

/// `(e^x - 1) / x`: the normalizer `∫ e^(λy) dy` over the piece divided by `Δ e^(λ lower)`.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        series::exprel(x)
    } else {
        direct::exprel(x)
    }
}

/// `ln((e^x - 1) / x)`, finite for every finite `x`.
pub fn log_exprel(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        series::log_exprel(x)
    } else {
        direct::log_exprel(x)
    }
}

/// `x / (e^x - 1)`: normalized density at the lower edge. At the upper edge it is `edge_density(-x)`.
pub fn edge_density(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        series::edge_density(x)
    } else {
        direct::edge_density(x)
    }
}

/// Normalized density at `s`.
pub fn density(x: f64, s: f64) -> f64 {
    if x > 0.0 {
        edge_density(-x) * (-x * (1.0 - s)).exp()
    } else {
        edge_density(x) * (x * s).exp()
    }
}

/// Fraction of the piece's mass in `[0, s)`.
pub fn fraction_below(x: f64, s: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        series::fraction_below(x, s)
    } else {
        direct::fraction_below(x, s)
    }
}

/// Fraction of the piece's mass in `[s, 1]`. Reflection maps it onto [`fraction_below`].
pub fn fraction_above(x: f64, s: f64) -> f64 {
    fraction_below(-x, 1.0 - s)
}

/// Position `s` below which a fraction `f` of the mass lies.
pub fn position_below(x: f64, f: f64) -> f64 {
    if f <= 0.0 {
        return 0.0;
    }
    if f >= 1.0 {
        return 1.0;
    }
    let s = if x.abs() < SERIES_CUTOFF {
        f - x * f * (f - 1.0) / 2.0
    } else if x > 0.0 {
        1.0 + ((1.0 - f) * (-x).exp_m1()).ln_1p() / x
    } else {
        (f * x.exp_m1()).ln_1p() / x
    };
    s.clamp(0.0, 1.0)
}

/// Position `s` above which a fraction `f` of the mass lies.
pub fn position_above(x: f64, f: f64) -> f64 {
    1.0 - position_below(-x, f)
}

/// Conditional mean position of the whole piece, `e^x / (e^x - 1) - 1 / x`.
///
/// Increases from 0 (as `x → -∞`) through 1/2 (at 0) to 1 (as `x → ∞`).
pub fn mean_fraction(x: f64) -> f64 {
    if x.abs() < MEAN_SERIES_CUTOFF {
        series::mean_fraction(x)
    } else {
        direct::mean_fraction(x)
    }
}

/// Derivative of [`mean_fraction`]: the variance of the normalized piece.
pub fn mean_fraction_slope(x: f64) -> f64 {
    if x.abs() < MEAN_SERIES_CUTOFF {
        series::mean_fraction_slope(x)
    } else {
        direct::mean_fraction_slope(x)
    }
}

/// Conditional mean position of the part of the piece above `s`.
pub fn mean_above(x: f64, s: f64) -> f64 {
    let w = 1.0 - s;
    s + w * mean_fraction(x * w)
}

/// `∫_s^1 σ g(σ) dσ` for the normalized density `g`.
pub fn first_moment_above(x: f64, s: f64) -> f64 {
    fraction_above(x, s) * mean_above(x, s)
}

pub mod direct {
    //! Closed forms, accurate away from `x = 0`.

    pub fn exprel(x: f64) -> f64 {
        x.exp_m1() / x
    }

    pub fn log_exprel(x: f64) -> f64 {
        if x > 0.0 {
            x + (-(-x).exp_m1() / x).ln()
        } else {
            (x.exp_m1() / x).ln()
        }
    }

    pub fn edge_density(x: f64) -> f64 {
        x / x.exp_m1()
    }

    pub fn fraction_below(x: f64, s: f64) -> f64 {
        if x > 0.0 {
            (x * (s - 1.0)).exp() * (-x * s).exp_m1() / (-x).exp_m1()
        } else {
            (x * s).exp_m1() / x.exp_m1()
        }
    }

    pub fn mean_fraction(x: f64) -> f64 {
        -1.0 / (-x).exp_m1() - 1.0 / x
    }

    pub fn mean_fraction_slope(x: f64) -> f64 {
        let sh = (0.5 * x).sinh();
        1.0 / (x * x) - 1.0 / (4.0 * sh * sh)
    }

    /// `∫_s^1 σ x e^(xσ) dσ / (e^x - 1)` as mass above `s` times its mean position.
    pub fn first_moment_above(x: f64, s: f64) -> f64 {
        let w = 1.0 - s;
        let below = |x: f64, s: f64| if x == 0.0 { s } else { fraction_below(x, s) };
        let mean = |x: f64| if x == 0.0 { 0.5 } else { mean_fraction(x) };
        below(-x, w) * (s + w * mean(x * w))
    }
}

pub mod series {
    //! Taylor expansions about `x = 0`.

    pub fn exprel(x: f64) -> f64 {
        1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    }

    pub fn log_exprel(x: f64) -> f64 {
        let x2 = x * x;
        x * 0.5 + x2 / 24.0 - x2 * x2 / 2880.0
    }

    pub fn edge_density(x: f64) -> f64 {
        let x2 = x * x;
        1.0 - x * 0.5 + x2 / 12.0 - x2 * x2 / 720.0
    }

    pub fn fraction_below(x: f64, s: f64) -> f64 {
        let c = s * (s - 1.0);
        s + x * c / 2.0 + x * x * c * (2.0 * s - 1.0) / 12.0
    }

    // coefficients B_2n / (2n)! of the odd part of the mean fraction
    const MEAN: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30_240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
        1.0 / 74_724_249_600.0,
    ];

    pub fn mean_fraction(x: f64) -> f64 {
        let x2 = x * x;
        let odd = MEAN.iter().rev().fold(0.0, |acc, c| acc * x2 + c);
        0.5 + x * odd
    }

    pub fn mean_fraction_slope(x: f64) -> f64 {
        let x2 = x * x;
        MEAN.iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, c)| acc * x2 + c * (2 * i + 1) as f64)
    }

    pub fn first_moment_above(x: f64, s: f64) -> f64 {
        let a = 1.0 - s * s;
        let b = 1.0 - s * s * s;
        let c = 1.0 - s * s * s * s;
        a / 2.0 + x * (b / 3.0 - a / 4.0) + x * x * (c / 8.0 - b / 6.0 + a / 24.0)
    }
}
