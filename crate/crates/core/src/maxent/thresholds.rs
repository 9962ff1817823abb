//! Recovery of unobserved thresholds from cumulative counts and incomes.
//!
//! For fixed thresholds the minimized KL divergence is
//!
//! ```text
//! J*(t) = Σ_k q_k (J_k(λ_k*; t) + ln q_k)
//! ```
//!
//! With `t_K` held fixed, `J*` has a unique minimizer over the remaining
//! thresholds. Its gradient with respect to `t_j` is the jump in the density
//! across `t_j`, so the minimizer is the continuous piecewise-exponential
//! density consistent with the data.
//!
//! Feasibility requires every bracket mean to lie strictly inside its
//! bracket, which confines `t_j` to the open interval `(y_{j+1}, y_j)`. The
//! search is a damped Newton iteration on the tridiagonal Hessian inside
//! that box, with an Armijo line search and a diagonally scaled gradient
//! step when the Newton system is not positive definite.

use serde::{Deserialize, Serialize};

use super::density::{build_density, MaxEntDensity};
use super::kernel;
use super::rate::solve_tilt;
use crate::error::{Error, Result};
use crate::tabulation::CumulativeStats;

const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOLERANCE: f64 = 1e-10;
/// Accepted when no further decrease is representable.
const STALL_TOLERANCE: f64 = 1e-8;
const BOUNDARY_FRACTION: f64 = 0.995;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    /// `t_1 > ... > t_K`, with `t_K` the fixed input.
    pub thresholds: Vec<f64>,
    /// Attained `J*`.
    pub objective: f64,
    pub iterations: usize,
    /// Final gradient norm, each component scaled by its feasible interval width over `p_K`.
    pub gradient_norm: f64,
}

impl ThresholdSolution {
    pub fn density(&self, stats: &CumulativeStats) -> Result<MaxEntDensity> {
        build_density(stats, &self.thresholds)
    }
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    mass: f64,
    mean: f64,
}

fn moments(stats: &CumulativeStats) -> Result<Vec<Moments>> {
    stats
        .brackets
        .iter()
        .map(|b| match b.mean {
            Some(mean) if b.mass > 0.0 => Ok(Moments { mass: b.mass, mean }),
            _ => Err(Error::InfeasibleOrdering(format!(
                "bracket {} is empty",
                b.k
            ))),
        })
        .collect()
}

/// Piece quantities needed for the objective and its derivatives.
#[derive(Debug, Clone, Copy)]
struct PieceEval {
    objective: f64,
    lower_density: f64,
    upper_density: f64,
    /// ∂(lower edge density)/∂lower, ∂/∂upper
    dlower: (f64, f64),
    /// ∂(upper edge density)/∂lower, ∂/∂upper
    dupper: (f64, f64),
}

fn eval_piece(m: Moments, lower: f64, upper: f64) -> PieceEval {
    let q = m.mass;
    if upper == f64::INFINITY {
        let gap = m.mean - lower;
        let f = q / gap;
        return PieceEval {
            objective: q * (-1.0 - gap.ln() + q.ln()),
            lower_density: f,
            upper_density: 0.0,
            dlower: (f / gap, 0.0),
            dupper: (0.0, 0.0),
        };
    }
    let width = upper - lower;
    let r = (m.mean - lower) / width;
    let x = solve_tilt(r);
    let j = x * r - width.ln() - kernel::log_exprel(x);
    let slope = kernel::mean_fraction_slope(x);
    let dx_dlower = (r - 1.0) / (width * slope);
    let dx_dupper = -r / (width * slope);
    let f_lo = q / width * kernel::edge_density(x);
    let f_hi = q / width * kernel::edge_density(-x);
    PieceEval {
        objective: q * (j + q.ln()),
        lower_density: f_lo,
        upper_density: f_hi,
        dlower: (
            f_lo * (-r * dx_dlower + 1.0 / width),
            f_lo * (-r * dx_dupper - 1.0 / width),
        ),
        dupper: (
            f_hi * ((1.0 - r) * dx_dlower + 1.0 / width),
            f_hi * ((1.0 - r) * dx_dupper - 1.0 / width),
        ),
    }
}

fn feasible(m: &[Moments], t: &[f64]) -> bool {
    let mut upper = f64::INFINITY;
    m.iter().zip(t).all(|(mk, &lower)| {
        let ok = lower < mk.mean && mk.mean < upper;
        upper = lower;
        ok
    })
}

fn eval_all(m: &[Moments], t: &[f64]) -> Vec<PieceEval> {
    let mut upper = f64::INFINITY;
    m.iter()
        .zip(t)
        .map(|(&mk, &lower)| {
            let e = eval_piece(mk, lower, upper);
            upper = lower;
            e
        })
        .collect()
}

fn objective_of(evals: &[PieceEval]) -> f64 {
    evals.iter().map(|e| e.objective).sum()
}

/// `∂J*/∂t_j` for `j = 1..K-1`.
fn gradient_of(evals: &[PieceEval]) -> Vec<f64> {
    evals
        .windows(2)
        .map(|w| w[0].lower_density - w[1].upper_density)
        .collect()
}

/// Tridiagonal Hessian of `J*` over `t_1..t_{K-1}`: (diagonal, off-diagonal).
fn hessian_of(evals: &[PieceEval]) -> (Vec<f64>, Vec<f64>) {
    let n = evals.len() - 1;
    let diag = (0..n)
        .map(|j| evals[j].dlower.0 - evals[j + 1].dupper.1)
        .collect();
    let off = (0..n.saturating_sub(1))
        .map(|j| {
            let p = &evals[j + 1];
            0.5 * (p.dlower.1 - p.dupper.0)
        })
        .collect();
    (diag, off)
}

fn check_thresholds(stats: &CumulativeStats, m: &[Moments], t: &[f64]) -> Result<()> {
    if t.len() != stats.classes() {
        return Err(Error::InfeasibleOrdering(format!(
            "{} thresholds for {} brackets",
            t.len(),
            stats.classes()
        )));
    }
    if !feasible(m, t) {
        return Err(Error::InfeasibleOrdering(
            "some bracket mean is not strictly inside its bracket".into(),
        ));
    }
    Ok(())
}

/// `J*` at thresholds `t_1 > ... > t_K`.
pub fn kl_objective(stats: &CumulativeStats, thresholds: &[f64]) -> Result<f64> {
    let m = moments(stats)?;
    check_thresholds(stats, &m, thresholds)?;
    Ok(objective_of(&eval_all(&m, thresholds)))
}

/// Gradient of `J*` with respect to `t_1..t_{K-1}`.
pub fn kl_gradient(stats: &CumulativeStats, thresholds: &[f64]) -> Result<Vec<f64>> {
    let m = moments(stats)?;
    check_thresholds(stats, &m, thresholds)?;
    Ok(gradient_of(&eval_all(&m, thresholds)))
}

/// Hessian of `J*` with respect to `t_1..t_{K-1}` as (diagonal, off-diagonal).
pub fn kl_hessian(stats: &CumulativeStats, thresholds: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = moments(stats)?;
    check_thresholds(stats, &m, thresholds)?;
    Ok(hessian_of(&eval_all(&m, thresholds)))
}

/// Solves the tridiagonal system `H d = rhs`; `None` unless `H` is positive definite.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return None;
    }
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Minimizes `J*` over `t_1 > ... > t_{K-1}` with `t_K = lowest_threshold` fixed.
pub fn recover_thresholds(
    stats: &CumulativeStats,
    lowest_threshold: f64,
) -> Result<ThresholdSolution> {
    let m = moments(stats)?;
    let classes = m.len();
    if classes < 2 {
        return Err(Error::InfeasibleOrdering(
            "need at least two brackets".into(),
        ));
    }
    if !(lowest_threshold < m[classes - 1].mean) {
        return Err(Error::InfeasibleOrdering(format!(
            "lowest threshold {lowest_threshold} is not below the bottom bracket mean {}",
            m[classes - 1].mean
        )));
    }
    // box for t_j is (y_{j+1}, y_j)
    let boxes: Vec<(f64, f64)> = m.windows(2).map(|w| (w[1].mean, w[0].mean)).collect();
    if let Some(j) = boxes.iter().position(|(lo, hi)| !(lo < hi)) {
        return Err(Error::InfeasibleOrdering(format!(
            "bracket means {} and {} are not strictly decreasing",
            boxes[j].1, boxes[j].0
        )));
    }
    let covered = stats.covered_fractile();
    let scale: Vec<f64> = boxes.iter().map(|(lo, hi)| (hi - lo) / covered).collect();
    let scaled_norm = |g: &[f64]| -> f64 {
        g.iter()
            .zip(&scale)
            .map(|(gj, s)| (gj * s) * (gj * s))
            .sum::<f64>()
            .sqrt()
    };

    let mut t: Vec<f64> = boxes.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    t.push(lowest_threshold);
    let mut evals = eval_all(&m, &t);
    let mut value = objective_of(&evals);
    let mut grad = gradient_of(&evals);
    let mut norm = scaled_norm(&grad);

    for iteration in 0..MAX_ITERATIONS {
        if norm <= GRADIENT_TOLERANCE {
            return Ok(ThresholdSolution {
                thresholds: t,
                objective: value,
                iterations: iteration,
                gradient_norm: norm,
            });
        }
        let (diag, off) = hessian_of(&evals);
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dir = solve_tridiagonal(&diag, &off, &rhs)
            .filter(|d| d.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() < 0.0)
            .unwrap_or_else(|| {
                grad.iter()
                    .zip(&diag)
                    .zip(&scale)
                    .map(|((g, h), s)| {
                        if *h > 0.0 {
                            -g / h
                        } else {
                            -g * s * s * covered
                        }
                    })
                    .collect()
            });

        // keep a margin from the box walls
        let mut step = 1.0f64;
        for ((d, tj), (lo, hi)) in dir.iter().zip(&t).zip(&boxes) {
            if *d > 0.0 {
                step = step.min(BOUNDARY_FRACTION * (hi - tj) / d);
            } else if *d < 0.0 {
                step = step.min(BOUNDARY_FRACTION * (lo - tj) / d);
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = t
                .iter()
                .enumerate()
                .map(|(j, tj)| {
                    if j < dir.len() {
                        tj + step * dir[j]
                    } else {
                        *tj
                    }
                })
                .collect();
            if feasible(&m, &trial) {
                let e = eval_all(&m, &trial);
                let v = objective_of(&e);
                if v <= value + ARMIJO * step * slope {
                    accepted = Some((trial, e, v));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, e, v)) => {
                t = trial;
                evals = e;
                value = v;
                grad = gradient_of(&evals);
                norm = scaled_norm(&grad);
            }
            None if norm <= STALL_TOLERANCE => {
                return Ok(ThresholdSolution {
                    thresholds: t,
                    objective: value,
                    iterations: iteration,
                    gradient_norm: norm,
                });
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    gradient_norm: norm,
                    best: t,
                });
            }
        }
    }
    if norm <= STALL_TOLERANCE {
        return Ok(ThresholdSolution {
            thresholds: t,
            objective: value,
            iterations: MAX_ITERATIONS,
            gradient_norm: norm,
        });
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        gradient_norm: norm,
        best: t,
    })
}
