//! Maximum-entropy density estimation from grouped data.
//!
//! Among all densities on `[t_K, ∞)` whose bracket masses and bracket means
//! match the tabulation, the one minimizing `∫ g ln g` is exponential inside
//! each bracket. Each piece's rate solves a one-dimensional concave problem
//! ([`solve_rate`]); the pieces then give shares at any fractile in closed form.

mod density;
pub mod kernel;
mod rate;
mod thresholds;

pub use density::{build_density, build_observed_density, MaxEntDensity, Piece};
pub use rate::{auxiliary, solve_rate, solve_tilt};
pub use thresholds::{
    kl_gradient, kl_hessian, kl_objective, recover_thresholds, ThresholdSolution,
};

use crate::error::Result;
use crate::estimate::ShareEstimate;
use crate::tabulation::{cumulate, Tabulation};

/// Top-`p` share of `tab` from the maximum-entropy density on its observed thresholds.
pub fn estimate_share_me(tab: &Tabulation, p: f64) -> Result<ShareEstimate> {
    let stats = cumulate(tab)?;
    build_observed_density(&stats)?.share_at(p)
}
