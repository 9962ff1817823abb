//! Pareto interpolation.
//!
//! The tail above the reference threshold `t_k` is taken to be exactly
//! Pareto with the bracket's local exponent, `F(y) = 1 - p_k (y / t_k)^(-a_k)`.
//! The fractile threshold and the income above it then follow in closed form:
//!
//! ```text
//! t(p) = t_k (p_k / p)^(1 / a_k)
//! S(p) = n p b_k t(p)
//! ```
//!
//! At `p = p_k` this reproduces the tabulated `S_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{Method, ShareEstimate};
use crate::tabulation::{cumulate, CumulativeStats, Tabulation};

/// Local Pareto law anchored at bracket `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoBracketFit {
    pub bracket: usize,
    pub threshold: f64,
    pub top_fractile: f64,
    pub exponent: f64,
    pub coefficient: f64,
}

impl ParetoBracketFit {
    /// Upper-tail probability `1 - F(y)` of the fitted law.
    pub fn tail_probability(&self, y: f64) -> f64 {
        self.top_fractile * (y / self.threshold).powf(-self.exponent)
    }

    /// `A` in `F(y) = 1 - A y^(-a)`.
    pub fn scale_constant(&self) -> f64 {
        self.top_fractile * self.threshold.powf(self.exponent)
    }
}

fn check_fractile(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidFractile { fractile: p })
    }
}

/// Fits the local Pareto law at bracket `k` (1-based).
pub fn fit_bracket(stats: &CumulativeStats, k: usize) -> Result<ParetoBracketFit> {
    let b = stats.bracket(k);
    if !(b.pareto_coefficient > 1.0) || !b.pareto_coefficient.is_finite() {
        return Err(Error::NonParetoBracket {
            bracket: k,
            coefficient: b.pareto_coefficient,
        });
    }
    Ok(ParetoBracketFit {
        bracket: k,
        threshold: b.threshold,
        top_fractile: b.top_fractile,
        exponent: b.pareto_exponent,
        coefficient: b.pareto_coefficient,
    })
}

/// Bracket whose `p_k` is closest to `p`, ties going to the larger `p_k`.
pub fn nearest_bracket(stats: &CumulativeStats, p: f64) -> Result<usize> {
    check_fractile(p)?;
    let covered = stats.covered_fractile();
    if p > covered {
        return Err(Error::FractileNotCovered {
            fractile: p,
            covered,
        });
    }
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (i, b) in stats.brackets.iter().enumerate() {
        let d = (b.top_fractile - p).abs();
        // later brackets have larger p_k, so `<=` settles ties toward them
        if d <= best_dist {
            best = i;
            best_dist = d;
        }
    }
    Ok(best + 1)
}

/// Selects the reference bracket for fractile `p` and fits it.
pub fn select_bracket(stats: &CumulativeStats, p: f64) -> Result<ParetoBracketFit> {
    let k = nearest_bracket(stats, p)?;
    fit_bracket(stats, k)
}

/// `t(p) = t_k (p_k / p)^(1 / a_k)`.
pub fn threshold_at(fit: &ParetoBracketFit, p: f64) -> f64 {
    if p == fit.top_fractile {
        return fit.threshold;
    }
    fit.threshold * (fit.top_fractile / p).powf(1.0 / fit.exponent)
}

/// `S(p) = n p b_k t(p)`.
pub fn top_income_at(fit: &ParetoBracketFit, p: f64, population: u64) -> f64 {
    population as f64 * p * fit.coefficient * threshold_at(fit, p)
}

/// Share estimate for fractile `p` from an explicit bracket fit.
pub fn estimate_with_fit(stats: &CumulativeStats, fit: &ParetoBracketFit, p: f64) -> ShareEstimate {
    let threshold = threshold_at(fit, p);
    let top_income = top_income_at(fit, p, stats.population);
    ShareEstimate {
        fractile: p,
        threshold,
        top_income,
        share: top_income / stats.total_income,
        method: Method::Pi,
        bracket: Some(fit.bracket),
        extrapolated: p < stats.top_bracket_fractile(),
    }
}

/// Pareto interpolation estimate from precomputed statistics.
pub fn share_from_stats(stats: &CumulativeStats, p: f64) -> Result<ShareEstimate> {
    let fit = select_bracket(stats, p)?;
    Ok(estimate_with_fit(stats, &fit, p))
}

/// Top-`p` share of `tab` by Pareto interpolation.
pub fn estimate_share_pi(tab: &Tabulation, p: f64) -> Result<ShareEstimate> {
    let stats = cumulate(tab)?;
    share_from_stats(&stats, p)
}
