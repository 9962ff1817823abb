use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::{generate, IncomeDistribution};
use super::sample::MicroSample;
use crate::error::{Error, Result};
use crate::estimate::Method;
use crate::maxent::build_observed_density;
use crate::pareto::share_from_stats;
use crate::tabulation::cumulate;

/// How bracket thresholds are placed on a sample, in terms of the top
/// fractile `p_k` each threshold should cut off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum ThresholdScheme {
    /// `p_k` log-spaced from `highest_top_fractile` (k = 1) to `lowest_top_fractile` (k = K),
    /// mimicking tax tabulations that are fine at the top and coarse below.
    Geometric {
        lowest_top_fractile: f64,
        highest_top_fractile: f64,
    },
    /// `K` brackets of equal population mass covering the top `lowest_top_fractile`.
    EqualMass { lowest_top_fractile: f64 },
}

impl Default for ThresholdScheme {
    fn default() -> Self {
        Self::Geometric {
            lowest_top_fractile: 0.5,
            highest_top_fractile: 1e-5,
        }
    }
}

impl ThresholdScheme {
    /// Target top fractiles `p_1 < ... < p_K`.
    pub fn top_fractiles(&self, classes: usize) -> Result<Vec<f64>> {
        if classes < 2 {
            return Err(Error::InvalidParameter {
                name: "classes",
                value: classes as f64,
                reason: "need at least two brackets",
            });
        }
        let k = classes as f64;
        match *self {
            Self::Geometric {
                lowest_top_fractile: lo,
                highest_top_fractile: hi,
            } => {
                check_fractile("lowest_top_fractile", lo)?;
                check_fractile("highest_top_fractile", hi)?;
                if !(hi < lo) {
                    return Err(Error::InvalidParameter {
                        name: "highest_top_fractile",
                        value: hi,
                        reason: "must be below lowest_top_fractile",
                    });
                }
                let ratio = (lo / hi).ln();
                Ok((0..classes)
                    .map(|i| hi * (ratio * i as f64 / (k - 1.0)).exp())
                    .collect())
            }
            Self::EqualMass {
                lowest_top_fractile: lo,
            } => {
                check_fractile("lowest_top_fractile", lo)?;
                Ok((1..=classes).map(|i| lo * i as f64 / k).collect())
            }
        }
    }

    /// Thresholds `t_1 > ... > t_K` read off the law's quantiles.
    pub fn distribution_thresholds(
        &self,
        dist: &IncomeDistribution,
        classes: usize,
    ) -> Result<Vec<f64>> {
        Ok(dedup_decreasing(
            self.top_fractiles(classes)?
                .into_iter()
                .map(|p| dist.top_threshold(p)),
        ))
    }

    /// Thresholds `t_1 > ... > t_K` read off the sample: each sits halfway
    /// between the last unit inside the target fractile and the first unit
    /// outside it. Ties collapse, so fewer than `classes` brackets may come
    /// back on heavily tied data.
    pub fn sample_thresholds(&self, sample: &MicroSample, classes: usize) -> Result<Vec<f64>> {
        let n = sample.population() as f64;
        Ok(dedup_decreasing(
            self.top_fractiles(classes)?
                .into_iter()
                .map(|p| sample.cut_below_top((p * n).round().max(1.0) as u64)),
        ))
    }
}

fn check_fractile(name: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: p,
            reason: "must lie in (0, 1]",
        })
    }
}

fn dedup_decreasing(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if out.last().is_none_or(|&last| v < last) {
            out.push(v);
        }
    }
    out
}

/// Benchmark protocol configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub distribution: IncomeDistribution,
    pub sample_size: usize,
    pub nonfilers: u64,
    /// Bracket counts `K` to tabulate each sample with.
    pub classes: Vec<usize>,
    pub fractiles: Vec<f64>,
    pub trials: usize,
    /// Trial `i` uses seed `base_seed + i`.
    pub base_seed: u64,
    pub thresholds: ThresholdScheme,
}

/// Fractiles of the usual top-share tables: P90-100 through P99.99-100.
pub const DEFAULT_FRACTILES: [f64; 6] = [0.10, 0.05, 0.01, 0.005, 0.001, 0.0001];

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            distribution: IncomeDistribution::mixture(vec![
                (0.95, IncomeDistribution::lognormal(10.0, 0.8)),
                (0.05, IncomeDistribution::pareto(1.8, 60_000.0)),
            ]),
            sample_size: 200_000,
            nonfilers: 0,
            classes: vec![8, 14, 20, 30],
            fractiles: DEFAULT_FRACTILES.to_vec(),
            trials: 20,
            base_seed: 1,
            thresholds: ThresholdScheme::default(),
        }
    }
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.sample_size == 0 {
            return Err(Error::EmptySample);
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                value: 0.0,
                reason: "need at least one trial",
            });
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "classes",
                value: 0.0,
                reason: "need at least one bracket count",
            });
        }
        if self.fractiles.is_empty() {
            return Err(Error::InvalidParameter {
                name: "fractiles",
                value: 0.0,
                reason: "need at least one fractile",
            });
        }
        for &p in &self.fractiles {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidFractile { fractile: p });
            }
        }
        for &k in &self.classes {
            self.thresholds.top_fractiles(k)?;
        }
        Ok(())
    }
}

/// One estimator evaluated at one fractile on one tabulated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCell {
    pub trial: usize,
    pub classes: usize,
    pub fractile: f64,
    pub method: Method,
    pub oracle: f64,
    pub estimate: Option<f64>,
    /// `estimate / oracle - 1`.
    pub relative_error: Option<f64>,
    /// Why the cell is missing, when it is.
    pub failure: Option<String>,
}

/// Mean squared errors over trials for one `(K, fractile, method)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub classes: usize,
    pub fractile: f64,
    pub method: Method,
    pub trials: usize,
    pub missing: usize,
    /// Mean of `(estimate / oracle - 1)^2`.
    pub mse_relative: Option<f64>,
    /// Mean of `(estimate - oracle)^2` with shares as fractions.
    pub mse_level: Option<f64>,
    /// Mean of `(estimate - oracle)^2` with shares in percentage points.
    pub mse_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub cells: Vec<ErrorCell>,
    pub mse: Vec<MseRow>,
}

impl ErrorReport {
    /// Aggregates cells into MSE rows ordered by `K`, then fractile as given, then method.
    pub fn from_cells(cells: Vec<ErrorCell>, classes: &[usize], fractiles: &[f64]) -> Self {
        let mut mse = Vec::new();
        for &k in classes {
            for &p in fractiles {
                for method in [Method::Pi, Method::Me] {
                    let mut row = MseRow {
                        classes: k,
                        fractile: p,
                        method,
                        trials: 0,
                        missing: 0,
                        mse_relative: None,
                        mse_level: None,
                        mse_pp: None,
                    };
                    let (mut rel, mut lvl) = (0.0, 0.0);
                    for c in cells
                        .iter()
                        .filter(|c| c.classes == k && c.fractile == p && c.method == method)
                    {
                        match (c.estimate, c.relative_error) {
                            (Some(e), Some(r)) => {
                                row.trials += 1;
                                rel += r * r;
                                lvl += (e - c.oracle).powi(2);
                            }
                            _ => row.missing += 1,
                        }
                    }
                    if row.trials > 0 {
                        let n = row.trials as f64;
                        row.mse_relative = Some(rel / n);
                        row.mse_level = Some(lvl / n);
                        row.mse_pp = Some(lvl / n * 1e4);
                    }
                    mse.push(row);
                }
            }
        }
        Self { cells, mse }
    }

    pub fn row(&self, classes: usize, fractile: f64, method: Method) -> Option<&MseRow> {
        self.mse
            .iter()
            .find(|r| r.classes == classes && r.fractile == fractile && r.method == method)
    }
}

/// Oracle shares, tabulation at every `K`, and both estimators for one sample.
///
/// Estimator failures become missing cells rather than errors; only an
/// invalid configuration or an oracle failure aborts.
pub fn evaluate_sample(
    sample: &MicroSample,
    trial: usize,
    classes: &[usize],
    fractiles: &[f64],
    scheme: &ThresholdScheme,
) -> Result<Vec<ErrorCell>> {
    let oracles = fractiles
        .iter()
        .map(|&p| sample.oracle_share(p))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::with_capacity(classes.len() * fractiles.len() * 2);
    for &k in classes {
        let thresholds = scheme.sample_thresholds(sample, k)?;
        let prepared = sample.tabulate(&thresholds).and_then(|tab| {
            tab.ensure_valid()?;
            let stats = cumulate(&tab)?;
            let density = build_observed_density(&stats).map_err(|e| e.to_string());
            Ok((stats, density))
        });
        for (&p, &oracle) in fractiles.iter().zip(&oracles) {
            for method in [Method::Pi, Method::Me] {
                let outcome: std::result::Result<f64, String> = match &prepared {
                    Err(e) => Err(e.to_string()),
                    Ok((stats, density)) => match method {
                        Method::Pi => share_from_stats(stats, p)
                            .map(|e| e.share)
                            .map_err(|e| e.to_string()),
                        Method::Me => density.as_ref().map_err(Clone::clone).and_then(|d| {
                            d.share_at(p).map(|e| e.share).map_err(|e| e.to_string())
                        }),
                    },
                };
                let (estimate, failure) = match outcome {
                    Ok(v) if v.is_finite() => (Some(v), None),
                    Ok(v) => (None, Some(format!("non-finite estimate {v}"))),
                    Err(e) => (None, Some(e)),
                };
                cells.push(ErrorCell {
                    trial,
                    classes: k,
                    fractile: p,
                    method,
                    oracle,
                    estimate,
                    relative_error: estimate.map(|e| e / oracle - 1.0),
                    failure,
                });
            }
        }
    }
    Ok(cells)
}

/// Runs every trial of `spec` (in parallel) and aggregates errors.
///
/// The report depends only on `spec`: trials are seeded independently and
/// reduced in trial order.
pub fn run_protocol(spec: &BenchmarkSpec) -> Result<ErrorReport> {
    spec.validate()?;
    let per_trial = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = spec.base_seed.wrapping_add(trial as u64);
            let sample = generate(&spec.distribution, spec.sample_size, seed)?
                .with_nonfilers(spec.nonfilers);
            evaluate_sample(
                &sample,
                trial,
                &spec.classes,
                &spec.fractiles,
                &spec.thresholds,
            )
        })
        .collect::<Vec<_>>();
    let mut cells = Vec::new();
    for trial in per_trial {
        cells.extend(trial?);
    }
    Ok(ErrorReport::from_cells(
        cells,
        &spec.classes,
        &spec.fractiles,
    ))
}
