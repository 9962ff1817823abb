use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabulation::{IncomeBracket, Tabulation};

/// Individual incomes standing in for a micro-file.
///
/// Units are kept sorted by descending income with running totals, so
/// oracle shares are a binary search away. Non-filers rank below every
/// filer with zero income.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroSample {
    incomes: Vec<f64>,
    weights: Vec<u64>,
    cum_weight: Vec<u64>,
    cum_income: Vec<f64>,
    nonfilers: u64,
    total_income: f64,
}

impl MicroSample {
    /// One unit per income.
    pub fn new(incomes: Vec<f64>, nonfilers: u64) -> Result<Self> {
        Self::weighted(incomes.into_iter().map(|x| (x, 1)).collect(), nonfilers)
    }

    /// Units given as `(income, replication weight)`.
    pub fn weighted(mut units: Vec<(f64, u64)>, nonfilers: u64) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&(x, _)) = units.iter().find(|(x, _)| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter {
                name: "income",
                value: x,
                reason: "incomes must be finite and nonnegative",
            });
        }
        if units.iter().any(|&(_, w)| w == 0) {
            return Err(Error::InvalidParameter {
                name: "weight",
                value: 0.0,
                reason: "weights must be positive",
            });
        }
        units.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut cum_weight = Vec::with_capacity(units.len());
        let mut cum_income = Vec::with_capacity(units.len());
        let (mut w_acc, mut x_acc) = (0u64, 0.0f64);
        for &(x, w) in &units {
            w_acc += w;
            x_acc += x * w as f64;
            cum_weight.push(w_acc);
            cum_income.push(x_acc);
        }
        let (incomes, weights) = units.into_iter().unzip();
        Ok(Self {
            incomes,
            weights,
            cum_weight,
            cum_income,
            nonfilers,
            total_income: x_acc,
        })
    }

    /// Sets the number of non-filers ranked below every filer.
    pub fn with_nonfilers(mut self, nonfilers: u64) -> Self {
        self.nonfilers = nonfilers;
        self
    }

    /// Replaces the income denominator (e.g. with an externally imputed total).
    pub fn with_total_income(mut self, total_income: f64) -> Self {
        self.total_income = total_income;
        self
    }

    /// Incomes in descending order, one entry per distinct unit record.
    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn filers(&self) -> u64 {
        self.cum_weight.last().copied().unwrap_or(0)
    }

    pub fn nonfilers(&self) -> u64 {
        self.nonfilers
    }

    pub fn population(&self) -> u64 {
        self.filers() + self.nonfilers
    }

    pub fn total_income(&self) -> f64 {
        self.total_income
    }

    fn position(&self, units: f64) -> usize {
        self.cum_weight.partition_point(|&w| (w as f64) < units)
    }

    /// Income of the top `units` units; a fractional boundary unit counts pro rata.
    pub fn top_income(&self, units: f64) -> f64 {
        if units <= 0.0 {
            return 0.0;
        }
        let j = self.position(units);
        if j == self.incomes.len() {
            return self.total_filer_income();
        }
        let (w_prev, x_prev) = if j == 0 {
            (0.0, 0.0)
        } else {
            (self.cum_weight[j - 1] as f64, self.cum_income[j - 1])
        };
        x_prev + (units - w_prev) * self.incomes[j]
    }

    fn total_filer_income(&self) -> f64 {
        self.cum_income.last().copied().unwrap_or(0.0)
    }

    /// Income of the unit at the top-`p` cut.
    pub fn income_at_top_fractile(&self, p: f64) -> f64 {
        let units = p * self.population() as f64;
        let j = self.position(units.max(1.0));
        self.incomes.get(j).copied().unwrap_or(0.0)
    }

    /// Income of the unit at 1-based `rank` from the top; zero past the filers.
    pub fn income_at_rank(&self, rank: u64) -> f64 {
        let j = self.cum_weight.partition_point(|&w| w < rank.max(1));
        self.incomes.get(j).copied().unwrap_or(0.0)
    }

    /// Midpoint between the `units`-th and the next unit from the top, a
    /// threshold that leaves exactly the top `units` units above it when
    /// their incomes differ.
    pub fn cut_below_top(&self, units: u64) -> f64 {
        0.5 * (self.income_at_rank(units) + self.income_at_rank(units + 1))
    }

    /// Exact share of total income held by the top `p` of the population.
    pub fn oracle_share(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidFractile { fractile: p });
        }
        let units = snap(p * self.population() as f64);
        if units < 1.0 {
            return Err(Error::InvalidParameter {
                name: "fractile",
                value: p,
                reason: "top fractile holds less than one unit",
            });
        }
        Ok(self.top_income(units) / self.total_income)
    }

    /// Bins the sample on thresholds `t_1 > ... > t_K`.
    ///
    /// Units below `t_K` stay in the population and the income denominator
    /// but fall outside every bracket.
    pub fn tabulate(&self, thresholds: &[f64]) -> Result<Tabulation> {
        if thresholds.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InfeasibleOrdering(
                "thresholds must be strictly decreasing".into(),
            ));
        }
        let mut brackets: Vec<IncomeBracket> = thresholds
            .iter()
            .map(|&t| IncomeBracket::new(t, 0, 0.0))
            .collect();
        let mut k = 0usize;
        for (&x, &w) in self.incomes.iter().zip(&self.weights) {
            while k < brackets.len() && x < brackets[k].lower_threshold {
                k += 1;
            }
            if k == brackets.len() {
                break;
            }
            brackets[k].count += w;
            brackets[k].income_sum += x * w as f64;
        }
        Ok(Tabulation::new(
            0,
            brackets,
            self.population(),
            self.total_income,
            1.0,
        ))
    }
}

/// Rounds unit counts that differ from a whole number only by float error.
fn snap(units: f64) -> f64 {
    let r = units.round();
    if (units - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        units
    }
}

/// Bins `sample` on `thresholds` (strictly decreasing).
pub fn tabulate(sample: &MicroSample, thresholds: &[f64]) -> Result<Tabulation> {
    sample.tabulate(thresholds)
}

/// Share of total income held by the top `p` of `sample`.
pub fn oracle_share(sample: &MicroSample, p: f64) -> Result<f64> {
    sample.oracle_share(p)
}
