//! Grouped income data and the cumulative statistics both estimators use.
//!
//! Brackets are always held in descending threshold order: bracket `k = 1`
//! is the highest income class and `k = K` the lowest. Position `i` in the
//! bracket vector corresponds to `k = i + 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One income class: returns with income in `[lower_threshold, next higher threshold)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncomeBracket {
    pub lower_threshold: f64,
    pub count: u64,
    /// Total income of the bracket, in the tabulation's `income_unit`.
    pub income_sum: f64,
}

impl IncomeBracket {
    pub fn new(lower_threshold: f64, count: u64, income_sum: f64) -> Self {
        Self {
            lower_threshold,
            count,
            income_sum,
        }
    }
}

/// One year of tabulated income data plus its population and income denominators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulation {
    year: i32,
    brackets: Vec<IncomeBracket>,
    population: u64,
    total_income: f64,
    income_unit: f64,
}

impl Tabulation {
    /// Builds a tabulation, reordering brackets by descending threshold.
    ///
    /// `income_unit` converts `income_sum` and `total_income` into threshold
    /// units (1000 when sums are reported in thousands of dollars). No
    /// validation happens here; see [`validate`].
    pub fn new(
        year: i32,
        mut brackets: Vec<IncomeBracket>,
        population: u64,
        total_income: f64,
        income_unit: f64,
    ) -> Self {
        brackets.sort_by(|a, b| b.lower_threshold.total_cmp(&a.lower_threshold));
        Self {
            year,
            brackets,
            population,
            total_income,
            income_unit,
        }
    }

    /// Like [`Tabulation::new`] but rejects tabulations with any violation.
    pub fn try_new(
        year: i32,
        brackets: Vec<IncomeBracket>,
        population: u64,
        total_income: f64,
        income_unit: f64,
    ) -> Result<Self> {
        let tab = Self::new(year, brackets, population, total_income, income_unit);
        tab.ensure_valid()?;
        Ok(tab)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidTabulation {
                year: self.year,
                violations,
            })
        }
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = year;
        self
    }

    /// Brackets from highest (`k = 1`) to lowest (`k = K`).
    pub fn brackets(&self) -> &[IncomeBracket] {
        &self.brackets
    }

    /// Number of brackets `K`.
    pub fn classes(&self) -> usize {
        self.brackets.len()
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    /// Income denominator in `income_unit`.
    pub fn total_income(&self) -> f64 {
        self.total_income
    }

    pub fn income_unit(&self) -> f64 {
        self.income_unit
    }

    /// Income denominator converted to threshold units.
    pub fn scaled_total_income(&self) -> f64 {
        self.total_income * self.income_unit
    }

    pub fn lowest_threshold(&self) -> f64 {
        self.brackets.last().map_or(f64::NAN, |b| b.lower_threshold)
    }

    /// Thresholds `t_1 > ... > t_K`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.brackets.iter().map(|b| b.lower_threshold).collect()
    }
}

/// Machine-readable reason a [`Tabulation`] is invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationCode {
    TooFewBrackets,
    NonFiniteValue,
    NegativeValue,
    ThresholdOrder,
    MeanBelowThreshold,
    MeanAboveUpper,
    IncomeWithoutReturns,
    CountsExceedPopulation,
    NonPositivePopulation,
    NonPositiveTotalIncome,
    NonPositiveIncomeUnit,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TooFewBrackets => "too-few-brackets",
            Self::NonFiniteValue => "non-finite-value",
            Self::NegativeValue => "negative-value",
            Self::ThresholdOrder => "threshold-order",
            Self::MeanBelowThreshold => "mean-below-threshold",
            Self::MeanAboveUpper => "mean-above-upper",
            Self::IncomeWithoutReturns => "income-without-returns",
            Self::CountsExceedPopulation => "counts-exceed-population",
            Self::NonPositivePopulation => "non-positive-population",
            Self::NonPositiveTotalIncome => "non-positive-total-income",
            Self::NonPositiveIncomeUnit => "non-positive-income-unit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Bracket index `k` (1 = highest), when the violation belongs to a bracket.
    pub bracket: Option<usize>,
    pub code: ViolationCode,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bracket {
            Some(k) => write!(f, "bracket {k}: {} ({})", self.code.as_str(), self.detail),
            None => write!(f, "{} ({})", self.code.as_str(), self.detail),
        }
    }
}

/// Lists every invariant violation of `tab`; an empty list means valid.
pub fn validate(tab: &Tabulation) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |bracket: Option<usize>, code, detail: String| {
        out.push(Violation {
            bracket,
            code,
            detail,
        })
    };

    if tab.brackets.len() < 2 {
        push(
            None,
            ViolationCode::TooFewBrackets,
            format!("{} bracket(s), need at least 2", tab.brackets.len()),
        );
    }
    if tab.population == 0 {
        push(
            None,
            ViolationCode::NonPositivePopulation,
            "population is 0".into(),
        );
    }
    if !tab.total_income.is_finite() {
        push(
            None,
            ViolationCode::NonFiniteValue,
            format!("total income {}", tab.total_income),
        );
    } else if tab.total_income <= 0.0 {
        push(
            None,
            ViolationCode::NonPositiveTotalIncome,
            format!("total income {}", tab.total_income),
        );
    }
    let unit_ok = tab.income_unit.is_finite() && tab.income_unit > 0.0;
    if !unit_ok {
        push(
            None,
            ViolationCode::NonPositiveIncomeUnit,
            format!("income unit {}", tab.income_unit),
        );
    }

    let mut filers: u64 = 0;
    for (i, b) in tab.brackets.iter().enumerate() {
        let k = i + 1;
        filers = filers.saturating_add(b.count);
        if !b.lower_threshold.is_finite() || !b.income_sum.is_finite() {
            push(
                Some(k),
                ViolationCode::NonFiniteValue,
                format!("threshold {}, income {}", b.lower_threshold, b.income_sum),
            );
            continue;
        }
        if b.lower_threshold < 0.0 || b.income_sum < 0.0 {
            push(
                Some(k),
                ViolationCode::NegativeValue,
                format!("threshold {}, income {}", b.lower_threshold, b.income_sum),
            );
            continue;
        }
        let upper = if i == 0 {
            f64::INFINITY
        } else {
            tab.brackets[i - 1].lower_threshold
        };
        if i > 0 && b.lower_threshold.partial_cmp(&upper) != Some(std::cmp::Ordering::Less) {
            push(
                Some(k),
                ViolationCode::ThresholdOrder,
                format!("threshold {} not below {}", b.lower_threshold, upper),
            );
        }
        if b.count == 0 {
            if b.income_sum > 0.0 {
                push(
                    Some(k),
                    ViolationCode::IncomeWithoutReturns,
                    format!("income {} with zero returns", b.income_sum),
                );
            }
            continue;
        }
        if !unit_ok {
            continue;
        }
        let mean = b.income_sum * tab.income_unit / b.count as f64;
        let below = if i == 0 {
            mean <= b.lower_threshold
        } else {
            mean < b.lower_threshold
        };
        if below {
            push(
                Some(k),
                ViolationCode::MeanBelowThreshold,
                format!("mean {mean} vs threshold {}", b.lower_threshold),
            );
        } else if mean >= upper {
            push(
                Some(k),
                ViolationCode::MeanAboveUpper,
                format!("mean {mean} vs upper threshold {upper}"),
            );
        }
    }
    if filers > tab.population {
        push(
            None,
            ViolationCode::CountsExceedPopulation,
            format!("{filers} returns exceed population {}", tab.population),
        );
    }
    out
}

/// Derived quantities of bracket `k`, all incomes in threshold units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketStats {
    /// Bracket index, 1 = highest.
    pub k: usize,
    /// `t_k`.
    pub threshold: f64,
    /// `t_{k-1}`, infinite for the top bracket.
    pub upper_threshold: f64,
    /// Returns in the bracket, `n_k - n_{k-1}`.
    pub count: u64,
    /// `n_k`: returns with income at least `t_k`.
    pub cum_count: u64,
    /// `S_k`: total income of those returns.
    pub cum_income: f64,
    /// `p_k = n_k / n`.
    pub top_fractile: f64,
    /// `s_k = S_k / n_k`.
    pub mean_above: f64,
    /// `b_k = s_k / t_k`, infinite when `t_k = 0`.
    pub pareto_coefficient: f64,
    /// `a_k = b_k / (b_k - 1)`.
    pub pareto_exponent: f64,
    /// `q_k = p_k - p_{k-1}`.
    pub mass: f64,
    /// `y_k`, the bracket mean; `None` for an empty bracket.
    pub mean: Option<f64>,
}

/// Per-bracket cumulative statistics of one [`Tabulation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeStats {
    pub year: i32,
    pub population: u64,
    /// Income denominator in threshold units.
    pub total_income: f64,
    /// Brackets from highest to lowest.
    pub brackets: Vec<BracketStats>,
}

impl CumulativeStats {
    pub fn classes(&self) -> usize {
        self.brackets.len()
    }

    /// Statistics of bracket `k` (1-based).
    pub fn bracket(&self, k: usize) -> &BracketStats {
        &self.brackets[k - 1]
    }

    /// `p_K`, the share of the population covered by filers.
    pub fn covered_fractile(&self) -> f64 {
        self.brackets.last().map_or(0.0, |b| b.top_fractile)
    }

    /// `p_1`, the fractile at the highest threshold.
    pub fn top_bracket_fractile(&self) -> f64 {
        self.brackets.first().map_or(0.0, |b| b.top_fractile)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.brackets.iter().map(|b| b.threshold).collect()
    }
}

/// Local Pareto exponent from the coefficient, `b / (b - 1)`.
pub fn pareto_exponent(coefficient: f64) -> f64 {
    if coefficient.is_infinite() {
        1.0
    } else {
        coefficient / (coefficient - 1.0)
    }
}

/// Computes [`CumulativeStats`] top-down, rescaling incomes by `income_unit`.
pub fn cumulate(tab: &Tabulation) -> Result<CumulativeStats> {
    if tab.population == 0 {
        return Err(Error::InvalidParameter {
            name: "population",
            value: 0.0,
            reason: "population must be positive",
        });
    }
    let n = tab.population as f64;
    let unit = tab.income_unit;
    let mut cum_count = 0u64;
    let mut cum_income = 0.0f64;
    let mut prev_fractile = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut brackets = Vec::with_capacity(tab.brackets.len());
    for (i, b) in tab.brackets.iter().enumerate() {
        let k = i + 1;
        let income = b.income_sum * unit;
        cum_count += b.count;
        cum_income += income;
        if cum_count == 0 {
            return Err(Error::EmptyCumulative { bracket: k });
        }
        let top_fractile = cum_count as f64 / n;
        let mean_above = cum_income / cum_count as f64;
        let pareto_coefficient = mean_above / b.lower_threshold;
        brackets.push(BracketStats {
            k,
            threshold: b.lower_threshold,
            upper_threshold: upper,
            count: b.count,
            cum_count,
            cum_income,
            top_fractile,
            mean_above,
            pareto_coefficient,
            pareto_exponent: pareto_exponent(pareto_coefficient),
            mass: top_fractile - prev_fractile,
            mean: (b.count > 0).then(|| income / b.count as f64),
        });
        prev_fractile = top_fractile;
        upper = b.lower_threshold;
    }
    Ok(CumulativeStats {
        year: tab.year,
        population: tab.population,
        total_income: tab.scaled_total_income(),
        brackets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Tabulation {
        Tabulation::new(
            1999,
            vec![
                IncomeBracket::new(10.0, 5, 90.0),
                IncomeBracket::new(50.0, 2, 150.0),
                IncomeBracket::new(20.0, 3, 90.0),
            ],
            20,
            500.0,
            1.0,
        )
    }

    #[test]
    fn brackets_are_reordered_descending() {
        let tab = three();
        assert_eq!(tab.thresholds(), vec![50.0, 20.0, 10.0]);
        assert!(validate(&tab).is_empty());
    }

    #[test]
    fn mean_below_threshold_is_reported() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(100.0, 2, 300.0),
                IncomeBracket::new(10.0, 4, 20.0),
            ],
            10,
            400.0,
            1.0,
        );
        let v = validate(&tab);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].bracket, Some(2));
        assert_eq!(v[0].code, ViolationCode::MeanBelowThreshold);
    }

    #[test]
    fn equal_thresholds_break_ordering() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(10.0, 1, 15.0),
                IncomeBracket::new(10.0, 1, 12.0),
            ],
            10,
            100.0,
            1.0,
        );
        let v = validate(&tab);
        assert!(v
            .iter()
            .any(|v| v.code == ViolationCode::ThresholdOrder && v.bracket == Some(2)));
    }

    #[test]
    fn open_top_bracket_needs_mean_above_threshold() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(10.0, 2, 20.0),
                IncomeBracket::new(5.0, 1, 7.0),
            ],
            10,
            100.0,
            1.0,
        );
        assert_eq!(validate(&tab)[0].code, ViolationCode::MeanBelowThreshold);
    }

    #[test]
    fn global_violations() {
        let tab = Tabulation::new(1, vec![IncomeBracket::new(1.0, 5, 10.0)], 3, 0.0, 0.0);
        let codes: Vec<_> = validate(&tab).into_iter().map(|v| v.code).collect();
        assert!(codes.contains(&ViolationCode::TooFewBrackets));
        assert!(codes.contains(&ViolationCode::NonPositiveTotalIncome));
        assert!(codes.contains(&ViolationCode::NonPositiveIncomeUnit));
        assert!(codes.contains(&ViolationCode::CountsExceedPopulation));
    }

    #[test]
    fn cumulative_fields() {
        let stats = cumulate(&three()).unwrap();
        let b1 = stats.bracket(1);
        assert_eq!(b1.cum_count, 2);
        assert_eq!(b1.mean_above, 75.0);
        assert_eq!(b1.pareto_coefficient, 1.5);
        assert_eq!(b1.pareto_exponent, 3.0);
        let b3 = stats.bracket(3);
        assert_eq!(b3.cum_count, 10);
        assert_eq!(b3.cum_income, 330.0);
        assert_eq!(b3.top_fractile, 0.5);
        assert_eq!(b3.mean, Some(18.0));
        let total: f64 = stats.brackets.iter().map(|b| b.mass).sum();
        assert!((total - stats.covered_fractile()).abs() < 1e-15);
    }

    #[test]
    fn single_bracket_with_double_mean_has_exponent_two() {
        let tab = Tabulation::new(1, vec![IncomeBracket::new(10.0, 10, 200.0)], 10, 200.0, 1.0);
        let b = cumulate(&tab).unwrap().brackets[0];
        assert_eq!(b.pareto_coefficient, 2.0);
        assert_eq!(b.pareto_exponent, 2.0);
        assert_eq!(b.top_fractile, 1.0);
    }

    #[test]
    fn income_unit_rescales_sums() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(4_000_000.0, 4, 29_920.0),
                IncomeBracket::new(3_000_000.0, 3, 9_218.0),
            ],
            41_909_000,
            1.0e9,
            1000.0,
        );
        let stats = cumulate(&tab).unwrap();
        assert_eq!(stats.bracket(1).mean_above, 7_480_000.0);
        assert_eq!(stats.total_income, 1.0e12);
    }

    #[test]
    fn empty_top_bracket_fails_cumulation() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(100.0, 0, 0.0),
                IncomeBracket::new(10.0, 4, 80.0),
            ],
            10,
            100.0,
            1.0,
        );
        assert!(matches!(
            cumulate(&tab),
            Err(Error::EmptyCumulative { bracket: 1 })
        ));
    }

    #[test]
    fn zero_threshold_gives_unit_exponent() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(10.0, 1, 20.0),
                IncomeBracket::new(0.0, 4, 20.0),
            ],
            10,
            100.0,
            1.0,
        );
        let b = cumulate(&tab).unwrap().brackets[1];
        assert!(b.pareto_coefficient.is_infinite());
        assert_eq!(b.pareto_exponent, 1.0);
    }
}
