use thiserror::Error;

use crate::tabulation::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tabulation for year {year}: {}", summarize(.violations))]
    InvalidTabulation {
        year: i32,
        violations: Vec<Violation>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no denominator row for year {year}")]
    MissingDenominator { year: i32 },

    #[error("duplicate year {year} in denominator file")]
    DuplicateYear { year: i32 },

    #[error("cumulative count is zero at bracket {bracket}")]
    EmptyCumulative { bracket: usize },

    #[error("fractile {fractile} is outside (0, 1]")]
    InvalidFractile { fractile: f64 },

    #[error("fractile {fractile} is not covered: filers only reach the top {covered}")]
    FractileNotCovered { fractile: f64, covered: f64 },

    #[error("bracket {bracket} has Pareto coefficient {coefficient}, must exceed 1")]
    NonParetoBracket { bracket: usize, coefficient: f64 },

    #[error("bracket {bracket:?}: mean {mean} is not strictly inside [{lower}, {upper})")]
    MeanOnBoundary {
        bracket: Option<usize>,
        lower: f64,
        upper: f64,
        mean: f64,
    },

    #[error("threshold search stopped after {iterations} iterations (scaled gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        best: Vec<f64>,
    },

    #[error("infeasible threshold ordering: {0}")]
    InfeasibleOrdering(String),

    #[error("micro sample is empty")]
    EmptySample,

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
