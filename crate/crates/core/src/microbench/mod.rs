//! Accuracy benchmark against micro-sample oracles.
//!
//! A [`MicroSample`] knows its true top shares. Tabulating it at several
//! bracket counts and running both estimators on the tables measures how
//! far each estimate lands from the truth.

mod distribution;
mod protocol;
mod sample;

pub use distribution::{generate, stratified_population, IncomeDistribution, MixtureComponent};
pub use protocol::{
    evaluate_sample, run_protocol, BenchmarkSpec, ErrorCell, ErrorReport, MseRow, ThresholdScheme,
    DEFAULT_FRACTILES,
};
pub use sample::{oracle_share, tabulate, MicroSample};
