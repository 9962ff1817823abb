//! Top income shares from grouped (tabulated) income data.
//!
//! Two estimators are provided over the same [`Tabulation`] model:
//!
//! * [`pareto`]: local Pareto interpolation around the tabulated fractile
//!   closest to the one requested.
//! * [`maxent`]: the maximum-entropy density subject to per-bracket mass and
//!   mean constraints, which is piecewise exponential and can be queried at
//!   any fractile.
//!
//! [`microbench`] scores both against micro-sample oracles.
//!
//! ```
//! use topshares::{Tabulation, IncomeBracket, pareto, maxent};
//!
//! let tab = Tabulation::new(
//!     2001,
//!     vec![
//!         IncomeBracket::new(100.0, 10, 2_500.0),
//!         IncomeBracket::new(50.0, 40, 2_600.0),
//!         IncomeBracket::new(10.0, 150, 3_000.0),
//!     ],
//!     1_000,
//!     12_000.0,
//!     1.0,
//! );
//! let pi = pareto::estimate_share_pi(&tab, 0.05).unwrap();
//! let me = maxent::estimate_share_me(&tab, 0.05).unwrap();
//! assert!((pi.share - 5_100.0 / 12_000.0).abs() < 1e-12);
//! assert!((me.share - 5_100.0 / 12_000.0).abs() < 1e-12);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimate;
pub mod io;
pub mod maxent;
pub mod microbench;
pub mod pareto;
pub mod tabulation;

pub use error::{Error, Result};
pub use estimate::{Method, ShareEstimate};
pub use tabulation::{
    cumulate, validate, BracketStats, CumulativeStats, IncomeBracket, Tabulation, Violation,
    ViolationCode,
};
