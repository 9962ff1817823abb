use serde::{Deserialize, Serialize};

/// Estimator that produced a [`ShareEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Pareto interpolation.
    Pi,
    /// Maximum entropy.
    Me,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pi => "pi",
            Method::Me => "me",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Income threshold, total income and share of the top `fractile` of tax units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareEstimate {
    pub fractile: f64,
    /// Income level at which the top fractile starts, in threshold units.
    pub threshold: f64,
    /// Total income of the top fractile, in threshold units.
    pub top_income: f64,
    pub share: f64,
    pub method: Method,
    /// Reference bracket `k` (1 = highest) used by Pareto interpolation.
    pub bracket: Option<usize>,
    /// The fractile lies above the top tabulated bracket, so the estimate
    /// relies on the top bracket's fit beyond the data.
    pub extrapolated: bool,
}
