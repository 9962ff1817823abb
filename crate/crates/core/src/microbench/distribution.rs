//! Synthetic income laws and reproducible samplers.
//!
//! Sampling is by inversion: each draw takes a uniform `u` in `(0, 1)` from
//! a ChaCha8 stream seeded with the caller's seed (53 random bits, offset by
//! half an ulp so neither endpoint occurs) and returns the quantile at `u`.
//! Mixtures spend one uniform choosing the component and a second on its
//! quantile. The stream is platform independent, so a seed pins the sample.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sample::MicroSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IncomeDistribution {
    /// `P(Y > y) = (y / scale)^(-exponent)` for `y ≥ scale`.
    Pareto {
        exponent: f64,
        scale: f64,
    },
    /// `ln Y ~ N(location, shape²)`.
    Lognormal {
        location: f64,
        shape: f64,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: IncomeDistribution,
}

fn standard_normal() -> Normal {
    Normal::standard()
}

impl IncomeDistribution {
    pub fn pareto(exponent: f64, scale: f64) -> Self {
        Self::Pareto { exponent, scale }
    }

    pub fn lognormal(location: f64, shape: f64) -> Self {
        Self::Lognormal { location, shape }
    }

    pub fn mixture(components: Vec<(f64, IncomeDistribution)>) -> Self {
        Self::Mixture {
            components: components
                .into_iter()
                .map(|(weight, distribution)| MixtureComponent {
                    weight,
                    distribution,
                })
                .collect(),
        }
    }

    /// Checks parameters; returns warnings for legal but unusual choices
    /// (a Pareto exponent at or below 1 has no mean, so shares are undefined).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        self.validate_into(&mut warnings, true)?;
        Ok(warnings)
    }

    fn validate_into(&self, warnings: &mut Vec<String>, top: bool) -> Result<()> {
        match *self {
            Self::Pareto { exponent, scale } => {
                if !(exponent > 0.0) || !exponent.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "exponent",
                        value: exponent,
                        reason: "must be positive and finite",
                    });
                }
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "scale",
                        value: scale,
                        reason: "must be positive and finite",
                    });
                }
                if exponent <= 1.0 {
                    warnings.push(format!(
                        "Pareto exponent {exponent} <= 1: infinite mean, income shares are not defined"
                    ));
                }
            }
            Self::Lognormal { location, shape } => {
                if !location.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "location",
                        value: location,
                        reason: "must be finite",
                    });
                }
                if !(shape > 0.0) || !shape.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "shape",
                        value: shape,
                        reason: "must be positive and finite",
                    });
                }
            }
            Self::Mixture { ref components } => {
                if !top {
                    return Err(Error::InvalidParameter {
                        name: "mixture",
                        value: 0.0,
                        reason: "mixtures cannot be nested",
                    });
                }
                if components.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "components",
                        value: 0.0,
                        reason: "mixture needs at least one component",
                    });
                }
                for c in components {
                    if !(c.weight > 0.0) || !c.weight.is_finite() {
                        return Err(Error::InvalidParameter {
                            name: "weight",
                            value: c.weight,
                            reason: "mixture weights must be positive",
                        });
                    }
                    c.distribution.validate_into(warnings, false)?;
                }
            }
        }
        Ok(())
    }

    /// `P(Y ≤ y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Self::Pareto { exponent, scale } => {
                if y <= scale {
                    0.0
                } else {
                    -(-exponent * (y / scale).ln()).exp_m1()
                }
            }
            Self::Lognormal { location, shape } => {
                if y <= 0.0 {
                    0.0
                } else {
                    standard_normal().cdf((y.ln() - location) / shape)
                }
            }
            Self::Mixture { ref components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * c.distribution.cdf(y))
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// Inverse of [`cdf`](Self::cdf) for `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Pareto { exponent, scale } => scale * (1.0 - u).powf(-1.0 / exponent),
            Self::Lognormal { location, shape } => {
                (location + shape * standard_normal().inverse_cdf(u)).exp()
            }
            Self::Mixture { ref components } => {
                // the mixture quantile lies between its components' quantiles
                let qs = components.iter().map(|c| c.distribution.quantile(u));
                let mut lo = qs.clone().fold(f64::INFINITY, f64::min);
                let mut hi = qs.fold(f64::NEG_INFINITY, f64::max);
                for _ in 0..200 {
                    if hi - lo <= 1e-15 * hi.abs() {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Income at which the top `p` fractile starts.
    pub fn top_threshold(&self, p: f64) -> f64 {
        self.quantile(1.0 - p)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Pareto { exponent, scale } => {
                if exponent > 1.0 {
                    scale * exponent / (exponent - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::Lognormal { location, shape } => (location + 0.5 * shape * shape).exp(),
            Self::Mixture { ref components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * c.distribution.mean())
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// `E[Y; Y > y]`, the income held above level `y` per unit of population.
    pub fn income_above(&self, y: f64) -> f64 {
        match *self {
            Self::Pareto { exponent, scale } => {
                if y <= scale {
                    self.mean()
                } else if exponent > 1.0 {
                    scale * exponent / (exponent - 1.0) * (y / scale).powf(1.0 - exponent)
                } else {
                    f64::INFINITY
                }
            }
            Self::Lognormal { location, shape } => {
                if y <= 0.0 {
                    self.mean()
                } else {
                    self.mean() * standard_normal().cdf(shape - (y.ln() - location) / shape)
                }
            }
            Self::Mixture { ref components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * c.distribution.income_above(y))
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// `∫_u^1 F^{-1}(v) dv`, the income of the top `1 - u` of the population.
    fn upper_income(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match *self {
            Self::Pareto { exponent, scale } if exponent > 1.0 => {
                let k = 1.0 - 1.0 / exponent;
                scale * (1.0 - u).powf(k) / k
            }
            Self::Lognormal { shape, .. } => {
                if u <= 0.0 {
                    return self.mean();
                }
                let z = standard_normal().inverse_cdf(u);
                self.mean() * standard_normal().cdf(shape - z)
            }
            _ => {
                if u <= 0.0 {
                    self.mean()
                } else {
                    self.income_above(self.quantile(u))
                }
            }
        }
    }

    /// Closed-form share of total income held by the top `p`, when available.
    pub fn top_share(&self, p: f64) -> Option<f64> {
        match *self {
            Self::Pareto { exponent, .. } if exponent > 1.0 => {
                Some(p.powf((exponent - 1.0) / exponent))
            }
            Self::Lognormal { shape, .. } => {
                let z = standard_normal().inverse_cdf(1.0 - p);
                Some(1.0 - standard_normal().cdf(z - shape))
            }
            _ => None,
        }
    }
}

/// Uniform in the open interval `(0, 1)`.
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

/// Draws `size` incomes from `dist` by inversion, reproducibly from `seed`.
pub fn generate(dist: &IncomeDistribution, size: usize, seed: u64) -> Result<MicroSample> {
    dist.validate()?;
    if size == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let incomes: Vec<f64> = match dist {
        IncomeDistribution::Mixture { components } => {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            let mut edges = Vec::with_capacity(components.len());
            let mut acc = 0.0;
            for c in components {
                acc += c.weight / total;
                edges.push(acc);
            }
            (0..size)
                .map(|_| {
                    let pick = open_uniform(&mut rng);
                    let u = open_uniform(&mut rng);
                    let i = edges
                        .partition_point(|&e| e < pick)
                        .min(components.len() - 1);
                    components[i].distribution.quantile(u)
                })
                .collect()
        }
        _ => (0..size)
            .map(|_| dist.quantile(open_uniform(&mut rng)))
            .collect(),
    };
    MicroSample::new(incomes, 0)
}

/// Deterministic population of `size` equal-mass cells, each unit carrying
/// its cell's exact conditional mean. Totals and top-`i/size` shares match
/// the continuous law. Every component needs a finite mean.
pub fn stratified_population(dist: &IncomeDistribution, size: usize) -> Result<MicroSample> {
    dist.validate()?;
    if size == 0 {
        return Err(Error::EmptySample);
    }
    if !dist.mean().is_finite() {
        return Err(Error::InvalidParameter {
            name: "distribution",
            value: dist.mean(),
            reason: "stratified populations need a finite mean",
        });
    }
    let n = size as f64;
    let uppers: Vec<f64> = (0..=size)
        .map(|i| dist.upper_income(i as f64 / n))
        .collect();
    let incomes = uppers.windows(2).map(|w| (w[0] - w[1]) * n).collect();
    MicroSample::new(incomes, 0)
}
