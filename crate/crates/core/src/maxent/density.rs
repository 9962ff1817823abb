use serde::{Deserialize, Serialize};

use super::kernel;
use super::rate::solve_rate;
use crate::error::{Error, Result};
use crate::estimate::{Method, ShareEstimate};
use crate::tabulation::CumulativeStats;

/// One exponential piece of a [`MaxEntDensity`], carrying probability mass `mass`
/// on `[lower, upper)`. The top piece has `upper = ∞` and a negative rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub bracket: usize,
    pub lower: f64,
    pub upper: f64,
    pub mass: f64,
    pub mean: f64,
    pub rate: f64,
}

impl Piece {
    pub fn is_unbounded(&self) -> bool {
        self.upper == f64::INFINITY
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// `λ Δ` for bounded pieces.
    pub fn tilt(&self) -> f64 {
        self.rate * self.width()
    }

    fn position(&self, y: f64) -> f64 {
        ((y - self.lower) / self.width()).clamp(0.0, 1.0)
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lower && y < self.upper
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !self.contains(y) || self.mass == 0.0 {
            return 0.0;
        }
        if self.is_unbounded() {
            return self.mass * -self.rate * (self.rate * (y - self.lower)).exp();
        }
        self.mass / self.width() * kernel::density(self.tilt(), self.position(y))
    }

    /// Density just above `lower`.
    pub fn lower_edge_density(&self) -> f64 {
        if self.is_unbounded() {
            self.mass * -self.rate
        } else {
            self.mass / self.width() * kernel::edge_density(self.tilt())
        }
    }

    /// Density just below `upper`; zero for the unbounded piece.
    pub fn upper_edge_density(&self) -> f64 {
        if self.is_unbounded() {
            0.0
        } else {
            self.mass / self.width() * kernel::edge_density(-self.tilt())
        }
    }

    /// Mass in `[y, upper)`.
    pub fn mass_above(&self, y: f64) -> f64 {
        if y <= self.lower {
            return self.mass;
        }
        if y >= self.upper {
            return 0.0;
        }
        if self.is_unbounded() {
            self.mass * (self.rate * (y - self.lower)).exp()
        } else {
            self.mass * kernel::fraction_above(self.tilt(), self.position(y))
        }
    }

    /// Mass in `[lower, y)`.
    pub fn mass_below(&self, y: f64) -> f64 {
        if y <= self.lower {
            return 0.0;
        }
        if y >= self.upper {
            return self.mass;
        }
        if self.is_unbounded() {
            -self.mass * (self.rate * (y - self.lower)).exp_m1()
        } else {
            self.mass * kernel::fraction_below(self.tilt(), self.position(y))
        }
    }

    /// Mean income of the part of the piece above `y`.
    pub fn conditional_mean_above(&self, y: f64) -> f64 {
        let y = y.max(self.lower);
        if self.is_unbounded() {
            return y - 1.0 / self.rate;
        }
        self.lower + self.width() * kernel::mean_above(self.tilt(), self.position(y))
    }

    /// `∫_y^upper t f(t) dt`.
    pub fn income_above(&self, y: f64) -> f64 {
        let m = self.mass_above(y);
        if m == 0.0 {
            0.0
        } else {
            m * self.conditional_mean_above(y)
        }
    }

    /// Point above which a fraction `fraction` of this piece's mass lies.
    pub fn point_with_fraction_above(&self, fraction: f64) -> f64 {
        if fraction >= 1.0 {
            return self.lower;
        }
        if self.is_unbounded() {
            return self.lower + fraction.ln() / self.rate;
        }
        let s = kernel::position_above(self.tilt(), fraction);
        self.lower + self.width() * s
    }
}

/// Piecewise-exponential maximum-entropy density over incomes at or above the
/// lowest threshold. Total mass equals the filer fractile `p_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntDensity {
    /// Pieces from the top bracket down.
    pieces: Vec<Piece>,
    /// `p_k` for each piece.
    top_fractiles: Vec<f64>,
    /// `S_k` for each piece, in threshold units.
    cum_incomes: Vec<f64>,
    population: u64,
    total_income: f64,
}

/// Builds the maximum-entropy density for `stats` on the given thresholds
/// `t_1 > ... > t_K` (one per bracket).
pub fn build_density(stats: &CumulativeStats, thresholds: &[f64]) -> Result<MaxEntDensity> {
    if thresholds.len() != stats.classes() {
        return Err(Error::InfeasibleOrdering(format!(
            "{} thresholds for {} brackets",
            thresholds.len(),
            stats.classes()
        )));
    }
    let mut upper = f64::INFINITY;
    let mut pieces = Vec::with_capacity(thresholds.len());
    for (b, &lower) in stats.brackets.iter().zip(thresholds) {
        if !(lower < upper) {
            return Err(Error::InfeasibleOrdering(format!(
                "threshold {lower} of bracket {} is not below {upper}",
                b.k
            )));
        }
        let piece = match b.mean {
            None => Piece {
                bracket: b.k,
                lower,
                upper,
                mass: 0.0,
                mean: f64::NAN,
                rate: 0.0,
            },
            Some(mean) => {
                let rate = solve_rate(lower, upper, mean).map_err(|e| match e {
                    Error::MeanOnBoundary {
                        lower, upper, mean, ..
                    } => Error::MeanOnBoundary {
                        bracket: Some(b.k),
                        lower,
                        upper,
                        mean,
                    },
                    other => other,
                })?;
                Piece {
                    bracket: b.k,
                    lower,
                    upper,
                    mass: b.mass,
                    mean,
                    rate,
                }
            }
        };
        pieces.push(piece);
        upper = lower;
    }
    Ok(MaxEntDensity {
        pieces,
        top_fractiles: stats.brackets.iter().map(|b| b.top_fractile).collect(),
        cum_incomes: stats.brackets.iter().map(|b| b.cum_income).collect(),
        population: stats.population,
        total_income: stats.total_income,
    })
}

/// Density on the tabulation's own thresholds.
pub fn build_observed_density(stats: &CumulativeStats) -> Result<MaxEntDensity> {
    build_density(stats, &stats.thresholds())
}

impl MaxEntDensity {
    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn population(&self) -> u64 {
        self.population
    }

    pub fn total_income(&self) -> f64 {
        self.total_income
    }

    /// Lowest threshold `t_K`, where the support starts.
    pub fn support_start(&self) -> f64 {
        self.pieces.last().map_or(f64::NAN, |p| p.lower)
    }

    /// `p_K`.
    pub fn total_mass(&self) -> f64 {
        self.top_fractiles.last().copied().unwrap_or(0.0)
    }

    fn piece_index_at(&self, y: f64) -> Option<usize> {
        // pieces are ordered by descending lower bound
        let i = self.pieces.partition_point(|p| p.lower > y);
        (i < self.pieces.len()).then_some(i)
    }

    fn fractile_above(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.top_fractiles[i - 1]
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.piece_index_at(y)
            .map_or(0.0, |i| self.pieces[i].pdf(y))
    }

    /// Mass at or above `y`.
    pub fn tail_mass(&self, y: f64) -> f64 {
        match self.piece_index_at(y) {
            None => self.total_mass(),
            Some(i) => self.fractile_above(i) + self.pieces[i].mass_above(y),
        }
    }

    /// Mass in `[t_K, y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match self.piece_index_at(y) {
            None => 0.0,
            Some(i) => {
                let below: f64 = self.pieces[i + 1..].iter().map(|p| p.mass).sum();
                below + self.pieces[i].mass_below(y)
            }
        }
    }

    fn check_fractile(&self, p: f64) -> Result<()> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidFractile { fractile: p });
        }
        let covered = self.total_mass();
        if p > covered {
            return Err(Error::FractileNotCovered {
                fractile: p,
                covered,
            });
        }
        Ok(())
    }

    /// Piece holding the fractile and the fraction of its mass above the cut.
    fn locate(&self, p: f64) -> (usize, f64) {
        let i = self
            .top_fractiles
            .partition_point(|&pk| pk < p)
            .min(self.pieces.len() - 1);
        let above = self.fractile_above(i);
        let mass = self.top_fractiles[i] - above;
        let fraction = if p >= self.top_fractiles[i] {
            1.0
        } else {
            (p - above) / mass
        };
        (i, fraction)
    }

    /// Income level with upper-tail mass `p`; `t_k` exactly when `p = p_k`.
    pub fn quantile_top(&self, p: f64) -> Result<f64> {
        self.check_fractile(p)?;
        let (i, fraction) = self.locate(p);
        Ok(self.pieces[i].point_with_fraction_above(fraction))
    }

    /// Total income of the top `p` fractile, in threshold units.
    pub fn top_income(&self, p: f64) -> Result<f64> {
        self.check_fractile(p)?;
        let (i, fraction) = self.locate(p);
        if fraction >= 1.0 {
            return Ok(self.cum_incomes[i]);
        }
        let above = if i == 0 { 0.0 } else { self.cum_incomes[i - 1] };
        let piece = &self.pieces[i];
        let cut = piece.point_with_fraction_above(fraction);
        let units = self.population as f64 * (p - self.fractile_above(i));
        Ok(above + units * piece.conditional_mean_above(cut))
    }

    /// Share estimate for the top `p` fractile.
    pub fn share_at(&self, p: f64) -> Result<ShareEstimate> {
        let threshold = self.quantile_top(p)?;
        let top_income = self.top_income(p)?;
        Ok(ShareEstimate {
            fractile: p,
            threshold,
            top_income,
            share: top_income / self.total_income,
            method: Method::Me,
            bracket: None,
            extrapolated: p < self.top_fractiles[0],
        })
    }

    /// Largest relative violation of the per-piece mass and mean conditions,
    /// computed from the pieces' closed forms.
    pub fn moment_residual(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.mass > 0.0)
            .map(|p| {
                let mass = p.mass_above(p.lower);
                let mean = p.conditional_mean_above(p.lower);
                ((mass - p.mass) / p.mass)
                    .abs()
                    .max(((mean - p.mean) / p.mean).abs())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabulation::{cumulate, IncomeBracket, Tabulation};

    fn two_uniform() -> CumulativeStats {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(20.0, 10, 300.0),
                IncomeBracket::new(10.0, 30, 450.0),
            ],
            100,
            1000.0,
            1.0,
        );
        cumulate(&tab).unwrap()
    }

    #[test]
    fn midpoint_means_give_uniform_bottom_piece() {
        let d = build_observed_density(&two_uniform()).unwrap();
        let bottom = d.pieces()[1];
        assert_eq!(bottom.rate, 0.0);
        assert!((d.pdf(12.0) - 0.03).abs() < 1e-15);
        assert!((d.pdf(19.0) - 0.03).abs() < 1e-15);
        // top piece: mean 30 over threshold 20 gives rate -1/10
        assert!((d.pieces()[0].rate + 0.1).abs() < 1e-15);
    }

    #[test]
    fn quantiles_at_bracket_edges() {
        let d = build_observed_density(&two_uniform()).unwrap();
        assert_eq!(d.quantile_top(0.1).unwrap(), 20.0);
        assert_eq!(d.quantile_top(0.4).unwrap(), 10.0);
        // half of the uniform bottom piece
        assert!((d.quantile_top(0.25).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_edges() {
        let d = build_observed_density(&two_uniform()).unwrap();
        assert_eq!(d.cdf(10.0), 0.0);
        assert!((d.cdf(f64::INFINITY) - 0.4).abs() < 1e-15);
        assert!((d.cdf(1e9) - 0.4).abs() < 1e-15);
        assert_eq!(d.cdf(5.0), 0.0);
    }

    #[test]
    fn top_income_is_exact_at_edges() {
        let d = build_observed_density(&two_uniform()).unwrap();
        assert_eq!(d.top_income(0.1).unwrap(), 300.0);
        assert_eq!(d.top_income(0.4).unwrap(), 750.0);
        // top 25%: top bracket plus the upper half of the uniform piece
        assert!((d.top_income(0.25).unwrap() - (300.0 + 15.0 * 17.5)).abs() < 1e-9);
    }

    #[test]
    fn uncovered_fractile() {
        let d = build_observed_density(&two_uniform()).unwrap();
        assert!(matches!(
            d.quantile_top(0.5),
            Err(Error::FractileNotCovered { .. })
        ));
    }

    #[test]
    fn boundary_mean_reports_bracket() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(20.0, 10, 300.0),
                IncomeBracket::new(10.0, 30, 300.0),
            ],
            100,
            1000.0,
            1.0,
        );
        let err = build_observed_density(&cumulate(&tab).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::MeanOnBoundary {
                bracket: Some(2),
                ..
            }
        ));
    }

    #[test]
    fn empty_bracket_is_skipped() {
        let tab = Tabulation::new(
            1,
            vec![
                IncomeBracket::new(30.0, 10, 400.0),
                IncomeBracket::new(20.0, 0, 0.0),
                IncomeBracket::new(10.0, 30, 450.0),
            ],
            100,
            1000.0,
            1.0,
        );
        let d = build_observed_density(&cumulate(&tab).unwrap()).unwrap();
        assert_eq!(d.pdf(25.0), 0.0);
        assert_eq!(d.quantile_top(0.1).unwrap(), 30.0);
        assert!((d.quantile_top(0.25).unwrap() - 15.0).abs() < 1e-12);
        assert!((d.tail_mass(20.0) - 0.1).abs() < 1e-15);
    }
}
