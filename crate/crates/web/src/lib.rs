//! Browser bindings for the estimators.
//!
//! Each export takes plain numbers or CSV text and returns a JSON string,
//! so the page needs no generated glue types.

use serde::Serialize;
use topshares::io::{read_tabulations, ColumnMapping};
use topshares::maxent::{build_observed_density, kernel, solve_rate, MaxEntDensity};
use topshares::microbench::{stratified_population, IncomeDistribution, ThresholdScheme};
use topshares::pareto::share_from_stats;
use topshares::{cumulate, CumulativeStats};
use wasm_bindgen::prelude::*;

const CURVE_POINTS: usize = 240;

#[derive(Debug, Serialize)]
struct CurvePoint {
    income: f64,
    density: f64,
}

#[derive(Debug, Serialize)]
struct ShareComparison {
    fractile: f64,
    oracle: f64,
    pi: Option<f64>,
    me: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BracketView {
    threshold: f64,
    top_fractile: f64,
    mean: Option<f64>,
    rate: f64,
}

#[derive(Debug, Serialize)]
struct SyntheticFit {
    brackets: Vec<BracketView>,
    curve: Vec<CurvePoint>,
    truth: Vec<CurvePoint>,
    shares: Vec<ShareComparison>,
}

#[derive(Debug, Serialize)]
struct YearShares {
    year: i32,
    error: Option<String>,
    rows: Vec<ShareRow>,
}

#[derive(Debug, Serialize)]
struct ShareRow {
    fractile: f64,
    pi: Option<f64>,
    me: Option<f64>,
    note: Option<String>,
}

#[derive(Debug, Serialize)]
struct PieceView {
    rate: f64,
    tilt: f64,
    curve: Vec<CurvePoint>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn parse_fractiles(text: &str) -> Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|p| *p > 0.0 && *p < 1.0)
                .ok_or_else(|| format!("bad fractile {s:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("no fractiles given".into());
    }
    Ok(values)
}

/// Log-spaced incomes from `lo` to `hi`.
fn log_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..CURVE_POINTS).map(move |i| (a + (b - a) * i as f64 / (CURVE_POINTS - 1) as f64).exp())
}

fn density_curve(d: &MaxEntDensity, lo: f64, hi: f64) -> Vec<CurvePoint> {
    log_grid(lo, hi)
        .map(|y| CurvePoint {
            income: y,
            density: d.pdf(y),
        })
        .collect()
}

fn truth_curve(dist: &IncomeDistribution, lo: f64, hi: f64) -> Vec<CurvePoint> {
    log_grid(lo, hi)
        .map(|y| {
            let h = 1e-4 * y;
            CurvePoint {
                income: y,
                density: (dist.cdf(y + h) - dist.cdf(y - h)) / (2.0 * h),
            }
        })
        .collect()
}

fn shares_at(stats: &CumulativeStats, d: &MaxEntDensity, p: f64) -> (Option<f64>, Option<f64>) {
    let pi = share_from_stats(stats, p).ok().map(|e| e.share);
    let me = d.share_at(p).ok().map(|e| e.share);
    (pi, me)
}

/// Tabulates a synthetic population on `classes` geometric brackets and fits
/// both estimators.
///
/// `family` is `"pareto"` (with `shape` the exponent) or `"lognormal"`
/// (with `shape` the log-scale standard deviation).
pub fn fit_synthetic(
    family: &str,
    shape: f64,
    classes: usize,
    fractiles: &str,
) -> Result<String, String> {
    let dist = match family {
        "pareto" => IncomeDistribution::pareto(shape, 10_000.0),
        "lognormal" => IncomeDistribution::lognormal(10.0, shape),
        other => return Err(format!("unknown family {other:?}")),
    };
    dist.validate().map_err(|e| e.to_string())?;
    let fractiles = parse_fractiles(fractiles)?;
    let sample = stratified_population(&dist, 200_000).map_err(|e| e.to_string())?;
    let thresholds = ThresholdScheme::Geometric {
        lowest_top_fractile: 0.5,
        highest_top_fractile: 1e-4,
    }
    .sample_thresholds(&sample, classes)
    .map_err(|e| e.to_string())?;
    let tab = sample.tabulate(&thresholds).map_err(|e| e.to_string())?;
    let stats = cumulate(&tab).map_err(|e| e.to_string())?;
    let density = build_observed_density(&stats).map_err(|e| e.to_string())?;

    let lo = *thresholds.last().expect("at least two brackets");
    let hi = dist.top_threshold(1e-5);
    let shares = fractiles
        .iter()
        .map(|&p| {
            let (pi, me) = shares_at(&stats, &density, p);
            Ok(ShareComparison {
                fractile: p,
                oracle: sample.oracle_share(p).map_err(|e| e.to_string())?,
                pi,
                me,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let brackets = stats
        .brackets
        .iter()
        .zip(density.pieces())
        .map(|(b, piece)| BracketView {
            threshold: b.threshold,
            top_fractile: b.top_fractile,
            mean: b.mean,
            rate: piece.rate,
        })
        .collect();
    to_json(&SyntheticFit {
        brackets,
        curve: density_curve(&density, lo, hi),
        truth: truth_curve(&dist, lo, hi),
        shares,
    })
}

/// Estimates shares for every year in pasted bracket and denominator CSV text.
pub fn estimate_csv(brackets: &str, denominators: &str, fractiles: &str) -> Result<String, String> {
    let fractiles = parse_fractiles(fractiles)?;
    let tabs = read_tabulations(
        brackets.as_bytes(),
        denominators.as_bytes(),
        &ColumnMapping::default(),
    )
    .map_err(|e| e.to_string())?;
    let years: Vec<YearShares> = tabs
        .iter()
        .map(|tab| {
            let fitted = tab
                .ensure_valid()
                .and_then(|_| cumulate(tab))
                .and_then(|s| build_observed_density(&s).map(|d| (s, d)));
            match fitted {
                Ok((stats, density)) => YearShares {
                    year: tab.year(),
                    error: None,
                    rows: fractiles
                        .iter()
                        .map(|&p| {
                            let (pi, me) = shares_at(&stats, &density, p);
                            let note = (p > stats.covered_fractile())
                                .then(|| "below the lowest threshold".to_string());
                            ShareRow {
                                fractile: p,
                                pi,
                                me,
                                note,
                            }
                        })
                        .collect(),
                },
                Err(e) => YearShares {
                    year: tab.year(),
                    error: Some(e.to_string()),
                    rows: Vec::new(),
                },
            }
        })
        .collect();
    to_json(&years)
}

/// Maximum-entropy density of one bracket `[lower, upper)` with the given mean.
pub fn piece_rate(lower: f64, upper: f64, mean: f64) -> Result<String, String> {
    let rate = solve_rate(lower, upper, mean).map_err(|e| e.to_string())?;
    let width = upper - lower;
    let tilt = rate * width;
    let curve = (0..CURVE_POINTS)
        .map(|i| {
            let s = i as f64 / (CURVE_POINTS - 1) as f64;
            CurvePoint {
                income: lower + s * width,
                density: kernel::density(tilt, s) / width,
            }
        })
        .collect();
    to_json(&PieceView { rate, tilt, curve })
}

#[wasm_bindgen(js_name = fitSynthetic)]
pub fn fit_synthetic_js(
    family: &str,
    shape: f64,
    classes: usize,
    fractiles: &str,
) -> Result<String, JsError> {
    fit_synthetic(family, shape, classes, fractiles).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = estimateCsv)]
pub fn estimate_csv_js(
    brackets: &str,
    denominators: &str,
    fractiles: &str,
) -> Result<String, JsError> {
    estimate_csv(brackets, denominators, fractiles).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pieceRate)]
pub fn piece_rate_js(lower: f64, upper: f64, mean: f64) -> Result<String, JsError> {
    piece_rate(lower, upper, mean).map_err(|e| JsError::new(&e))
}
