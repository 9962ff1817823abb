use std::fs::File;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use topshares::io::{read_tabulations, ColumnMapping};
use topshares::maxent::build_observed_density;
use topshares::pareto::{nearest_bracket, share_from_stats};
use topshares::{cumulate, Error, Method, ShareEstimate, Tabulation};

use crate::output::{
    fractile_label, open_output, parse_fractiles, percent, write_csv, write_json, write_table,
    Format,
};
use crate::{DiagnosticsArgs, EstimateArgs, MethodChoice, Outcome, TabulationInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Status {
    Ok,
    /// Fractile lies below the lowest tabulated threshold's coverage.
    NotCovered,
    /// Pareto interpolation above the top bracket, withheld by default.
    Extrapolated,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
struct ShareRow {
    year: i32,
    fractile: f64,
    label: String,
    method: Method,
    share_pct: String,
    share: Option<f64>,
    threshold: Option<f64>,
    top_income: Option<f64>,
    bracket: Option<usize>,
    extrapolated: bool,
    status: Status,
    message: String,
}

impl ShareRow {
    fn empty(year: i32, fractile: f64, method: Method, status: Status, message: String) -> Self {
        Self {
            year,
            fractile,
            label: fractile_label(fractile),
            method,
            share_pct: "-".into(),
            share: None,
            threshold: None,
            top_income: None,
            bracket: None,
            extrapolated: false,
            status,
            message,
        }
    }

    fn from_estimate(year: i32, est: &ShareEstimate) -> Self {
        Self {
            year,
            fractile: est.fractile,
            label: fractile_label(est.fractile),
            method: est.method,
            share_pct: percent(est.share),
            share: Some(est.share),
            threshold: Some(est.threshold),
            top_income: Some(est.top_income),
            bracket: est.bracket,
            extrapolated: est.extrapolated,
            status: Status::Ok,
            message: String::new(),
        }
    }

    fn from_result(
        year: i32,
        fractile: f64,
        method: Method,
        result: Result<ShareEstimate, String>,
        allow_extrapolation: bool,
    ) -> Self {
        match result {
            Ok(est) if est.extrapolated && method == Method::Pi && !allow_extrapolation => {
                Self::empty(
                    year,
                    fractile,
                    method,
                    Status::Extrapolated,
                    "above the highest tabulated bracket".into(),
                )
            }
            Ok(est) => Self::from_estimate(year, &est),
            Err(message) => Self::empty(year, fractile, method, Status::Failed, message),
        }
    }
}

fn load(input: &TabulationInput) -> Result<Vec<Tabulation>> {
    let brackets = File::open(&input.input)
        .with_context(|| format!("cannot open {}", input.input.display()))?;
    let denominators = File::open(&input.denominators)
        .with_context(|| format!("cannot open {}", input.denominators.display()))?;
    let tabs = read_tabulations(brackets, denominators, &ColumnMapping::default())
        .with_context(|| format!("cannot read {}", input.input.display()))?;
    if tabs.is_empty() {
        bail!("{} holds no brackets", input.input.display());
    }
    Ok(tabs)
}

fn methods(choice: MethodChoice) -> Vec<Method> {
    match choice {
        MethodChoice::Pi => vec![Method::Pi],
        MethodChoice::Me => vec![Method::Me],
        MethodChoice::Both => vec![Method::Pi, Method::Me],
    }
}

fn not_covered(e: &Error) -> bool {
    matches!(e, Error::FractileNotCovered { .. })
}

fn year_rows(
    tab: &Tabulation,
    fractiles: &[f64],
    methods: &[Method],
    allow_extrapolation: bool,
) -> Vec<ShareRow> {
    let year = tab.year();
    let stats = tab.ensure_valid().and_then(|_| cumulate(tab));
    let mut rows = Vec::with_capacity(fractiles.len() * methods.len());
    let density = match (&stats, methods.contains(&Method::Me)) {
        (Ok(stats), true) => Some(build_observed_density(stats).map_err(|e| e.to_string())),
        _ => None,
    };
    for &p in fractiles {
        for &method in methods {
            let stats = match &stats {
                Ok(s) => s,
                Err(e) => {
                    rows.push(ShareRow::empty(
                        year,
                        p,
                        method,
                        Status::Failed,
                        e.to_string(),
                    ));
                    continue;
                }
            };
            let result = match method {
                Method::Pi => share_from_stats(stats, p),
                Method::Me => match density.as_ref().expect("built when requested") {
                    Ok(d) => d.share_at(p),
                    Err(msg) => {
                        rows.push(ShareRow::empty(
                            year,
                            p,
                            method,
                            Status::Failed,
                            msg.clone(),
                        ));
                        continue;
                    }
                },
            };
            let row = match result {
                Err(e) if not_covered(&e) => {
                    ShareRow::empty(year, p, method, Status::NotCovered, e.to_string())
                }
                r => ShareRow::from_result(
                    year,
                    p,
                    method,
                    r.map_err(|e| e.to_string()),
                    allow_extrapolation,
                ),
            };
            rows.push(row);
        }
    }
    rows
}

fn write_share_table(
    out: &mut dyn std::io::Write,
    rows: &[ShareRow],
    fractiles: &[f64],
    methods: &[Method],
) -> Result<()> {
    let columns: Vec<String> = fractiles.iter().map(|&p| fractile_label(p)).collect();
    for (i, &method) in methods.iter().enumerate() {
        if methods.len() > 1 {
            if i > 0 {
                writeln!(out)?;
            }
            writeln!(out, "% {}", method.as_str())?;
        }
        let mut years: Vec<i32> = rows.iter().map(|r| r.year).collect();
        years.dedup();
        let table: Vec<(String, Vec<Option<String>>)> = years
            .iter()
            .map(|&y| {
                let cells = fractiles
                    .iter()
                    .map(|&p| {
                        rows.iter()
                            .find(|r| r.year == y && r.fractile == p && r.method == method)
                            .and_then(|r| r.share.map(|_| r.share_pct.clone()))
                    })
                    .collect();
                (y.to_string(), cells)
            })
            .collect();
        write_table(out, "Year", &columns, &table)?;
    }
    Ok(())
}

pub fn estimate(args: &EstimateArgs) -> Result<Outcome> {
    let fractiles = parse_fractiles(&args.fractiles)?;
    let methods = methods(args.method);
    let tabs = load(&args.input)?;
    let rows: Vec<ShareRow> = tabs
        .par_iter()
        .map(|tab| year_rows(tab, &fractiles, &methods, args.allow_extrapolation))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut out = open_output(args.output.out.as_deref())?;
    match args.output.format {
        Format::Csv => write_csv(&mut out, &rows)?,
        Format::Json => write_json(&mut out, &rows)?,
        Format::Table => write_share_table(&mut out, &rows, &fractiles, &methods)?,
    }
    out.flush()?;

    let failed: Vec<&ShareRow> = rows.iter().filter(|r| r.status == Status::Failed).collect();
    for r in &failed {
        eprintln!("{} {} {}: {}", r.year, r.label, r.method, r.message);
    }
    Ok(if failed.is_empty() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}

#[derive(Debug, Clone, Serialize)]
struct DiagnosticRow {
    year: i32,
    classes: usize,
    fractile: f64,
    label: String,
    bracket: Option<usize>,
    top_fractile: Option<f64>,
    /// `100 (p_k - p)`.
    distance_pp: Option<f64>,
    status: Status,
    message: String,
}

fn year_diagnostics(tab: &Tabulation, fractiles: &[f64]) -> Vec<DiagnosticRow> {
    let stats = tab.ensure_valid().and_then(|_| cumulate(tab));
    fractiles
        .iter()
        .map(|&p| {
            let mut row = DiagnosticRow {
                year: tab.year(),
                classes: tab.classes(),
                fractile: p,
                label: fractile_label(p),
                bracket: None,
                top_fractile: None,
                distance_pp: None,
                status: Status::Ok,
                message: String::new(),
            };
            match stats.as_ref().map(|s| (s, nearest_bracket(s, p))) {
                Ok((s, Ok(k))) => {
                    let pk = s.bracket(k).top_fractile;
                    row.bracket = Some(k);
                    row.top_fractile = Some(pk);
                    row.distance_pp = Some(100.0 * (pk - p));
                }
                Ok((_, Err(e))) => {
                    row.status = if not_covered(&e) {
                        Status::NotCovered
                    } else {
                        Status::Failed
                    };
                    row.message = e.to_string();
                }
                Err(e) => {
                    row.status = Status::Failed;
                    row.message = e.to_string();
                }
            }
            row
        })
        .collect()
}

pub fn diagnostics(args: &DiagnosticsArgs) -> Result<Outcome> {
    let fractiles = parse_fractiles(&args.fractiles)?;
    if args.output.format == Format::Table {
        bail!("diagnostics are written as csv or json");
    }
    let tabs = load(&args.input)?;
    let rows: Vec<DiagnosticRow> = tabs
        .par_iter()
        .map(|tab| year_diagnostics(tab, &fractiles))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let mut out = open_output(args.output.out.as_deref())?;
    match args.output.format {
        Format::Json => write_json(&mut out, &rows)?,
        _ => write_csv(&mut out, &rows)?,
    }
    out.flush()?;
    let failed = rows.iter().filter(|r| r.status == Status::Failed).count();
    for r in rows.iter().filter(|r| r.status == Status::Failed) {
        eprintln!("{} {}: {}", r.year, r.label, r.message);
    }
    Ok(if failed == 0 {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}
