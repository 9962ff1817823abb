use std::fs::File;
use std::io::Write;

use anyhow::{Context, Result};
use serde::Serialize;
use topshares::io::read_micro_sample;
use topshares::microbench::{
    evaluate_sample, run_protocol, BenchmarkSpec, ErrorCell, ErrorReport, ThresholdScheme,
};
use topshares::Method;

use crate::output::{
    fractile_label, open_output, parse_classes, parse_fractiles, write_csv, write_json,
    write_table, Format,
};
use crate::{CompareArgs, Outcome, OutputArgs, SynthArgs};

#[derive(Debug, Serialize)]
struct MseCsvRow {
    classes: usize,
    fractile: f64,
    label: String,
    method: Method,
    trials: usize,
    missing: usize,
    mse_relative: Option<f64>,
    mse_level: Option<f64>,
    mse_pp: Option<f64>,
}

#[derive(Debug, Serialize)]
struct CellCsvRow {
    trial: usize,
    classes: usize,
    fractile: f64,
    label: String,
    method: Method,
    oracle: f64,
    estimate: Option<f64>,
    relative_error: Option<f64>,
    failure: String,
}

impl From<&ErrorCell> for CellCsvRow {
    fn from(c: &ErrorCell) -> Self {
        Self {
            trial: c.trial,
            classes: c.classes,
            fractile: c.fractile,
            label: fractile_label(c.fractile),
            method: c.method,
            oracle: c.oracle,
            estimate: c.estimate,
            relative_error: c.relative_error,
            failure: c.failure.clone().unwrap_or_default(),
        }
    }
}

fn load_spec(args: &SynthArgs) -> Result<BenchmarkSpec> {
    let mut spec = match &args.spec {
        Some(path) => {
            let file =
                File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            serde_json::from_reader(file)
                .with_context(|| format!("cannot parse {}", path.display()))?
        }
        None => BenchmarkSpec::default(),
    };
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if let Some(c) = &args.classes {
        spec.classes = parse_classes(c)?;
    }
    if let Some(f) = &args.fractiles {
        spec.fractiles = parse_fractiles(f)?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Method-by-fractile grid of one statistic per bracket count.
fn write_grid(
    out: &mut dyn Write,
    classes: &[usize],
    fractiles: &[f64],
    value: impl Fn(usize, f64, Method) -> Option<String>,
) -> Result<()> {
    let columns: Vec<String> = fractiles.iter().map(|&p| fractile_label(p)).collect();
    for (i, &k) in classes.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        let rows: Vec<(String, Vec<Option<String>>)> = [Method::Me, Method::Pi]
            .iter()
            .map(|&m| {
                let cells = fractiles.iter().map(|&p| value(k, p, m)).collect();
                (m.as_str().to_uppercase(), cells)
            })
            .collect();
        write_table(out, &format!("K={k}"), &columns, &rows)?;
    }
    Ok(())
}

fn outcome(missing: bool) -> Outcome {
    if missing {
        Outcome::Partial
    } else {
        Outcome::Complete
    }
}

fn write_report(
    output: &OutputArgs,
    report: &ErrorReport,
    classes: &[usize],
    fractiles: &[f64],
) -> Result<()> {
    let mut out = open_output(output.out.as_deref())?;
    match output.format {
        Format::Json => write_json(&mut out, report)?,
        Format::Csv => {
            let rows: Vec<MseCsvRow> = report
                .mse
                .iter()
                .map(|r| MseCsvRow {
                    classes: r.classes,
                    fractile: r.fractile,
                    label: fractile_label(r.fractile),
                    method: r.method,
                    trials: r.trials,
                    missing: r.missing,
                    mse_relative: r.mse_relative,
                    mse_level: r.mse_level,
                    mse_pp: r.mse_pp,
                })
                .collect();
            write_csv(&mut out, &rows)?;
        }
        Format::Table => write_grid(&mut out, classes, fractiles, |k, p, m| {
            report
                .row(k, p, m)
                .and_then(|r| r.mse_relative)
                .map(|v| format!("{v:.6}"))
        })?,
    }
    out.flush()?;
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<Outcome> {
    let spec = load_spec(args)?;
    let report = run_protocol(&spec)?;
    write_report(&args.output, &report, &spec.classes, &spec.fractiles)?;
    let missing = report.cells.iter().filter(|c| c.estimate.is_none()).count();
    if missing > 0 {
        eprintln!("{missing} estimates failed; see the report for details");
    }
    Ok(outcome(missing > 0))
}

pub fn compare(args: &CompareArgs) -> Result<Outcome> {
    let classes = parse_classes(&args.classes)?;
    let fractiles = parse_fractiles(&args.fractiles)?;
    let file =
        File::open(&args.micro).with_context(|| format!("cannot open {}", args.micro.display()))?;
    let sample = read_micro_sample(file, args.nonfilers)
        .with_context(|| format!("cannot read {}", args.micro.display()))?;
    let cells = evaluate_sample(
        &sample,
        0,
        &classes,
        &fractiles,
        &ThresholdScheme::default(),
    )?;

    let mut out = open_output(args.output.out.as_deref())?;
    match args.output.format {
        Format::Json => write_json(&mut out, &cells)?,
        Format::Csv => {
            let rows: Vec<CellCsvRow> = cells.iter().map(CellCsvRow::from).collect();
            write_csv(&mut out, &rows)?;
        }
        Format::Table => write_grid(&mut out, &classes, &fractiles, |k, p, m| {
            cells
                .iter()
                .find(|c| c.classes == k && c.fractile == p && c.method == m)
                .and_then(|c| c.relative_error)
                .map(|v| format!("{v:.6}"))
        })?,
    }
    out.flush()?;
    let missing = cells.iter().filter(|c| c.estimate.is_none()).count();
    for c in cells.iter().filter(|c| c.estimate.is_none()) {
        eprintln!(
            "K={} {} {}: {}",
            c.classes,
            fractile_label(c.fractile),
            c.method,
            c.failure.as_deref().unwrap_or("")
        );
    }
    Ok(outcome(missing > 0))
}
