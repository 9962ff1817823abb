use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;

pub const DEFAULT_FRACTILES: &str = "0.1,0.05,0.01,0.005,0.001,0.0001";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    /// LaTeX-style rows: `Year & P90-100 & ... \\`.
    Table,
}

pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn parse_fractiles(raw: &str) -> Result<Vec<f64>> {
    let values = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .with_context(|| format!("bad fractile `{s}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("fractile list is empty");
    }
    for &p in &values {
        if !(p > 0.0 && p < 1.0) {
            bail!("fractile {p} is outside (0, 1)");
        }
    }
    if values.windows(2).any(|w| w[0] <= w[1]) {
        bail!("fractiles must be strictly decreasing");
    }
    Ok(values)
}

pub fn parse_classes(raw: &str) -> Result<Vec<usize>> {
    let values = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .with_context(|| format!("bad bracket count `{s}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("bracket count list is empty");
    }
    if let Some(k) = values.iter().find(|&&k| k < 2) {
        bail!("bracket count {k} is below 2");
    }
    Ok(values)
}

/// `P90-100` style column label for top fractile `p`.
pub fn fractile_label(p: f64) -> String {
    let lower = format!("{:.6}", 100.0 * (1.0 - p));
    let lower = lower.trim_end_matches('0').trim_end_matches('.');
    format!("P{lower}-100")
}

pub fn percent(share: f64) -> String {
    format!("{:.2}", 100.0 * share)
}

pub fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// One `first & c1 & c2 ... \\` row per entry, missing cells as `-`.
pub fn write_table(
    out: &mut dyn Write,
    corner: &str,
    columns: &[String],
    rows: &[(String, Vec<Option<String>>)],
) -> Result<()> {
    writeln!(out, "{corner} & {} \\\\", columns.join(" & "))?;
    for (name, cells) in rows {
        let cells: Vec<&str> = cells.iter().map(|c| c.as_deref().unwrap_or("-")).collect();
        writeln!(out, "{name} & {} \\\\", cells.join(" & "))?;
    }
    Ok(())
}
