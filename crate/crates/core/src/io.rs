//! CSV ingestion and serialization.
//!
//! Bracket file: `year,lower_threshold,returns,income_sum`.
//! Denominator file: `year,population,total_income,income_unit`.
//! Micro-sample file: `income,weight`.
//!
//! Decimal point is `.`, no thousands separators, blank lines are skipped.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use csv::{ReaderBuilder, StringRecord, Trim};

use crate::error::{Error, Result};
use crate::microbench::MicroSample;
use crate::tabulation::{IncomeBracket, Tabulation};

/// Header names of the bracket file columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub year: String,
    pub lower_threshold: String,
    pub returns: String,
    pub income_sum: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            year: "year".into(),
            lower_threshold: "lower_threshold".into(),
            returns: "returns".into(),
            income_sum: "income_sum".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Denominator {
    population: u64,
    total_income: f64,
    income_unit: f64,
}

fn reader<R: Read>(raw: R) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(true)
        .trim(Trim::All)
        .comment(Some(b'#'))
        .from_reader(raw)
}

fn column(headers: &StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn field<'r>(record: &'r StringRecord, idx: usize, name: &str) -> Result<&'r str> {
    record.get(idx).ok_or_else(|| Error::Parse {
        line: line_of(record),
        message: format!("missing field `{name}`"),
    })
}

fn parse_f64(record: &StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = field(record, idx, name)?;
    let value: f64 = raw.parse().map_err(|_| Error::Parse {
        line: line_of(record),
        message: format!("`{name}` is not a number: {raw:?}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line: line_of(record),
            message: format!("`{name}` is not finite: {raw:?}"),
        });
    }
    Ok(value)
}

fn parse_nonnegative(record: &StringRecord, idx: usize, name: &str) -> Result<f64> {
    let value = parse_f64(record, idx, name)?;
    if value < 0.0 {
        return Err(Error::Parse {
            line: line_of(record),
            message: format!("`{name}` is negative: {value}"),
        });
    }
    Ok(value)
}

fn parse_count(record: &StringRecord, idx: usize, name: &str) -> Result<u64> {
    let raw = field(record, idx, name)?;
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let message = match raw.parse::<f64>() {
        Ok(v) if v < 0.0 => format!("`{name}` is negative: {raw}"),
        Ok(_) => format!("`{name}` must be a whole number: {raw}"),
        Err(_) => format!("`{name}` is not a number: {raw:?}"),
    };
    Err(Error::Parse {
        line: line_of(record),
        message,
    })
}

fn parse_year(record: &StringRecord, idx: usize) -> Result<i32> {
    let raw = field(record, idx, "year")?;
    raw.parse().map_err(|_| Error::Parse {
        line: line_of(record),
        message: format!("`year` is not an integer: {raw:?}"),
    })
}

fn parse_denominators<R: Read>(raw: R) -> Result<BTreeMap<i32, Denominator>> {
    let mut rdr = reader(raw);
    let headers = rdr.headers()?.clone();
    let year = column(&headers, "year")?;
    let population = column(&headers, "population")?;
    let total_income = column(&headers, "total_income")?;
    let income_unit = column(&headers, "income_unit")?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let y = parse_year(&record, year)?;
        let den = Denominator {
            population: parse_count(&record, population, "population")?,
            total_income: parse_nonnegative(&record, total_income, "total_income")?,
            income_unit: parse_nonnegative(&record, income_unit, "income_unit")?,
        };
        if out.insert(y, den).is_some() {
            return Err(Error::DuplicateYear { year: y });
        }
    }
    Ok(out)
}

/// Reads every year in a bracket file, attaching denominators from the sidecar file.
///
/// Years are returned in ascending order; each tabulation is validated.
/// Bracket rows may come in any threshold order.
pub fn parse_tabulations<B: Read, D: Read>(
    brackets: B,
    denominators: D,
    schema: &ColumnMapping,
) -> Result<Vec<Tabulation>> {
    let tabs = read_tabulations(brackets, denominators, schema)?;
    for tab in &tabs {
        tab.ensure_valid()?;
    }
    Ok(tabs)
}

/// Like [`parse_tabulations`] but leaves validation to the caller, so one
/// bad year does not hide the others.
pub fn read_tabulations<B: Read, D: Read>(
    brackets: B,
    denominators: D,
    schema: &ColumnMapping,
) -> Result<Vec<Tabulation>> {
    let denominators = parse_denominators(denominators)?;
    let mut rdr = reader(brackets);
    let headers = rdr.headers()?.clone();
    let year = column(&headers, &schema.year)?;
    let threshold = column(&headers, &schema.lower_threshold)?;
    let returns = column(&headers, &schema.returns)?;
    let income = column(&headers, &schema.income_sum)?;

    let mut by_year: BTreeMap<i32, Vec<IncomeBracket>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let y = parse_year(&record, year)?;
        let bracket = IncomeBracket {
            lower_threshold: parse_nonnegative(&record, threshold, &schema.lower_threshold)?,
            count: parse_count(&record, returns, &schema.returns)?,
            income_sum: parse_nonnegative(&record, income, &schema.income_sum)?,
        };
        by_year.entry(y).or_default().push(bracket);
    }

    by_year
        .into_iter()
        .map(|(y, brackets)| {
            let den = denominators
                .get(&y)
                .ok_or(Error::MissingDenominator { year: y })?;
            Ok(Tabulation::new(
                y,
                brackets,
                den.population,
                den.total_income,
                den.income_unit,
            ))
        })
        .collect()
}

/// Parses a single-year bracket file; fails if the file holds several years.
pub fn parse_tabulation<B: Read, D: Read>(
    brackets: B,
    denominators: D,
    schema: &ColumnMapping,
) -> Result<Tabulation> {
    let mut tabs = parse_tabulations(brackets, denominators, schema)?;
    match tabs.len() {
        1 => Ok(tabs.remove(0)),
        n => Err(Error::Parse {
            line: 0,
            message: format!("expected one year, found {n}"),
        }),
    }
}

/// Writes tabulations back out in the bracket and denominator formats.
///
/// Floats use the shortest representation that parses back to the same value.
pub fn write_tabulations<B: Write, D: Write>(
    tabs: &[Tabulation],
    brackets: B,
    denominators: D,
) -> Result<()> {
    let mut bw = csv::Writer::from_writer(brackets);
    bw.write_record(["year", "lower_threshold", "returns", "income_sum"])?;
    let mut dw = csv::Writer::from_writer(denominators);
    dw.write_record(["year", "population", "total_income", "income_unit"])?;
    for tab in tabs {
        for b in tab.brackets() {
            bw.write_record([
                tab.year().to_string(),
                b.lower_threshold.to_string(),
                b.count.to_string(),
                b.income_sum.to_string(),
            ])?;
        }
        dw.write_record([
            tab.year().to_string(),
            tab.population().to_string(),
            tab.total_income().to_string(),
            tab.income_unit().to_string(),
        ])?;
    }
    bw.flush()?;
    dw.flush()?;
    Ok(())
}

/// Reads a micro-sample file with `income,weight` columns.
///
/// Weights are positive whole-number replication factors.
pub fn read_micro_sample<R: Read>(raw: R, nonfilers: u64) -> Result<MicroSample> {
    let mut rdr = reader(raw);
    let headers = rdr.headers()?.clone();
    let income = column(&headers, "income")?;
    let weight = column(&headers, "weight")?;
    let mut units = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let x = parse_nonnegative(&record, income, "income")?;
        let w = parse_count(&record, weight, "weight")?;
        if w == 0 {
            return Err(Error::Parse {
                line: line_of(&record),
                message: "`weight` must be positive".into(),
            });
        }
        units.push((x, w));
    }
    MicroSample::weighted(units, nonfilers)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEN: &str = "year,population,total_income,income_unit\n2000,100,5000,1\n";

    #[test]
    fn three_bracket_csv() {
        let raw = "year,lower_threshold,returns,income_sum\n\
                   2000,100,2,400\n\
                   2000,50,5,350\n\
                   \n\
                   2000,10,20,500\n";
        let tab =
            parse_tabulation(raw.as_bytes(), DEN.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(tab.classes(), 3);
        assert_eq!(tab.population(), 100);
        assert_eq!(tab.thresholds(), vec![100.0, 50.0, 10.0]);
    }

    #[test]
    fn ascending_input_is_reordered() {
        let raw = "year,lower_threshold,returns,income_sum\n\
                   2000,10,20,500\n2000,50,5,350\n2000,100,2,400\n";
        let tab =
            parse_tabulation(raw.as_bytes(), DEN.as_bytes(), &ColumnMapping::default()).unwrap();
        assert_eq!(tab.thresholds(), vec![100.0, 50.0, 10.0]);
        assert_eq!(tab.brackets()[0].count, 2);
    }

    #[test]
    fn negative_count_names_its_line() {
        let raw = "year,lower_threshold,returns,income_sum\n2000,100,2,400\n2000,50,-5,350\n";
        let err = parse_tabulation(raw.as_bytes(), DEN.as_bytes(), &ColumnMapping::default())
            .unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("negative"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_denominator_and_duplicate_year() {
        let raw = "year,lower_threshold,returns,income_sum\n2001,100,2,400\n2001,50,5,350\n";
        let err = parse_tabulations(raw.as_bytes(), DEN.as_bytes(), &ColumnMapping::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingDenominator { year: 2001 }));

        let den = "year,population,total_income,income_unit\n2001,1,1,1\n2001,2,2,1\n";
        let err = parse_tabulations(raw.as_bytes(), den.as_bytes(), &ColumnMapping::default())
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateYear { year: 2001 }));
    }

    #[test]
    fn custom_schema() {
        let raw = "yr,t,n,s\n2000,100,2,400\n2000,50,5,350\n";
        let schema = ColumnMapping {
            year: "yr".into(),
            lower_threshold: "t".into(),
            returns: "n".into(),
            income_sum: "s".into(),
        };
        let tab = parse_tabulation(raw.as_bytes(), DEN.as_bytes(), &schema).unwrap();
        assert_eq!(tab.classes(), 2);
    }

    #[test]
    fn invalid_content_is_rejected() {
        let raw = "year,lower_threshold,returns,income_sum\n2000,100,2,100\n2000,50,5,350\n";
        let err = parse_tabulation(raw.as_bytes(), DEN.as_bytes(), &ColumnMapping::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidTabulation { year: 2000, .. }));
    }

    #[test]
    fn micro_sample_csv() {
        let raw = "income,weight\n4,1\n3,2\n1,1\n";
        let s = read_micro_sample(raw.as_bytes(), 1).unwrap();
        assert_eq!(s.population(), 5);
        assert_eq!(s.total_income(), 11.0);
        assert!(read_micro_sample("income,weight\n4,0\n".as_bytes(), 0).is_err());
        assert!(read_micro_sample("income,weight\n4,1.5\n".as_bytes(), 0).is_err());
    }
}
