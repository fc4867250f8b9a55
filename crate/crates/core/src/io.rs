//! CSV datasets and box specifications.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{BoxSupport, PointSet, Sample, TreatmentDataset};
use crate::error::{Error, Result};

/// A loaded dataset: plain regression data, or with a treatment column.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Regression(Sample),
    Treatment(TreatmentDataset),
}

/// Parsed CSV table with covariate columns split from named columns.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(reader: R, source: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() {
        return Err(Error::InvalidInput(format!("{source}: missing header row")));
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut row = Vec::with_capacity(headers.len());
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{source}: non-numeric value '{cell}' in row {}, column '{}'",
                    r + 1,
                    headers[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{source}: non-finite value in row {}, column '{}'",
                    r + 1,
                    headers[c]
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{source}: no data rows")));
    }
    Ok(Table { headers, rows })
}

fn column(table: &Table, name: &str, source: &str) -> Result<usize> {
    table
        .headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("{source}: column '{name}' not found")))
}

fn covariates(table: &Table, skip: &[usize], source: &str) -> Result<PointSet> {
    let keep: Vec<usize> = (0..table.headers.len()).filter(|c| !skip.contains(c)).collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput(format!("{source}: no covariate columns")));
    }
    let coords = table
        .rows
        .iter()
        .flat_map(|row| keep.iter().map(move |&c| row[c]))
        .collect();
    PointSet::new(coords, keep.len())
}

/// Parses a dataset from CSV text. Covariates are all columns other than
/// the response and treatment columns, in header order.
pub fn parse_csv_dataset<R: Read>(
    reader: R,
    source: &str,
    response_col: &str,
    treatment_col: Option<&str>,
) -> Result<Dataset> {
    let table = read_table(reader, source)?;
    let y = column(&table, response_col, source)?;
    let responses: Vec<f64> = table.rows.iter().map(|r| r[y]).collect();
    match treatment_col {
        None => {
            let z = covariates(&table, &[y], source)?;
            Ok(Dataset::Regression(Sample::new(z, responses)?))
        }
        Some(name) => {
            let d = column(&table, name, source)?;
            let treated = table
                .rows
                .iter()
                .enumerate()
                .map(|(r, row)| match row[d] {
                    v if v == 1.0 => Ok(true),
                    v if v == 0.0 => Ok(false),
                    v => Err(Error::InvalidInput(format!(
                        "{source}: treatment value {v} in row {} is not 0 or 1",
                        r + 1
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            let z = covariates(&table, &[y, d], source)?;
            Ok(Dataset::Treatment(TreatmentDataset::new(responses, z, treated)?))
        }
    }
}

pub fn load_csv_dataset(
    path: impl AsRef<Path>,
    response_col: &str,
    treatment_col: Option<&str>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_csv_dataset(file, &path.display().to_string(), response_col, treatment_col)
}

/// Loads covariates only; columns named in `exclude` are skipped if present.
pub fn load_points(path: impl AsRef<Path>, exclude: &[&str]) -> Result<PointSet> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let table = read_table(std::fs::File::open(path)?, &source)?;
    let skip: Vec<usize> = table
        .headers
        .iter()
        .enumerate()
        .filter(|(_, h)| exclude.contains(&h.as_str()))
        .map(|(i, _)| i)
        .collect();
    covariates(&table, &skip, &source)
}

/// Parses `"a1:b1,a2:b2,..."` into a box.
pub fn parse_support(spec: &str) -> Result<BoxSupport> {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        let (a, b) = token.split_once(':').ok_or_else(|| {
            Error::InvalidInput(format!("support token '{token}' is not of the form a:b"))
        })?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("support bound '{s}' is not a number")))
        };
        lower.push(parse(a)?);
        upper.push(parse(b)?);
    }
    BoxSupport::new(lower, upper)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `z1..zd,<response>` with 17 significant digits.
pub fn write_sample_csv<W: Write>(out: W, sample: &Sample, response_col: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=sample.dim()).map(|k| format!("z{k}")).collect();
    header.push(response_col.to_string());
    w.write_record(&header)?;
    for (z, y) in sample.covariates.iter().zip(&sample.responses) {
        let mut rec: Vec<String> = z.iter().map(|&v| num(v)).collect();
        rec.push(num(*y));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `z1..zd,<response>,<treatment>`.
pub fn write_treatment_csv<W: Write>(
    out: W,
    data: &TreatmentDataset,
    response_col: &str,
    treatment_col: &str,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.covariates.dim()).map(|k| format!("z{k}")).collect();
    header.push(response_col.to_string());
    header.push(treatment_col.to_string());
    w.write_record(&header)?;
    for ((z, y), d) in data.covariates.iter().zip(&data.outcomes).zip(&data.treated) {
        let mut rec: Vec<String> = z.iter().map(|&v| num(v)).collect();
        rec.push(num(*y));
        rec.push(if *d { "1" } else { "0" }.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
