//! On-disk formats for points, weights and potentials.
//!
//! * points, binary: headerless little-endian `f64`, row-major `n x d`;
//!   `d` is supplied by the caller.
//! * points, CSV: one point per row, no header.
//! * weights / bandwidths: one value per line, text.
//! * potentials: headerless little-endian `f64` vector.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::PointSet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointFormat {
    Bin,
    Csv,
}

impl FromStr for PointFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bin" => Ok(PointFormat::Bin),
            "csv" => Ok(PointFormat::Csv),
            other => Err(Error::Parse(format!("unknown point format '{other}'"))),
        }
    }
}

pub fn read_f64_le(mut r: impl Read) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!(
            "binary length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_f64_le(mut w: impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points(path: impl AsRef<Path>, format: PointFormat, d: Option<usize>) -> Result<PointSet> {
    let path = path.as_ref();
    match format {
        PointFormat::Bin => {
            let d = d.ok_or_else(|| {
                Error::InvalidArgument("binary point files need the dimension".into())
            })?;
            let values = read_f64_le(BufReader::new(File::open(path)?))?;
            PointSet::new(values, d)
        }
        PointFormat::Csv => {
            let pts = read_points_csv(BufReader::new(File::open(path)?))?;
            if let Some(d) = d {
                if d != pts.dim() {
                    return Err(Error::InvalidArgument(format!(
                        "{} has {} columns, expected {d}",
                        path.display(),
                        pts.dim()
                    )));
                }
            }
            Ok(pts)
        }
    }
}

pub fn write_points(path: impl AsRef<Path>, format: PointFormat, points: &PointSet) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        PointFormat::Bin => write_f64_le(file, points.as_slice()),
        PointFormat::Csv => write_points_csv(file, points),
    }
}

pub fn read_points_csv(r: impl Read) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    let mut d = None;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        match d {
            None => d = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(Error::Parse(format!(
                    "row {line} has {} columns, expected {d}",
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            data.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {line}: '{field}': {e}")))?,
            );
        }
    }
    PointSet::new(data, d.unwrap_or(0))
}

pub fn write_points_csv(w: impl Write, points: &PointSet) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in points.rows() {
        // `{:?}` prints the shortest string that round-trips exactly.
        writer.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads one number per line; blank lines and `#` comments are skipped.
pub fn read_values_text(r: impl Read) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (no, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: '{t}': {e}", no + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_values_text(mut w: impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_values_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_values_text(File::open(path)?)
}
