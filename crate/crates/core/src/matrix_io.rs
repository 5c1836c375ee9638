//! Plain-text file formats.
//!
//! A matrix file is one header line followed by `T` comma-separated rows:
//!
//! ```text
//! # T=3 layer=price provenance=true M=-
//! 1.0,0.5,0.25
//! 0.5,1.0,0.5
//! 0.25,0.5,1.0
//! ```
//!
//! `M=-` marks a matrix without a sample size. Values are written in the
//! shortest form that parses back to the same `f64`, so files round-trip
//! exactly.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::autocov::{AutoCovMatrix, Layer, Provenance};
use crate::cleaning::SpectrumHistogram;
use crate::error::{Error, Result};

pub fn write_matrix<W: Write>(mut w: W, m: &AutoCovMatrix<f64>) -> Result<()> {
    let sample = m.sample_size().map_or_else(|| "-".to_string(), |s| s.to_string());
    writeln!(w, "# T={} layer={} provenance={} M={}", m.dim(), m.layer(), m.provenance(), sample)?;
    let e = m.entries();
    for i in 0..e.nrows() {
        let row: Vec<String> = (0..e.ncols()).map(|j| format!("{:?}", e[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<AutoCovMatrix<f64>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse { row: 1, message: "empty matrix file".into() })??;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse { row: 1, message: "header must start with `#`".into() })?;
    let (mut dim, mut layer, mut provenance, mut sample) = (None, None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse { row: 1, message: format!("malformed header field `{field}`") })?;
        let bad = |e: String| Error::Parse { row: 1, message: format!("{key}: {e}") };
        match key {
            "T" => dim = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "layer" => layer = Some(value.parse::<Layer>().map_err(|e| bad(e.to_string()))?),
            "provenance" => provenance = Some(value.parse::<Provenance>().map_err(|e| bad(e.to_string()))?),
            "M" if value == "-" => sample = None,
            "M" => sample = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(bad("unknown header key".into())),
        }
    }
    let missing = |k: &str| Error::Parse { row: 1, message: format!("header lacks `{k}`") };
    let dim = dim.ok_or_else(|| missing("T"))?;
    let layer = layer.ok_or_else(|| missing("layer"))?;
    let provenance = provenance.ok_or_else(|| missing("provenance"))?;

    let mut values = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = k + 2;
        let parsed = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|e| Error::Parse { row, message: format!("bad value `{v}`: {e}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        if parsed.len() != dim {
            return Err(Error::Parse { row, message: format!("expected {dim} values, got {}", parsed.len()) });
        }
        values.extend(parsed);
        rows += 1;
    }
    if rows != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: rows });
    }
    let m = AutoCovMatrix::new(DMatrix::from_row_slice(dim, dim, &values), layer, provenance)?;
    Ok(match sample {
        Some(s) => m.with_sample_size(s),
        None => m,
    })
}

pub fn save_matrix(path: impl AsRef<Path>, m: &AutoCovMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)?;
    f.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<AutoCovMatrix<f64>> {
    read_matrix(BufReader::new(std::fs::File::open(path)?))
}

/// Two-column CSV `index_name,value_name` with indices starting at 1.
pub fn write_series<W: Write>(mut w: W, index_name: &str, value_name: &str, values: &[f64]) -> Result<()> {
    writeln!(w, "{index_name},{value_name}")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(w, "{},{:?}", k + 1, v)?;
    }
    Ok(())
}

/// Reads the last column of a headed CSV as a series.
pub fn read_series<R: std::io::Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(out.len() + 2, |p| p.line() as usize);
        let raw = record.iter().next_back().ok_or_else(|| Error::Parse { row, message: "empty row".into() })?;
        out.push(raw.parse().map_err(|e| Error::Parse { row, message: format!("bad value `{raw}`: {e}") })?);
    }
    Ok(out)
}

/// `bin_center,density` rows.
pub fn write_spectrum<W: Write>(mut w: W, h: &SpectrumHistogram) -> Result<()> {
    writeln!(w, "bin_center,density")?;
    for (c, d) in h.bin_centers().iter().zip(&h.densities) {
        writeln!(w, "{c:?},{d:?}")?;
    }
    Ok(())
}
