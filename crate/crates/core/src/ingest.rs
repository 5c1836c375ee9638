//! Daily close prices from CSV and rolling increment windows.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::autocov::Layer;
use crate::error::{Error, Result};
use crate::estimation::WindowConfig;
use crate::procgen::SamplePath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRecord {
    pub date: NaiveDate,
    pub close: f64,
}

/// Whether windows are built from prices or log prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceTransform {
    Raw,
    #[default]
    Log,
}

impl fmt::Display for PriceTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceTransform::Raw => "raw",
            PriceTransform::Log => "log",
        })
    }
}

impl FromStr for PriceTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(PriceTransform::Raw),
            "log" => Ok(PriceTransform::Log),
            other => Err(Error::InvalidParameter(format!("unknown price transform `{other}`"))),
        }
    }
}

/// Date-sorted close prices with strictly increasing dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<PriceRecord>,
    pub transform: PriceTransform,
}

impl Dataset {
    /// Validates positivity and strictly increasing dates. Rows are numbered
    /// from 1 in the order given.
    pub fn new(records: Vec<PriceRecord>, transform: PriceTransform) -> Result<Self> {
        for (k, r) in records.iter().enumerate() {
            check_price(r.close, k + 1)?;
        }
        for (k, pair) in records.windows(2).enumerate() {
            if pair[1].date <= pair[0].date {
                return Err(Error::Parse {
                    row: k + 2,
                    message: format!("date {} does not follow {}", pair[1].date, pair[0].date),
                });
            }
        }
        Ok(Self { records, transform })
    }

    /// Prices `p0 * exp(cumsum(log_increments))` on consecutive calendar days
    /// from `start`. Handy for synthetic studies.
    pub fn from_log_increments(log_increments: &[f64], start: NaiveDate, p0: f64) -> Result<Self> {
        let mut log_p = p0.ln();
        let mut records = Vec::with_capacity(log_increments.len() + 1);
        records.push(PriceRecord { date: start, close: p0 });
        for (k, dy) in log_increments.iter().enumerate() {
            log_p += dy;
            records.push(PriceRecord { date: start + Duration::days(k as i64 + 1), close: log_p.exp() });
        }
        Self::new(records, PriceTransform::Log)
    }

    pub fn with_transform(mut self, transform: PriceTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Prices after the configured transform.
    pub fn series(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| match self.transform {
                PriceTransform::Raw => r.close,
                PriceTransform::Log => r.close.ln(),
            })
            .collect()
    }

    /// First differences of [`Dataset::series`].
    pub fn increments(&self) -> SamplePath<f64> {
        let s = self.series();
        SamplePath::from_values(s.windows(2).map(|w| w[1] - w[0]).collect(), Layer::Increment)
    }
}

fn check_price(close: f64, row: usize) -> Result<()> {
    if close.is_finite() && close > 0.0 {
        Ok(())
    } else {
        Err(Error::Parse { row, message: format!("price must be positive and finite, got {close}") })
    }
}

/// Reads a headed CSV file. See [`read_csv`].
pub fn load_csv(path: impl AsRef<Path>, date_column: &str, price_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, date_column, price_column)
}

/// Parses ISO-8601 dates and close prices from the named columns and sorts by
/// date. Errors carry the line number in the file (the header is line 1).
pub fn read_csv<R: Read>(reader: R, date_column: &str, price_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column =
        |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let date_idx = column(date_column)?;
    let price_idx = column(price_column)?;

    let mut rows: Vec<(PriceRecord, usize)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows.len() + 2, |p| p.line() as usize);
        let field = |idx: usize, name: &str| {
            record.get(idx).ok_or_else(|| Error::Parse { row: line, message: format!("missing `{name}` field") })
        };
        let raw_date = field(date_idx, date_column)?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|e| Error::Parse { row: line, message: format!("bad date `{raw_date}`: {e}") })?;
        let raw_price = field(price_idx, price_column)?;
        let close: f64 = raw_price
            .parse()
            .map_err(|e| Error::Parse { row: line, message: format!("bad price `{raw_price}`: {e}") })?;
        check_price(close, line)?;
        rows.push((PriceRecord { date, close }, line));
    }
    rows.sort_by_key(|(r, _)| r.date);
    if let Some(pair) = rows.windows(2).find(|p| p[0].0.date == p[1].0.date) {
        let (first, second) = (pair[0].1.min(pair[1].1), pair[0].1.max(pair[1].1));
        return Err(Error::Parse {
            row: second,
            message: format!("duplicate date {} (also on row {first})", pair[0].0.date),
        });
    }
    Ok(Dataset { records: rows.into_iter().map(|(r, _)| r).collect(), transform: PriceTransform::default() })
}

/// One slice of `T + M` consecutive increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub index: usize,
    /// Position of the first increment in the full increment series.
    pub offset: usize,
    /// Date of the price the first increment starts from.
    pub start_date: NaiveDate,
    /// Date of the price the last increment ends at.
    pub end_date: NaiveDate,
    pub increments: SamplePath<f64>,
}

/// Number of windows `floor((n_incr - (T + M)) / stride) + 1`, or an error
/// naming the required number of prices.
pub fn window_count(prices: usize, cfg: &WindowConfig) -> Result<usize> {
    cfg.validate()?;
    let need = cfg.window_len();
    let n_incr = prices.saturating_sub(1);
    if n_incr < need {
        return Err(Error::InsufficientData { required: need + 1, actual: prices });
    }
    Ok((n_incr - need) / cfg.stride + 1)
}

/// Consecutive increment windows advanced by `cfg.stride`, ordered by start
/// date. The out-of-sample partner of window `w` is window `w + 1`.
pub fn rolling_windows(data: &Dataset, cfg: &WindowConfig) -> Result<Vec<Window>> {
    let count = window_count(data.len(), cfg)?;
    let incr = data.increments();
    let len = cfg.window_len();
    Ok((0..count)
        .map(|index| {
            let offset = index * cfg.stride;
            Window {
                index,
                offset,
                start_date: data.records[offset].date,
                end_date: data.records[offset + len].date,
                increments: incr.slice(offset, len),
            }
        })
        .collect())
}
