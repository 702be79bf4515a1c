//! OHLCV and volatility-index CSV ingestion plus calendar alignment.
//!
//! Expected schemas (UTF-8, ISO-8601 dates, `.` decimal point):
//!   - OHLCV:      `date,open,high,low,close,volume`
//!   - volatility: `date,close`

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;

use crate::error::{Error, Result};

/// One daily bar of an index series.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

/// One daily close of a volatility index.
#[derive(Debug, Clone, PartialEq)]
pub struct VolPoint {
    pub date: NaiveDate,
    pub vol_close: f64,
}

/// An inner join of bars and volatility points on the trading date.
#[derive(Debug, Clone)]
pub struct JoinedSeries {
    pub bars: Vec<Bar>,
    pub vol_close: Vec<f64>,
}

impl JoinedSeries {
    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }
}

const OHLCV_HEADER: [&str; 6] = ["date", "open", "high", "low", "close", "volume"];
const VOL_HEADER: [&str; 2] = ["date", "close"];

fn parse_date(s: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        msg: format!("bad date {s:?}: {e}"),
    })
}

fn parse_number(s: &str, field: &str, line: u64) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {field} value {s:?}"),
    })
}

fn check_header(record: &csv::StringRecord, expected: &[&str], path: &Path) -> Result<()> {
    let got: Vec<&str> = record.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Validation(format!(
            "{}: header must be {:?}, got {:?}",
            path.display(),
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

/// Sort rows by date when needed (warning once), then reject duplicates.
fn finalize_dates<T, F: Fn(&T) -> NaiveDate>(mut rows: Vec<T>, date_of: F, what: &str) -> Result<Vec<T>> {
    if rows.windows(2).any(|w| date_of(&w[0]) > date_of(&w[1])) {
        warn!("{what}: dates out of order, re-sorting ascending");
        rows.sort_by_key(|r| date_of(r));
    }
    let mut seen = HashSet::new();
    for row in &rows {
        if !seen.insert(date_of(row)) {
            return Err(Error::Validation(format!(
                "{what}: duplicate date {}",
                date_of(row)
            )));
        }
    }
    Ok(rows)
}

/// Load an OHLCV CSV into date-sorted bars.
pub fn load_ohlcv(path: &Path) -> Result<Vec<Bar>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    check_header(rdr.headers().map_err(csv_err)?, &OHLCV_HEADER, path)?;

    let mut bars = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 6 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 6 fields, got {}", record.len()),
            });
        }
        let bar = Bar {
            date: parse_date(&record[0], line)?,
            open: parse_number(&record[1], "open", line)?,
            high: parse_number(&record[2], "high", line)?,
            low: parse_number(&record[3], "low", line)?,
            close: parse_number(&record[4], "close", line)?,
            volume: parse_number(&record[5], "volume", line)?,
        };
        validate_bar(&bar, line)?;
        bars.push(bar);
    }
    finalize_dates(bars, |b| b.date, "ohlcv")
}

fn validate_bar(bar: &Bar, line: u64) -> Result<()> {
    for (name, v) in [
        ("open", bar.open),
        ("high", bar.high),
        ("low", bar.low),
        ("close", bar.close),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Validation(format!(
                "line {line}: non-positive {name} price {v}"
            )));
        }
    }
    if !bar.volume.is_finite() || bar.volume < 0.0 {
        return Err(Error::Validation(format!(
            "line {line}: negative volume {}",
            bar.volume
        )));
    }
    if bar.low > bar.open.min(bar.close) {
        return Err(Error::Validation(format!(
            "line {line}: low {} above min(open, close)",
            bar.low
        )));
    }
    if bar.high < bar.open.max(bar.close) {
        return Err(Error::Validation(format!(
            "line {line}: high {} below max(open, close)",
            bar.high
        )));
    }
    Ok(())
}

/// Load a volatility-index CSV (`date,close`) into date-sorted points.
pub fn load_volatility(path: &Path) -> Result<Vec<VolPoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    check_header(rdr.headers().map_err(csv_err)?, &VOL_HEADER, path)?;

    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let vol_close = parse_number(&record[1], "close", line)?;
        if !vol_close.is_finite() || vol_close <= 0.0 {
            return Err(Error::Validation(format!(
                "line {line}: non-positive volatility close {vol_close}"
            )));
        }
        points.push(VolPoint {
            date: parse_date(&record[0], line)?,
            vol_close,
        });
    }
    finalize_dates(points, |p| p.date, "volatility")
}

fn csv_err(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Inner-join bars and volatility points on date.
///
/// The two instruments trade on different calendars, so some loss is normal;
/// an overlap below 80% of the shorter series signals mismatched inputs.
pub fn align_calendars(bars: &[Bar], vols: &[VolPoint]) -> Result<JoinedSeries> {
    if bars.is_empty() || vols.is_empty() {
        return Err(Error::Validation(
            "align_calendars: both series must be non-empty".into(),
        ));
    }
    let vol_by_date: std::collections::HashMap<NaiveDate, f64> =
        vols.iter().map(|v| (v.date, v.vol_close)).collect();

    let mut joined_bars = Vec::new();
    let mut vol_close = Vec::new();
    for bar in bars {
        if let Some(&v) = vol_by_date.get(&bar.date) {
            joined_bars.push(bar.clone());
            vol_close.push(v);
        }
    }

    let shorter = bars.len().min(vols.len());
    let overlap = joined_bars.len();
    // 80% threshold on the shorter series, checked without float rounding.
    if overlap * 10 < shorter * 8 {
        return Err(Error::Alignment { overlap, shorter });
    }
    Ok(JoinedSeries {
        bars: joined_bars,
        vol_close,
    })
}
