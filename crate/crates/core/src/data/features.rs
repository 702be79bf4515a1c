//! Engineered feature table: price/volume returns, technical indicators on
//! the raw close, and the two volatility-based columns.

use chrono::NaiveDate;
use ndarray::Array2;

use crate::data::ohlcv::JoinedSeries;
use crate::error::{Error, Result};

/// Canonical column order of the feature matrix.
pub const COLUMN_NAMES: [&str; 14] = [
    "open_ret",
    "high_ret",
    "low_ret",
    "close_ret",
    "volume_ret",
    "macd_diff",
    "bb_upper",
    "bb_lower",
    "ema_5",
    "sma_13",
    "sma_21",
    "sma_50",
    "vol_ret",
    "vol_scaled",
];

/// Index of the close-return column within [`COLUMN_NAMES`].
pub const CLOSE_RET: usize = 3;
/// Index of the volatility-return column.
pub const VOL_RET: usize = 12;
/// Index of the min-max-scaled volatility column.
pub const VOL_SCALED: usize = 13;

/// Rows consumed by indicator warm-up (SMA-50 dominates the MACD chain).
pub const WARMUP_ROWS: usize = 50;

/// Minimum joined rows required before the warm-up cut.
pub const MIN_ROWS: usize = 60;

/// Date-indexed matrix of engineered features plus the raw series the
/// downstream stages anchor on.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub dates: Vec<NaiveDate>,
    /// T x K feature matrix in [`COLUMN_NAMES`] order.
    pub values: Array2<f64>,
    pub column_names: Vec<String>,
    /// Marks the two volatility-based columns.
    pub volatility_mask: Vec<bool>,
    /// Raw close aligned with `dates`.
    pub raw_close: Vec<f64>,
    /// Raw volatility-index close aligned with `dates`.
    pub raw_vol: Vec<f64>,
}

impl FeatureTable {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Simple x_t / x_{t-1} - 1; the first element is NaN.
fn relative_change(series: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; series.len()];
    for t in 1..series.len() {
        out[t] = series[t] / series[t - 1] - 1.0;
    }
    out
}

/// EMA with smoothing 2/(n+1), seeded with the first observation.
pub(crate) fn ema(series: &[f64], n: usize) -> Vec<f64> {
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut out = Vec::with_capacity(series.len());
    let mut prev = f64::NAN;
    for (t, &x) in series.iter().enumerate() {
        prev = if t == 0 { x } else { alpha * x + (1.0 - alpha) * prev };
        out.push(prev);
    }
    out
}

/// SMA over a trailing window; NaN until the window fills.
pub(crate) fn sma(series: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; series.len()];
    let mut sum = 0.0;
    for t in 0..series.len() {
        sum += series[t];
        if t >= n {
            sum -= series[t - n];
        }
        if t + 1 >= n {
            out[t] = sum / n as f64;
        }
    }
    out
}

/// Rolling population standard deviation over a trailing window.
pub(crate) fn rolling_std(series: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; series.len()];
    for t in (n - 1)..series.len() {
        let window = &series[t + 1 - n..=t];
        let mean = window.iter().sum::<f64>() / n as f64;
        let var = window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        out[t] = var.sqrt();
    }
    out
}

/// MACD DIFF with the universal (12, 26, 9) parameters:
/// (EMA12 - EMA26) minus its own EMA9 signal line.
pub(crate) fn macd_diff(close: &[f64]) -> Vec<f64> {
    let fast = ema(close, 12);
    let slow = ema(close, 26);
    let line: Vec<f64> = fast.iter().zip(&slow).map(|(f, s)| f - s).collect();
    let signal = ema(&line, 9);
    line.iter().zip(&signal).map(|(l, s)| l - s).collect()
}

/// Compute the Table of engineered features from a joined series.
///
/// The first [`WARMUP_ROWS`] rows are dropped rather than back-filled, so the
/// resulting table is finite everywhere. The `vol_scaled` column holds the raw
/// volatility close until a scaler is applied.
pub fn compute_features(joined: &JoinedSeries) -> Result<FeatureTable> {
    let t_in = joined.len();
    if t_in < MIN_ROWS {
        return Err(Error::WarmUp {
            needed: MIN_ROWS,
            got: t_in,
        });
    }

    let open: Vec<f64> = joined.bars.iter().map(|b| b.open).collect();
    let high: Vec<f64> = joined.bars.iter().map(|b| b.high).collect();
    let low: Vec<f64> = joined.bars.iter().map(|b| b.low).collect();
    let close: Vec<f64> = joined.bars.iter().map(|b| b.close).collect();
    let volume: Vec<f64> = joined.bars.iter().map(|b| b.volume).collect();
    let vol = &joined.vol_close;

    let bb_mid = sma(&close, 20);
    let bb_std = rolling_std(&close, 20);
    let columns: Vec<Vec<f64>> = vec![
        relative_change(&open),
        relative_change(&high),
        relative_change(&low),
        relative_change(&close),
        relative_change(&volume),
        macd_diff(&close),
        bb_mid.iter().zip(&bb_std).map(|(m, s)| m + 2.0 * s).collect(),
        bb_mid.iter().zip(&bb_std).map(|(m, s)| m - 2.0 * s).collect(),
        ema(&close, 5),
        sma(&close, 13),
        sma(&close, 21),
        sma(&close, 50),
        relative_change(vol),
        vol.clone(),
    ];

    let t_out = t_in - WARMUP_ROWS;
    let k = COLUMN_NAMES.len();
    let mut values = Array2::zeros((t_out, k));
    for (j, col) in columns.iter().enumerate() {
        for i in 0..t_out {
            let v = col[i + WARMUP_ROWS];
            if !v.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite {} at row {}",
                    COLUMN_NAMES[j],
                    i + WARMUP_ROWS
                )));
            }
            values[[i, j]] = v;
        }
    }

    let mut volatility_mask = vec![false; k];
    volatility_mask[VOL_RET] = true;
    volatility_mask[VOL_SCALED] = true;

    Ok(FeatureTable {
        dates: joined.bars[WARMUP_ROWS..].iter().map(|b| b.date).collect(),
        values,
        column_names: COLUMN_NAMES.iter().map(|s| s.to_string()).collect(),
        volatility_mask,
        raw_close: close[WARMUP_ROWS..].to_vec(),
        raw_vol: vol[WARMUP_ROWS..].to_vec(),
    })
}
