//! Min-max scaling of the volatility column, fitted on training rows only.

use serde::{Deserialize, Serialize};

use crate::data::features::{FeatureTable, VOL_SCALED};
use crate::data::windows::SplitSpec;
use crate::error::{Error, Result};

/// Fitted min-max range of the training volatility closes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolScaler {
    pub min: f64,
    pub max: f64,
}

impl VolScaler {
    /// Fit on the raw volatility closes of the training rows.
    pub fn fit(table: &FeatureTable, split: &SplitSpec) -> Result<Self> {
        split.validate()?;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for (date, &v) in table.dates.iter().zip(&table.raw_vol) {
            if *date <= split.train_end {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Validation(
                "fit_scaler: no training rows before train_end".into(),
            ));
        }
        if max == min {
            return Err(Error::DegenerateScaler(min));
        }
        Ok(VolScaler { min, max })
    }

    /// Scale a single raw volatility value. Values outside the training range
    /// map outside [0, 1] on purpose: the excursion carries risk signal.
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.min) / (self.max - self.min)
    }

    /// Return a copy of the table with the `vol_scaled` column min-max
    /// scaled; all other columns pass through unchanged.
    pub fn apply(&self, table: &FeatureTable) -> FeatureTable {
        let mut out = table.clone();
        for i in 0..out.rows() {
            out.values[[i, VOL_SCALED]] = self.scale(table.raw_vol[i]);
        }
        out
    }
}
