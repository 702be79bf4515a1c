//! Windowing into training samples and the train/validation/test split.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::features::{FeatureTable, CLOSE_RET};
use crate::error::{Error, Result};

/// One training example: a feature window, the following close-return
/// sequence, and the close price it is anchored on.
#[derive(Debug, Clone)]
pub struct WindowSample {
    /// W x K feature window ending at the anchor row.
    pub x: Array2<f64>,
    /// H close returns immediately after the anchor.
    pub y: Vec<f64>,
    pub anchor_close: f64,
    pub anchor_date: NaiveDate,
}

/// Split boundaries; every dated row belongs to exactly one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_end: NaiveDate,
    pub val_end: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_end >= self.val_end {
            return Err(Error::Config(format!(
                "split: train_end {} must precede val_end {}",
                self.train_end, self.val_end
            )));
        }
        Ok(())
    }

    pub fn split_of(&self, date: NaiveDate) -> Split {
        if date <= self.train_end {
            Split::Train
        } else if date <= self.val_end {
            Split::Val
        } else {
            Split::Test
        }
    }
}

/// Slide a W-step window over the table; each anchor row t yields the window
/// of rows [t-W+1, t] and the close returns of rows [t+1, t+H].
pub fn make_windows(table: &FeatureTable, window: usize, horizon: usize) -> Result<Vec<WindowSample>> {
    let t_rows = table.rows();
    if window == 0 || horizon == 0 {
        return Err(Error::Config("window and horizon must be >= 1".into()));
    }
    if t_rows < window + horizon {
        return Err(Error::EmptyDataset {
            rows: t_rows,
            window,
            horizon,
        });
    }
    let mut samples = Vec::with_capacity(t_rows - window - horizon + 1);
    for anchor in (window - 1)..(t_rows - horizon) {
        let x = table
            .values
            .slice(ndarray::s![anchor + 1 - window..=anchor, ..])
            .to_owned();
        let y: Vec<f64> = (1..=horizon)
            .map(|h| table.values[[anchor + h, CLOSE_RET]])
            .collect();
        samples.push(WindowSample {
            x,
            y,
            anchor_close: table.raw_close[anchor],
            anchor_date: table.dates[anchor],
        });
    }
    Ok(samples)
}

/// Partition samples by the split of their anchor date.
pub fn split_samples(
    samples: Vec<WindowSample>,
    split: &SplitSpec,
) -> (Vec<WindowSample>, Vec<WindowSample>, Vec<WindowSample>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for s in samples {
        match split.split_of(s.anchor_date) {
            Split::Train => train.push(s),
            Split::Val => val.push(s),
            Split::Test => test.push(s),
        }
    }
    (train, val, test)
}
