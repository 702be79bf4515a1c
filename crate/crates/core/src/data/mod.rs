//! Market-data ingestion, feature engineering, scaling, and windowing.

pub mod features;
pub mod ohlcv;
pub mod scale;
pub mod windows;

pub use features::{compute_features, FeatureTable, COLUMN_NAMES};
pub use ohlcv::{align_calendars, load_ohlcv, load_volatility, Bar, JoinedSeries, VolPoint};
pub use scale::VolScaler;
pub use windows::{make_windows, split_samples, Split, SplitSpec, WindowSample};
