//! Risk-aware adversarial sequence generation and interval construction for
//! broad-based index prices.
//!
//! The pipeline: ingest OHLCV and volatility-index series, engineer the
//! feature table, train a Wasserstein GAN whose generator couples a risk
//! attention module with an attention + dilated-convolution temporal module,
//! simulate horizon-wise price ensembles, and construct risk-sensitive
//! prediction intervals with a full evaluation harness.

pub mod data;
pub mod error;
pub mod graph;
pub mod nets;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
