//! Risk attention: exponential reweighting of volatility-based features above
//! a threshold, normalized over the window and folded back through a residual
//! layer-norm connection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Per-feature risk thresholds and growth coefficients. Only the entries
/// flagged by `volatility_mask` participate; the rest are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub volatility_mask: Vec<bool>,
}

impl RiskParams {
    /// Uniform thresholds for every volatility column.
    pub fn uniform(volatility_mask: Vec<bool>, delta: f64, lambda: f64) -> Self {
        let k = volatility_mask.len();
        RiskParams {
            delta: vec![delta; k],
            lambda: vec![lambda; k],
            volatility_mask,
        }
    }

    pub fn features(&self) -> usize {
        self.volatility_mask.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta.len() != self.volatility_mask.len()
            || self.lambda.len() != self.volatility_mask.len()
        {
            return Err(Error::Shape(
                "risk params: delta/lambda/mask lengths differ".into(),
            ));
        }
        for (k, &is_vol) in self.volatility_mask.iter().enumerate() {
            if is_vol && self.lambda[k] <= 0.0 {
                return Err(Error::Validation(format!(
                    "risk params: lambda[{k}] must be positive on volatility columns"
                )));
            }
        }
        Ok(())
    }

    /// W x K matrix with lambda_k on volatility columns and 0 elsewhere, so
    /// exp(lambda * relu(x - delta)) collapses to 1 on price columns.
    fn lambda_matrix(&self, window: usize) -> Array2<f64> {
        Array2::from_shape_fn((window, self.features()), |(_, k)| {
            if self.volatility_mask[k] {
                self.lambda[k]
            } else {
                0.0
            }
        })
    }

    fn delta_matrix(&self, window: usize) -> Array2<f64> {
        Array2::from_shape_fn((window, self.features()), |(_, k)| {
            if self.volatility_mask[k] {
                self.delta[k]
            } else {
                0.0
            }
        })
    }
}

fn check_input(x: &Array2<f64>, params: &RiskParams) -> Result<()> {
    params.validate()?;
    if x.ncols() != params.features() {
        return Err(Error::Shape(format!(
            "risk input has {} columns, params cover {}",
            x.ncols(),
            params.features()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("risk input contains non-finite values".into()));
    }
    Ok(())
}

/// Risk attention score: exp(lambda_k * max(0, x - delta_k)) on volatility
/// columns, exactly 1 elsewhere.
pub fn risk_score(x: &Array2<f64>, params: &RiskParams) -> Result<Array2<f64>> {
    check_input(x, params)?;
    let mut beta = Array2::ones(x.dim());
    for (k, &is_vol) in params.volatility_mask.iter().enumerate() {
        if !is_vol {
            continue;
        }
        for w in 0..x.nrows() {
            let excess = (x[[w, k]] - params.delta[k]).max(0.0);
            beta[[w, k]] = (params.lambda[k] * excess).exp();
        }
    }
    Ok(beta)
}

/// Graph form of the score + normalize + residual layer-norm enhancement:
/// x_tilde_k = x_k + LayerNorm(softmax(beta_k) ⊙ x_k).
///
/// `gain` and `bias` are W x 1 leaf nodes (the layer-norm affine parameters).
pub fn build_risk_enhance(
    graph: &mut Graph,
    x: NodeId,
    params: &RiskParams,
    gain: NodeId,
    bias: NodeId,
) -> Result<NodeId> {
    let window = graph.value(x).nrows();
    if window < 2 {
        return Err(Error::Shape(format!(
            "risk_enhance: window must be >= 2, got {window}"
        )));
    }
    let lambda = graph.leaf(params.lambda_matrix(window));
    let delta = graph.leaf(params.delta_matrix(window));
    let shifted = graph.sub(x, delta)?;
    let excess = graph.relu(shifted);
    let scaled = graph.mul(lambda, excess)?;
    let beta = graph.exp(scaled);
    let r = graph.softmax_cols(beta);
    let weighted = graph.mul(r, x)?;
    let normed = graph.layer_norm_cols(weighted, gain, bias)?;
    graph.add(x, normed)
}

/// Risk-enhanced window with the freshly initialized (gain=1, bias=0)
/// layer-norm affine. Training uses [`build_risk_enhance`] with the learned
/// parameters instead.
pub fn risk_enhance(x: &Array2<f64>, params: &RiskParams) -> Result<Array2<f64>> {
    check_input(x, params)?;
    let window = x.nrows();
    let mut graph = Graph::new();
    let x_id = graph.leaf(x.clone());
    let gain = graph.leaf(Array2::ones((window, 1)));
    let bias = graph.leaf(Array2::zeros((window, 1)));
    let out = build_risk_enhance(&mut graph, x_id, params, gain, bias)?;
    Ok(graph.value(out).clone())
}
