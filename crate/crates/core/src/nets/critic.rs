//! The critic: a gated recurrent scan over a candidate return sequence with a
//! linear head on the final hidden state. Its output approximates the
//! Wasserstein distance between real and generated sequence distributions
//! once trained under the clipping constraint.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticConfig {
    /// Length of scored sequences (H).
    pub horizon: usize,
    /// Width of the recurrent hidden state.
    pub hidden: usize,
}

/// All trainable state of the critic. Gate layout follows the usual GRU:
/// r = sig(x W_ir + h W_hr + b_r), z = sig(x W_iz + h W_hz + b_z),
/// n = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn)), h' = (1-z) ⊙ n + z ⊙ h.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    pub config: CriticConfig,
    pub w_ir: Array2<f64>,
    pub w_iz: Array2<f64>,
    pub w_in: Array2<f64>,
    pub w_hr: Array2<f64>,
    pub w_hz: Array2<f64>,
    pub w_hn: Array2<f64>,
    pub b_r: Array2<f64>,
    pub b_z: Array2<f64>,
    pub b_in: Array2<f64>,
    pub b_hn: Array2<f64>,
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

impl CriticParams {
    pub fn init<R: Rng>(config: CriticConfig, rng: &mut R) -> Result<Self> {
        if config.horizon == 0 || config.hidden == 0 {
            return Err(Error::Config("critic config: horizon and hidden must be >= 1".into()));
        }
        let m = config.hidden;
        let input = Normal::new(0.0, 0.2).expect("finite std");
        let hidden = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("finite std");
        let mut mat = |rows: usize, cols: usize, dist: &Normal<f64>| {
            Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
        };
        Ok(CriticParams {
            w_ir: mat(1, m, &input),
            w_iz: mat(1, m, &input),
            w_in: mat(1, m, &input),
            w_hr: mat(m, m, &hidden),
            w_hz: mat(m, m, &hidden),
            w_hn: mat(m, m, &hidden),
            b_r: Array2::zeros((1, m)),
            b_z: Array2::zeros((1, m)),
            b_in: Array2::zeros((1, m)),
            b_hn: Array2::zeros((1, m)),
            head_w: mat(m, 1, &hidden),
            head_b: Array2::zeros((1, 1)),
            config,
        })
    }

    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        vec![
            ("w_ir".into(), &self.w_ir),
            ("w_iz".into(), &self.w_iz),
            ("w_in".into(), &self.w_in),
            ("w_hr".into(), &self.w_hr),
            ("w_hz".into(), &self.w_hz),
            ("w_hn".into(), &self.w_hn),
            ("b_r".into(), &self.b_r),
            ("b_z".into(), &self.b_z),
            ("b_in".into(), &self.b_in),
            ("b_hn".into(), &self.b_hn),
            ("head_w".into(), &self.head_w),
            ("head_b".into(), &self.head_b),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        vec![
            ("w_ir".into(), &mut self.w_ir),
            ("w_iz".into(), &mut self.w_iz),
            ("w_in".into(), &mut self.w_in),
            ("w_hr".into(), &mut self.w_hr),
            ("w_hz".into(), &mut self.w_hz),
            ("w_hn".into(), &mut self.w_hn),
            ("b_r".into(), &mut self.b_r),
            ("b_z".into(), &mut self.b_z),
            ("b_in".into(), &mut self.b_in),
            ("b_hn".into(), &mut self.b_hn),
            ("head_w".into(), &mut self.head_w),
            ("head_b".into(), &mut self.head_b),
        ]
    }

    pub fn insert_leaves(&self, graph: &mut Graph) -> CriticLeaves {
        CriticLeaves {
            w_ir: graph.leaf(self.w_ir.clone()),
            w_iz: graph.leaf(self.w_iz.clone()),
            w_in: graph.leaf(self.w_in.clone()),
            w_hr: graph.leaf(self.w_hr.clone()),
            w_hz: graph.leaf(self.w_hz.clone()),
            w_hn: graph.leaf(self.w_hn.clone()),
            b_r: graph.leaf(self.b_r.clone()),
            b_z: graph.leaf(self.b_z.clone()),
            b_in: graph.leaf(self.b_in.clone()),
            b_hn: graph.leaf(self.b_hn.clone()),
            head_w: graph.leaf(self.head_w.clone()),
            head_b: graph.leaf(self.head_b.clone()),
            hidden: self.config.hidden,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CriticLeaves {
    pub w_ir: NodeId,
    pub w_iz: NodeId,
    pub w_in: NodeId,
    pub w_hr: NodeId,
    pub w_hz: NodeId,
    pub w_hn: NodeId,
    pub b_r: NodeId,
    pub b_z: NodeId,
    pub b_in: NodeId,
    pub b_hn: NodeId,
    pub head_w: NodeId,
    pub head_b: NodeId,
    hidden: usize,
}

impl CriticLeaves {
    /// Leaf ids in the same order as [`CriticParams::named_tensors`].
    pub fn ordered(&self) -> Vec<NodeId> {
        vec![
            self.w_ir, self.w_iz, self.w_in, self.w_hr, self.w_hz, self.w_hn, self.b_r, self.b_z,
            self.b_in, self.b_hn, self.head_w, self.head_b,
        ]
    }
}

/// Score a sequence already inside the graph: `sequence` is a 1 x H node.
/// Returns the 1 x 1 score node.
pub fn build_critic_forward(
    graph: &mut Graph,
    sequence: NodeId,
    leaves: &CriticLeaves,
) -> Result<NodeId> {
    let (rows, steps) = graph.value(sequence).dim();
    if rows != 1 || steps == 0 {
        return Err(Error::Shape(format!(
            "critic input must be 1 x H with H >= 1, got {rows}x{steps}"
        )));
    }
    let mut h = graph.leaf(Array2::zeros((1, leaves.hidden)));
    for t in 0..steps {
        let x = graph.element(sequence, 0, t)?;
        let xr = graph.matmul(x, leaves.w_ir)?;
        let hr = graph.matmul(h, leaves.w_hr)?;
        let r_pre = graph.add(xr, hr)?;
        let r_pre = graph.add(r_pre, leaves.b_r)?;
        let r = graph.sigmoid(r_pre);

        let xz = graph.matmul(x, leaves.w_iz)?;
        let hz = graph.matmul(h, leaves.w_hz)?;
        let z_pre = graph.add(xz, hz)?;
        let z_pre = graph.add(z_pre, leaves.b_z)?;
        let z = graph.sigmoid(z_pre);

        let xn = graph.matmul(x, leaves.w_in)?;
        let xn = graph.add(xn, leaves.b_in)?;
        let hn = graph.matmul(h, leaves.w_hn)?;
        let hn = graph.add(hn, leaves.b_hn)?;
        let gated = graph.mul(r, hn)?;
        let n_pre = graph.add(xn, gated)?;
        let n = graph.tanh(n_pre);

        let neg_z = graph.neg(z);
        let one_minus_z = graph.add_scalar(neg_z, 1.0);
        let new_part = graph.mul(one_minus_z, n)?;
        let old_part = graph.mul(z, h)?;
        h = graph.add(new_part, old_part)?;
    }
    let projected = graph.matmul(h, leaves.head_w)?;
    graph.add(projected, leaves.head_b)
}

/// Single-shot critic score of a sequence.
pub fn critic_forward(sequence: &[f64], params: &CriticParams) -> Result<f64> {
    let mut graph = Graph::new();
    let seq = graph.leaf(
        Array2::from_shape_vec((1, sequence.len()), sequence.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?,
    );
    let leaves = params.insert_leaves(&mut graph);
    let score = build_critic_forward(&mut graph, seq, &leaves)?;
    Ok(graph.scalar(score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_params() -> CriticParams {
        CriticParams {
            config: CriticConfig { horizon: 2, hidden: 1 },
            w_ir: arr2(&[[0.5]]),
            w_iz: arr2(&[[-0.3]]),
            w_in: arr2(&[[0.8]]),
            w_hr: arr2(&[[0.2]]),
            w_hz: arr2(&[[0.4]]),
            w_hn: arr2(&[[-0.6]]),
            b_r: arr2(&[[0.1]]),
            b_z: arr2(&[[-0.2]]),
            b_in: arr2(&[[0.05]]),
            b_hn: arr2(&[[0.15]]),
            head_w: arr2(&[[1.3]]),
            head_b: arr2(&[[-0.07]]),
        }
    }

    #[test]
    fn zero_weights_score_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(50);
        let mut params = CriticParams::init(CriticConfig { horizon: 5, hidden: 4 }, &mut rng).unwrap();
        for (_, tensor) in params.named_tensors_mut() {
            tensor.fill(0.0);
        }
        assert_eq!(critic_forward(&[0.1, -0.2, 0.3, 0.0, 0.5], &params).unwrap(), 0.0);
    }

    #[test]
    fn produces_single_finite_scalar() {
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let params = CriticParams::init(CriticConfig { horizon: 5, hidden: 8 }, &mut rng).unwrap();
        let score = critic_forward(&[0.01, -0.02, 0.005, 0.0, 0.03], &params).unwrap();
        assert!(score.is_finite());
    }

    #[test]
    fn single_unit_cell_matches_hand_trace() {
        // y' = (1, 0) through a 1-unit GRU with the hand-set gates above;
        // the recurrence below is written in plain scalar arithmetic.
        let p = unit_params();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = 0.0f64;
        for x in [1.0f64, 0.0] {
            let r = sig(x * 0.5 + h * 0.2 + 0.1);
            let z = sig(x * -0.3 + h * 0.4 - 0.2);
            let n = (x * 0.8 + 0.05 + r * (h * -0.6 + 0.15)).tanh();
            h = (1.0 - z) * n + z * h;
        }
        let expect = h * 1.3 - 0.07;
        let got = critic_forward(&[1.0, 0.0], &p).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn rejects_empty_sequence() {
        let p = unit_params();
        assert!(critic_forward(&[], &p).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(52);
        let params = CriticParams::init(CriticConfig { horizon: 4, hidden: 3 }, &mut rng).unwrap();
        let seq = [0.3, -0.5, 0.2, 0.7];

        let loss_of = |p: &CriticParams| critic_forward(&seq, p).unwrap();

        let mut graph = Graph::new();
        let s = graph.leaf(Array2::from_shape_vec((1, 4), seq.to_vec()).unwrap());
        let leaves = params.insert_leaves(&mut graph);
        let score = build_critic_forward(&mut graph, s, &leaves).unwrap();
        let grads = graph.backward(score).unwrap();
        let ids = leaves.ordered();

        let h = 1e-6;
        let names: Vec<String> = params.named_tensors().iter().map(|(n, _)| n.clone()).collect();
        for (t, name) in names.iter().enumerate() {
            let shape = params.named_tensors()[t].1.dim();
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let mut plus = params.clone();
                    plus.named_tensors_mut()[t].1[[i, j]] += h;
                    let mut minus = params.clone();
                    minus.named_tensors_mut()[t].1[[i, j]] -= h;
                    let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                    let analytic = grads[ids[t]][[i, j]];
                    let denom = analytic.abs().max(numeric.abs()).max(1.0);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "{name}[{i},{j}]: analytic {analytic} vs numeric {numeric}"
                    );
                }
            }
        }
    }
}
