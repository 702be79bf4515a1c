//! The sequence generator: risk enhancement, an appended noise channel,
//! sinusoidal positional encoding, multi-head self-attention over time, a
//! stack of dilated causal convolutions, and a linear head reading the last
//! time step.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::risk::{build_risk_enhance, RiskParams};

/// Shape hyperparameters of the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Input window length W.
    pub window: usize,
    /// Feature count K (before the noise channel is appended).
    pub features: usize,
    /// Output horizon H.
    pub horizon: usize,
    /// Attention heads D.
    pub heads: usize,
    /// Per-head width d_k.
    pub head_dim: usize,
    /// Dilated convolution layers L (layer l uses dilation 2^(l-1)).
    pub tcn_layers: usize,
    /// Convolution kernel size p.
    pub kernel: usize,
    /// Convolution channel width.
    pub hidden: usize,
}

impl GeneratorConfig {
    /// Channels entering the temporal module: features plus the noise column.
    pub fn channels(&self) -> usize {
        self.features + 1
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("window", self.window),
            ("features", self.features),
            ("horizon", self.horizon),
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("tcn_layers", self.tcn_layers),
            ("kernel", self.kernel),
            ("hidden", self.hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("generator config: {name} must be >= 1")));
            }
        }
        if self.window < 2 {
            return Err(Error::Config("generator config: window must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHeadParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcnLayerParams {
    /// Unnormalized kernel, (kernel * in_channels) x hidden.
    pub kernel_v: Array2<f64>,
    /// Per-output-channel weight-norm gains, 1 x hidden.
    pub kernel_g: Array2<f64>,
    /// 1 x hidden bias.
    pub bias: Array2<f64>,
    /// 1x1 projection for the residual path when channel counts differ.
    pub residual: Option<Array2<f64>>,
}

/// All trainable state of the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub config: GeneratorConfig,
    pub risk: RiskParams,
    /// Layer-norm affine of the risk module, W x 1 each.
    pub ln_gain: Array2<f64>,
    pub ln_bias: Array2<f64>,
    pub attention: Vec<AttentionHeadParams>,
    /// Output projection, (D * d_k) x channels.
    pub attn_out: Array2<f64>,
    pub tcn: Vec<TcnLayerParams>,
    /// hidden x H output head.
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Array2<f64> {
    let dist = Normal::new(0.0, std).expect("std is finite");
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

impl GeneratorParams {
    /// Random initialization; weight-norm gains start at the column norms so
    /// the effective kernels equal their unnormalized values.
    pub fn init<R: Rng>(config: GeneratorConfig, risk: RiskParams, rng: &mut R) -> Result<Self> {
        config.validate()?;
        risk.validate()?;
        if risk.features() != config.features {
            return Err(Error::Shape(format!(
                "risk params cover {} features, config has {}",
                risk.features(),
                config.features
            )));
        }
        let c = config.channels();
        let attention = (0..config.heads)
            .map(|_| AttentionHeadParams {
                wq: normal_matrix(rng, c, config.head_dim, 1.0 / (c as f64).sqrt()),
                wk: normal_matrix(rng, c, config.head_dim, 1.0 / (c as f64).sqrt()),
                wv: normal_matrix(rng, c, config.head_dim, 1.0 / (c as f64).sqrt()),
            })
            .collect();
        let attn_out = normal_matrix(
            rng,
            config.heads * config.head_dim,
            c,
            1.0 / ((config.heads * config.head_dim) as f64).sqrt(),
        );
        let mut tcn = Vec::with_capacity(config.tcn_layers);
        for l in 0..config.tcn_layers {
            let in_channels = if l == 0 { c } else { config.hidden };
            let fan_in = config.kernel * in_channels;
            let kernel_v = normal_matrix(rng, fan_in, config.hidden, 1.0 / (fan_in as f64).sqrt());
            let kernel_g = Array2::from_shape_fn((1, config.hidden), |(_, j)| {
                kernel_v.column(j).iter().map(|v| v * v).sum::<f64>().sqrt()
            });
            let residual = (in_channels != config.hidden).then(|| {
                normal_matrix(rng, in_channels, config.hidden, 1.0 / (in_channels as f64).sqrt())
            });
            tcn.push(TcnLayerParams {
                kernel_v,
                kernel_g,
                bias: Array2::zeros((1, config.hidden)),
                residual,
            });
        }
        Ok(GeneratorParams {
            ln_gain: Array2::ones((config.window, 1)),
            ln_bias: Array2::zeros((config.window, 1)),
            attention,
            attn_out,
            tcn,
            head_w: normal_matrix(rng, config.hidden, config.horizon, 0.01),
            head_b: Array2::zeros((1, config.horizon)),
            config,
            risk,
        })
    }

    /// Trainable tensors in a stable order (matches [`GeneratorLeaves`]).
    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("ln_gain".into(), &self.ln_gain),
            ("ln_bias".into(), &self.ln_bias),
        ];
        for (d, head) in self.attention.iter().enumerate() {
            out.push((format!("attn{d}.wq"), &head.wq));
            out.push((format!("attn{d}.wk"), &head.wk));
            out.push((format!("attn{d}.wv"), &head.wv));
        }
        out.push(("attn_out".into(), &self.attn_out));
        for (l, layer) in self.tcn.iter().enumerate() {
            out.push((format!("tcn{l}.kernel_v"), &layer.kernel_v));
            out.push((format!("tcn{l}.kernel_g"), &layer.kernel_g));
            out.push((format!("tcn{l}.bias"), &layer.bias));
            if let Some(residual) = &layer.residual {
                out.push((format!("tcn{l}.residual"), residual));
            }
        }
        out.push(("head_w".into(), &self.head_w));
        out.push(("head_b".into(), &self.head_b));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("ln_gain".into(), &mut self.ln_gain),
            ("ln_bias".into(), &mut self.ln_bias),
        ];
        for (d, head) in self.attention.iter_mut().enumerate() {
            out.push((format!("attn{d}.wq"), &mut head.wq));
            out.push((format!("attn{d}.wk"), &mut head.wk));
            out.push((format!("attn{d}.wv"), &mut head.wv));
        }
        out.push(("attn_out".into(), &mut self.attn_out));
        for (l, layer) in self.tcn.iter_mut().enumerate() {
            out.push((format!("tcn{l}.kernel_v"), &mut layer.kernel_v));
            out.push((format!("tcn{l}.kernel_g"), &mut layer.kernel_g));
            out.push((format!("tcn{l}.bias"), &mut layer.bias));
            if let Some(residual) = &mut layer.residual {
                out.push((format!("tcn{l}.residual"), residual));
            }
        }
        out.push(("head_w".into(), &mut self.head_w));
        out.push(("head_b".into(), &mut self.head_b));
        out
    }

    /// Insert every trainable tensor as a graph leaf.
    pub fn insert_leaves(&self, graph: &mut Graph) -> GeneratorLeaves {
        GeneratorLeaves {
            ln_gain: graph.leaf(self.ln_gain.clone()),
            ln_bias: graph.leaf(self.ln_bias.clone()),
            attention: self
                .attention
                .iter()
                .map(|h| AttentionHeadLeaves {
                    wq: graph.leaf(h.wq.clone()),
                    wk: graph.leaf(h.wk.clone()),
                    wv: graph.leaf(h.wv.clone()),
                })
                .collect(),
            attn_out: graph.leaf(self.attn_out.clone()),
            tcn: self
                .tcn
                .iter()
                .map(|l| TcnLayerLeaves {
                    kernel_v: graph.leaf(l.kernel_v.clone()),
                    kernel_g: graph.leaf(l.kernel_g.clone()),
                    bias: graph.leaf(l.bias.clone()),
                    residual: l.residual.as_ref().map(|r| graph.leaf(r.clone())),
                })
                .collect(),
            head_w: graph.leaf(self.head_w.clone()),
            head_b: graph.leaf(self.head_b.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionHeadLeaves {
    pub wq: NodeId,
    pub wk: NodeId,
    pub wv: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct TcnLayerLeaves {
    pub kernel_v: NodeId,
    pub kernel_g: NodeId,
    pub bias: NodeId,
    pub residual: Option<NodeId>,
}

/// Node ids of the generator's trainable tensors inside one graph.
#[derive(Debug, Clone)]
pub struct GeneratorLeaves {
    pub ln_gain: NodeId,
    pub ln_bias: NodeId,
    pub attention: Vec<AttentionHeadLeaves>,
    pub attn_out: NodeId,
    pub tcn: Vec<TcnLayerLeaves>,
    pub head_w: NodeId,
    pub head_b: NodeId,
}

impl GeneratorLeaves {
    /// Leaf ids in the same order as [`GeneratorParams::named_tensors`].
    pub fn ordered(&self) -> Vec<NodeId> {
        let mut out = vec![self.ln_gain, self.ln_bias];
        for head in &self.attention {
            out.extend([head.wq, head.wk, head.wv]);
        }
        out.push(self.attn_out);
        for layer in &self.tcn {
            out.extend([layer.kernel_v, layer.kernel_g, layer.bias]);
            if let Some(residual) = layer.residual {
                out.push(residual);
            }
        }
        out.extend([self.head_w, self.head_b]);
        out
    }
}

/// A W-vector of i.i.d. uniform noise on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub z: Vec<f64>,
}

/// Draw a noise sample; identical RNG state yields identical output.
pub fn sample_noise<R: Rng>(rng: &mut R, window: usize) -> NoiseSample {
    NoiseSample {
        z: (0..window).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    }
}

/// Standard sinusoidal positional encoding:
/// PE(w, 2i) = sin(w / 10000^(2i/K)), PE(w, 2i+1) = cos(w / 10000^(2i/K)).
pub fn positional_encoding(window: usize, channels: usize) -> Result<Array2<f64>> {
    if channels < 2 {
        return Err(Error::Shape(format!(
            "positional encoding needs K >= 2, got {channels}"
        )));
    }
    Ok(Array2::from_shape_fn((window, channels), |(w, j)| {
        let i = j / 2;
        let rate = f64::powf(10000.0, 2.0 * i as f64 / channels as f64);
        let angle = w as f64 / rate;
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

/// Multi-head self-attention with a residual connection:
/// s = x + [softmax(q_d k_d^T / sqrt(d_k)) v_d]_{d=1..D} W_out.
pub fn build_attention(
    graph: &mut Graph,
    x: NodeId,
    heads: &[AttentionHeadLeaves],
    attn_out: NodeId,
    head_dim: usize,
) -> Result<NodeId> {
    if heads.is_empty() {
        return Err(Error::Shape("attention requires at least one head".into()));
    }
    let mut concat: Option<NodeId> = None;
    for head in heads {
        let q = graph.matmul(x, head.wq)?;
        let k = graph.matmul(x, head.wk)?;
        let v = graph.matmul(x, head.wv)?;
        let kt = graph.transpose(k);
        let scores = graph.matmul(q, kt)?;
        let scaled = graph.scale(scores, 1.0 / (head_dim as f64).sqrt());
        let weights = graph.softmax_rows(scaled);
        let out = graph.matmul(weights, v)?;
        concat = Some(match concat {
            None => out,
            Some(prev) => graph.concat_cols(prev, out)?,
        });
    }
    let projected = graph.matmul(concat.expect("at least one head"), attn_out)?;
    graph.add(x, projected)
}

/// Stack of causal dilated convolution layers; layer l uses dilation 2^(l-1),
/// weight-normalized kernels, a residual connection (1x1-projected when the
/// channel count changes), and a rectified-linear activation.
pub fn build_tcn(
    graph: &mut Graph,
    x: NodeId,
    layers: &[TcnLayerLeaves],
    kernel: usize,
) -> Result<NodeId> {
    let window = graph.value(x).nrows();
    let mut current = x;
    for (l, layer) in layers.iter().enumerate() {
        let dilation = 1usize << l;
        let cols = graph.im2col_causal(current, kernel, dilation)?;
        let w = graph.weight_norm_cols(layer.kernel_v, layer.kernel_g)?;
        let conv = graph.matmul(cols, w)?;
        let bias = graph.broadcast_rows(layer.bias, window)?;
        let conv = graph.add(conv, bias)?;
        let res = match layer.residual {
            Some(proj) => graph.matmul(current, proj)?,
            None => current,
        };
        let summed = graph.add(conv, res)?;
        current = graph.relu(summed);
    }
    Ok(current)
}

/// Full generator forward pass inside an existing graph. `x` is the W x K
/// feature window, `z` the W x 1 noise column. With `risk_enabled` off the
/// risk module is bypassed (features pass through unenhanced).
pub fn build_generator_forward(
    graph: &mut Graph,
    x: NodeId,
    z: NodeId,
    params: &GeneratorParams,
    leaves: &GeneratorLeaves,
    risk_enabled: bool,
) -> Result<NodeId> {
    let cfg = &params.config;
    let (rows, cols) = graph.value(x).dim();
    if rows != cfg.window || cols != cfg.features {
        return Err(Error::Shape(format!(
            "generator input {rows}x{cols}, expected {}x{}",
            cfg.window, cfg.features
        )));
    }
    if graph.value(z).dim() != (cfg.window, 1) {
        return Err(Error::Shape(format!(
            "noise must be {}x1, got {:?}",
            cfg.window,
            graph.value(z).dim()
        )));
    }
    let enhanced = if risk_enabled {
        build_risk_enhance(graph, x, &params.risk, leaves.ln_gain, leaves.ln_bias)?
    } else {
        x
    };
    let with_noise = graph.concat_cols(enhanced, z)?;
    let pe = positional_encoding(cfg.window, cfg.channels())?;
    let pe = graph.leaf(pe);
    let encoded = graph.add(with_noise, pe)?;
    let attended = build_attention(graph, encoded, &leaves.attention, leaves.attn_out, cfg.head_dim)?;
    let temporal = build_tcn(graph, attended, &leaves.tcn, cfg.kernel)?;
    let last = graph.last_row(temporal);
    let projected = graph.matmul(last, leaves.head_w)?;
    graph.add(projected, leaves.head_b)
}

/// Convenience single-shot forward pass; returns the H predicted returns.
pub fn generator_forward(
    x: &Array2<f64>,
    noise: &NoiseSample,
    params: &GeneratorParams,
) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("generator input contains non-finite values".into()));
    }
    let mut graph = Graph::new();
    let x_id = graph.leaf(x.clone());
    let z = graph.leaf(Array2::from_shape_vec(
        (noise.z.len(), 1),
        noise.z.clone(),
    )
    .map_err(|e| Error::Shape(e.to_string()))?);
    let leaves = params.insert_leaves(&mut graph);
    let out = build_generator_forward(&mut graph, x_id, z, params, &leaves, true)?;
    let value = graph.value(out);
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("generator produced non-finite output".into()));
    }
    Ok(value.row(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tiny_config() -> GeneratorConfig {
        GeneratorConfig {
            window: 6,
            features: 4,
            horizon: 2,
            heads: 1,
            head_dim: 3,
            tcn_layers: 1,
            kernel: 2,
            hidden: 3,
        }
    }

    fn tiny_params(seed: u64) -> GeneratorParams {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let risk = RiskParams::uniform(vec![false, false, true, true], 0.1, 2.5);
        GeneratorParams::init(tiny_config(), risk, &mut rng).unwrap()
    }

    #[test]
    fn noise_is_deterministic_given_seed() {
        let a = sample_noise(&mut ChaCha12Rng::seed_from_u64(5), 30);
        let b = sample_noise(&mut ChaCha12Rng::seed_from_u64(5), 30);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_support_and_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let sample = sample_noise(&mut rng, 1_000_000);
        assert!(sample.z.iter().all(|&z| (-1.0..=1.0).contains(&z)));
        let mean = sample.z.iter().sum::<f64>() / sample.z.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn positional_encoding_basics() {
        let pe = positional_encoding(8, 4).unwrap();
        // position 0: sin terms 0, cos terms 1
        for j in 0..4 {
            let expect = if j % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(pe[[0, j]], expect);
        }
        assert!(pe.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        assert_relative_eq!(pe[[1, 0]], 1.0f64.sin(), max_relative = 1e-12);
        assert!(positional_encoding(8, 1).is_err());
    }

    #[test]
    fn attention_rows_are_normalized_and_residual_identity_holds() {
        let params = tiny_params(31);
        let mut graph = Graph::new();
        let x = graph.leaf(Array2::from_shape_fn((6, 5), |(i, j)| {
            ((i * 5 + j) as f64 * 0.37).sin()
        }));
        let leaves = params.insert_leaves(&mut graph);

        // softmax rows of the score matrix sum to 1
        let head = leaves.attention[0];
        let q = graph.matmul(x, head.wq).unwrap();
        let k = graph.matmul(x, head.wk).unwrap();
        let kt = graph.transpose(k);
        let scores = graph.matmul(q, kt).unwrap();
        let scaled = graph.scale(scores, 1.0 / (3.0f64).sqrt());
        let weights = graph.softmax_rows(scaled);
        for row in graph.value(weights).rows() {
            assert_relative_eq!(row.sum(), 1.0, max_relative = 1e-12);
        }

        // zero output projection makes attention the identity
        let zero_out = graph.leaf(Array2::zeros((3, 5)));
        let s = build_attention(&mut graph, x, &leaves.attention, zero_out, 3).unwrap();
        assert_eq!(graph.value(s), graph.value(x));
    }

    #[test]
    fn attention_hand_traced_scalar_case() {
        // W=2, one head, d_k=1, all projections hand-set to 1x1 identities on
        // a single channel; traced with scalar arithmetic.
        let x = arr2(&[[0.3], [-0.1]]);
        let mut graph = Graph::new();
        let x_id = graph.leaf(x.clone());
        let one = graph.leaf(arr2(&[[1.0]]));
        let heads = [AttentionHeadLeaves { wq: one, wk: one, wv: one }];
        let out_proj = graph.leaf(arr2(&[[1.0]]));
        let s = build_attention(&mut graph, x_id, &heads, out_proj, 1).unwrap();

        // q = k = v = x; scores = x x^T; softmax rows; o = weights * v; s = x + o
        let mut expect = [[0.0f64; 1]; 2];
        for i in 0..2 {
            let s0 = x[[i, 0]] * x[[0, 0]];
            let s1 = x[[i, 0]] * x[[1, 0]];
            let m = s0.max(s1);
            let e0 = (s0 - m).exp();
            let e1 = (s1 - m).exp();
            let w0 = e0 / (e0 + e1);
            let w1 = e1 / (e0 + e1);
            expect[i][0] = x[[i, 0]] + w0 * x[[0, 0]] + w1 * x[[1, 0]];
        }
        for i in 0..2 {
            assert_relative_eq!(graph.value(s)[[i, 0]], expect[i][0], max_relative = 1e-12);
        }
    }

    #[test]
    fn tcn_identity_tap_projects_input() {
        // Single layer, kernel p=1 on two input channels, one output channel:
        // kernel picks channel 0 with unit weight, residual projection zeroed,
        // so the output is exactly the (non-negative) first input channel.
        let mut graph = Graph::new();
        let x = graph.leaf(arr2(&[[0.5, 9.0], [0.2, -3.0], [0.8, 1.0], [0.1, 4.0]]));
        let kernel_v = graph.leaf(arr2(&[[1.0], [0.0]]));
        let kernel_g = graph.leaf(arr2(&[[1.0]]));
        let bias = graph.leaf(arr2(&[[0.0]]));
        let residual = graph.leaf(arr2(&[[0.0], [0.0]]));
        let layers = [TcnLayerLeaves {
            kernel_v,
            kernel_g,
            bias,
            residual: Some(residual),
        }];
        let out = build_tcn(&mut graph, x, &layers, 1).unwrap();
        let expect = arr2(&[[0.5], [0.2], [0.8], [0.1]]);
        for i in 0..4 {
            assert_relative_eq!(graph.value(out)[[i, 0]], expect[[i, 0]], max_relative = 1e-12);
        }
    }

    #[test]
    fn tcn_matches_brute_force_convolution() {
        // L=2, p=2, scalar channels, W=4, hand-set kernels. The oracle below
        // enumerates the dilated convolution + residual + relu stack directly.
        let x = [0.4, -0.3, 0.9, 0.2];
        let k1 = [0.5, -1.2]; // taps: [w-1, w]
        let k2 = [0.7, 0.3]; // dilation 2 taps: [w-2, w]
        let b1 = 0.1;
        let b2 = -0.05;

        let mut oracle1 = [0.0f64; 4];
        for w in 0..4 {
            let prev = if w >= 1 { x[w - 1] } else { 0.0 };
            oracle1[w] = (k1[0] * prev + k1[1] * x[w] + b1 + x[w]).max(0.0);
        }
        let mut oracle2 = [0.0f64; 4];
        for w in 0..4 {
            let prev = if w >= 2 { oracle1[w - 2] } else { 0.0 };
            oracle2[w] = (k2[0] * prev + k2[1] * oracle1[w] + b2 + oracle1[w]).max(0.0);
        }

        let mut graph = Graph::new();
        let x_id = graph.leaf(Array2::from_shape_vec((4, 1), x.to_vec()).unwrap());
        // kernel_g set to the column norm so the effective kernel equals v
        let mk_layer = |graph: &mut Graph, k: [f64; 2], b: f64| {
            let norm = (k[0] * k[0] + k[1] * k[1]).sqrt();
            TcnLayerLeaves {
                kernel_v: graph.leaf(arr2(&[[k[0]], [k[1]]])),
                kernel_g: graph.leaf(arr2(&[[norm]])),
                bias: graph.leaf(arr2(&[[b]])),
                residual: None,
            }
        };
        let layers = [mk_layer(&mut graph, k1, b1), mk_layer(&mut graph, k2, b2)];
        let out = build_tcn(&mut graph, x_id, &layers, 2).unwrap();
        for w in 0..4 {
            assert_relative_eq!(graph.value(out)[[w, 0]], oracle2[w], max_relative = 1e-12);
        }
    }

    #[test]
    fn generator_output_has_horizon_length() {
        let params = tiny_params(32);
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i + j) as f64 * 0.21).cos());
        let noise = sample_noise(&mut ChaCha12Rng::seed_from_u64(9), 6);
        let y = generator_forward(&x, &noise, &params).unwrap();
        assert_eq!(y.len(), 2);
        assert!(y.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_head_makes_generator_zero() {
        let mut params = tiny_params(33);
        params.head_w.fill(0.0);
        params.head_b.fill(0.0);
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * j) as f64 * 0.11).sin());
        let noise = sample_noise(&mut ChaCha12Rng::seed_from_u64(10), 6);
        let y = generator_forward(&x, &noise, &params).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_is_deterministic() {
        let params = tiny_params(34);
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i + 2 * j) as f64 * 0.17).sin());
        let noise = sample_noise(&mut ChaCha12Rng::seed_from_u64(11), 6);
        let a = generator_forward(&x, &noise, &params).unwrap();
        let b = generator_forward(&x, &noise, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_is_causal_through_the_tcn() {
        // Perturbing the input at time w must leave TCN activations at
        // earlier positions unchanged. Attention mixes all positions, so
        // causality is asserted on the temporal stack itself.
        let params = tiny_params(35);
        let x = Array2::from_shape_fn((6, 5), |(i, j)| ((i * 3 + j) as f64 * 0.29).sin());

        let run_tcn = |input: &Array2<f64>| -> Array2<f64> {
            let mut graph = Graph::new();
            let x_id = graph.leaf(input.clone());
            let leaves = params.insert_leaves(&mut graph);
            let out = build_tcn(&mut graph, x_id, &leaves.tcn, params.config.kernel).unwrap();
            graph.value(out).clone()
        };

        let base = run_tcn(&x);
        for w in 1..6 {
            let mut perturbed = x.clone();
            perturbed[[w, 2]] += 0.5;
            let got = run_tcn(&perturbed);
            for earlier in 0..w {
                for c in 0..base.ncols() {
                    assert_eq!(
                        got[[earlier, c]],
                        base[[earlier, c]],
                        "position {earlier} changed by a perturbation at {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn shape_contract_across_configs() {
        for (heads, head_dim, layers, kernel, hidden) in
            [(1, 2, 1, 2, 3), (2, 8, 2, 5, 10), (3, 4, 3, 3, 7)]
        {
            let config = GeneratorConfig {
                window: 12,
                features: 6,
                horizon: 4,
                heads,
                head_dim,
                tcn_layers: layers,
                kernel,
                hidden,
            };
            let mut rng = ChaCha12Rng::seed_from_u64(40 + heads as u64);
            let risk = RiskParams::uniform(vec![false, false, false, false, true, true], 0.1, 2.0);
            let params = GeneratorParams::init(config, risk, &mut rng).unwrap();
            let x = Array2::from_shape_fn((12, 6), |(i, j)| ((i + j) as f64 * 0.13).sin());
            let noise = sample_noise(&mut rng, 12);
            let y = generator_forward(&x, &noise, &params).unwrap();
            assert_eq!(y.len(), 4);
        }
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        // Tiny configuration: W=6, K=4, H=2, D=1, L=1, hidden=3. A scalar
        // loss of the forward output is differentiated with respect to every
        // trainable tensor and compared against central differences.
        let params = tiny_params(36);
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * 4 + j) as f64 * 0.23).sin() * 0.5);
        let z = Array2::from_shape_fn((6, 1), |(i, _)| ((i as f64) * 0.41).cos() * 0.8);

        let loss_of = |p: &GeneratorParams| -> f64 {
            let mut graph = Graph::new();
            let x_id = graph.leaf(x.clone());
            let z_id = graph.leaf(z.clone());
            let leaves = p.insert_leaves(&mut graph);
            let y = build_generator_forward(&mut graph, x_id, z_id, p, &leaves, true).unwrap();
            let sq = graph.mul(y, y).unwrap();
            let root = graph.mean(sq);
            graph.scalar(root)
        };

        let mut graph = Graph::new();
        let x_id = graph.leaf(x.clone());
        let z_id = graph.leaf(z.clone());
        let leaves = params.insert_leaves(&mut graph);
        let y = build_generator_forward(&mut graph, x_id, z_id, &params, &leaves, true).unwrap();
        let sq = graph.mul(y, y).unwrap();
        let root = graph.mean(sq);
        let grads = graph.backward(root).unwrap();
        let leaf_ids = leaves.ordered();

        let h = 1e-6;
        let names: Vec<String> = params.named_tensors().iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(names.len(), leaf_ids.len());
        for (t, name) in names.iter().enumerate() {
            let shape = params.named_tensors()[t].1.dim();
            for i in 0..shape.0 {
                for j in 0..shape.1 {
                    let mut plus = params.clone();
                    plus.named_tensors_mut()[t].1[[i, j]] += h;
                    let mut minus = params.clone();
                    minus.named_tensors_mut()[t].1[[i, j]] -= h;
                    let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                    let analytic = grads[leaf_ids[t]][[i, j]];
                    let denom = analytic.abs().max(numeric.abs()).max(1.0);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-3,
                        "{name}[{i},{j}]: analytic {analytic} vs numeric {numeric}"
                    );
                }
            }
        }
    }
}
