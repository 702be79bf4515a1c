//! Minimal reverse-mode automatic differentiation over `f64` matrices.
//!
//! The networks here are small and rebuilt per step, so the graph is a plain
//! append-only tape: construction order is already a topological order, and
//! `backward` walks it in reverse. Row vectors are 1 x C matrices, column
//! vectors W x 1.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Epsilon inside layer normalization denominators.
pub const LAYER_NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Neg(NodeId),
    Exp(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Abs(NodeId),
    SoftmaxRows(NodeId),
    SoftmaxCols(NodeId),
    LayerNormCols {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
    },
    ConcatCols(NodeId, NodeId),
    LastRow(NodeId),
    BroadcastRows(NodeId, usize),
    Im2ColCausal {
        x: NodeId,
        taps: usize,
        dilation: usize,
    },
    WeightNormCols {
        v: NodeId,
        g: NodeId,
    },
    Transpose(NodeId),
    Element(NodeId, usize, usize),
    Mean(NodeId),
    Sum(NodeId),
}

/// Append-only computation tape.
pub struct Graph {
    values: Vec<Array2<f64>>,
    ops: Vec<Op>,
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.values[id]
    }

    /// Scalar value of a 1 x 1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.values[id][[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        if self.values[a].dim() != self.values[b].dim() {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.values[a].dim(),
                self.values[b].dim()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let v = &self.values[a] + &self.values[b];
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "sub")?;
        let v = &self.values[a] - &self.values[b];
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "mul")?;
        let v = &self.values[a] * &self.values[b];
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.values[a].ncols() != self.values[b].nrows() {
            return Err(Error::Shape(format!(
                "matmul: {:?} x {:?}",
                self.values[a].dim(),
                self.values[b].dim()
            )));
        }
        let v = self.values[a].dot(&self.values[b]);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.values[a] * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = &self.values[a] + c;
        self.push(v, Op::AddScalar(a, c))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -&self.values[a];
        self.push(v, Op::Neg(a))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].mapv(f64::abs);
        self.push(v, Op::Abs(a))
    }

    /// Softmax along each row (axis 1).
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.values[a].clone();
        for mut row in v.rows_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Softmax along each column (axis 0).
    pub fn softmax_cols(&mut self, a: NodeId) -> NodeId {
        let mut v = self.values[a].clone();
        for mut col in v.columns_mut() {
            let m = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            col.mapv_inplace(|x| (x - m).exp());
            let s = col.sum();
            col.mapv_inplace(|x| x / s);
        }
        self.push(v, Op::SoftmaxCols(a))
    }

    /// Layer normalization of each column over the row axis, with learnable
    /// per-row gain and bias (both W x 1) shared across columns.
    pub fn layer_norm_cols(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.values[x].dim();
        if rows < 2 {
            return Err(Error::Shape(format!(
                "layer_norm_cols: need at least 2 rows, got {rows}"
            )));
        }
        for (name, id) in [("gain", gain), ("bias", bias)] {
            if self.values[id].dim() != (rows, 1) {
                return Err(Error::Shape(format!(
                    "layer_norm_cols: {name} must be {rows}x1, got {:?}",
                    self.values[id].dim()
                )));
            }
        }
        let mut out = Array2::zeros((rows, cols));
        for k in 0..cols {
            let col = self.values[x].column(k);
            let mean = col.sum() / rows as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for w in 0..rows {
                let xhat = (col[w] - mean) * inv;
                out[[w, k]] = self.values[gain][[w, 0]] * xhat + self.values[bias][[w, 0]];
            }
        }
        Ok(self.push(out, Op::LayerNormCols { x, gain, bias }))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.values[a].nrows() != self.values[b].nrows() {
            return Err(Error::Shape(format!(
                "concat_cols: {:?} vs {:?}",
                self.values[a].dim(),
                self.values[b].dim()
            )));
        }
        let v = ndarray::concatenate(Axis(1), &[self.values[a].view(), self.values[b].view()])
            .expect("row counts checked");
        Ok(self.push(v, Op::ConcatCols(a, b)))
    }

    /// Select the final row as a 1 x C matrix.
    pub fn last_row(&mut self, a: NodeId) -> NodeId {
        let last = self.values[a].nrows() - 1;
        let v = self.values[a].row(last).insert_axis(Axis(0)).to_owned();
        self.push(v, Op::LastRow(a))
    }

    /// Repeat a 1 x C row n times.
    pub fn broadcast_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId> {
        if self.values[a].nrows() != 1 {
            return Err(Error::Shape("broadcast_rows: input must be 1 x C".into()));
        }
        let row = self.values[a].row(0).to_owned();
        let v = Array2::from_shape_fn((n, row.len()), |(_, j)| row[j]);
        Ok(self.push(v, Op::BroadcastRows(a, n)))
    }

    /// Causal gather for a dilated convolution: output row w concatenates the
    /// input rows at w - (taps-1-i)*dilation for tap i, zero-padded on the
    /// left, so position w never sees rows after w.
    pub fn im2col_causal(&mut self, x: NodeId, taps: usize, dilation: usize) -> Result<NodeId> {
        if taps == 0 || dilation == 0 {
            return Err(Error::Shape("im2col: taps and dilation must be >= 1".into()));
        }
        let (rows, cols) = self.values[x].dim();
        let mut v = Array2::zeros((rows, taps * cols));
        for w in 0..rows {
            for i in 0..taps {
                let offset = (taps - 1 - i) * dilation;
                if w >= offset {
                    let src = w - offset;
                    for c in 0..cols {
                        v[[w, i * cols + c]] = self.values[x][[src, c]];
                    }
                }
            }
        }
        Ok(self.push(v, Op::Im2ColCausal { x, taps, dilation }))
    }

    /// Weight normalization per column: w[:,j] = g[0,j] * v[:,j] / ||v[:,j]||.
    pub fn weight_norm_cols(&mut self, v: NodeId, g: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.values[v].dim();
        if self.values[g].dim() != (1, cols) {
            return Err(Error::Shape(format!(
                "weight_norm_cols: g must be 1x{cols}, got {:?}",
                self.values[g].dim()
            )));
        }
        let mut out = Array2::zeros((rows, cols));
        for j in 0..cols {
            let norm = col_norm(&self.values[v], j);
            let scale = self.values[g][[0, j]] / norm;
            for i in 0..rows {
                out[[i, j]] = self.values[v][[i, j]] * scale;
            }
        }
        Ok(self.push(out, Op::WeightNormCols { v, g }))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    /// Extract one entry as a 1 x 1 node.
    pub fn element(&mut self, a: NodeId, i: usize, j: usize) -> Result<NodeId> {
        let (rows, cols) = self.values[a].dim();
        if i >= rows || j >= cols {
            return Err(Error::Shape(format!(
                "element ({i},{j}) out of bounds for {rows}x{cols}"
            )));
        }
        let v = Array2::from_elem((1, 1), self.values[a][[i, j]]);
        Ok(self.push(v, Op::Element(a, i, j)))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.values[a].len() as f64;
        let v = Array2::from_elem((1, 1), self.values[a].sum() / n);
        self.push(v, Op::Mean(a))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Array2::from_elem((1, 1), self.values[a].sum());
        self.push(v, Op::Sum(a))
    }

    /// Mean of several 1 x 1 nodes (a batch reduction).
    pub fn mean_of(&mut self, ids: &[NodeId]) -> Result<NodeId> {
        if ids.is_empty() {
            return Err(Error::Batch("mean_of: empty batch".into()));
        }
        let mut acc = ids[0];
        for &id in &ids[1..] {
            acc = self.add(acc, id)?;
        }
        Ok(self.scale(acc, 1.0 / ids.len() as f64))
    }

    /// Reverse-mode sweep from a scalar root; returns one gradient per node.
    pub fn backward(&self, root: NodeId) -> Result<Vec<Array2<f64>>> {
        if self.values[root].dim() != (1, 1) {
            return Err(Error::Shape(format!(
                "backward root must be 1x1, got {:?}",
                self.values[root].dim()
            )));
        }
        let mut grads: Vec<Array2<f64>> = self
            .values
            .iter()
            .map(|v| Array2::zeros(v.dim()))
            .collect();
        grads[root][[0, 0]] = 1.0;

        for id in (0..=root).rev() {
            if grads[id].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            match self.ops[id] {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    grads[a] += &g;
                    grads[b] += &g;
                }
                Op::Sub(a, b) => {
                    grads[a] += &g;
                    grads[b] -= &g;
                }
                Op::Mul(a, b) => {
                    let da = &g * &self.values[b];
                    let db = &g * &self.values[a];
                    grads[a] += &da;
                    grads[b] += &db;
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.values[b].t());
                    let db = self.values[a].t().dot(&g);
                    grads[a] += &da;
                    grads[b] += &db;
                }
                Op::Scale(a, c) => {
                    grads[a].scaled_add(c, &g);
                }
                Op::AddScalar(a, _) => {
                    grads[a] += &g;
                }
                Op::Neg(a) => {
                    grads[a] -= &g;
                }
                Op::Exp(a) => {
                    let da = &g * &self.values[id];
                    grads[a] += &da;
                }
                Op::Relu(a) => {
                    let da = ndarray::Zip::from(&g)
                        .and(&self.values[a])
                        .map_collect(|&gi, &xi| if xi > 0.0 { gi } else { 0.0 });
                    grads[a] += &da;
                }
                Op::Sigmoid(a) => {
                    let da = ndarray::Zip::from(&g)
                        .and(&self.values[id])
                        .map_collect(|&gi, &yi| gi * yi * (1.0 - yi));
                    grads[a] += &da;
                }
                Op::Tanh(a) => {
                    let da = ndarray::Zip::from(&g)
                        .and(&self.values[id])
                        .map_collect(|&gi, &yi| gi * (1.0 - yi * yi));
                    grads[a] += &da;
                }
                Op::Abs(a) => {
                    let da = ndarray::Zip::from(&g)
                        .and(&self.values[a])
                        .map_collect(|&gi, &xi| gi * xi.signum());
                    grads[a] += &da;
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.values[id];
                    let mut da = Array2::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|c| g[[r, c]] * y[[r, c]]).sum();
                        for c in 0..y.ncols() {
                            da[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    grads[a] += &da;
                }
                Op::SoftmaxCols(a) => {
                    let y = &self.values[id];
                    let mut da = Array2::zeros(y.dim());
                    for c in 0..y.ncols() {
                        let dot: f64 = (0..y.nrows()).map(|r| g[[r, c]] * y[[r, c]]).sum();
                        for r in 0..y.nrows() {
                            da[[r, c]] = y[[r, c]] * (g[[r, c]] - dot);
                        }
                    }
                    grads[a] += &da;
                }
                Op::LayerNormCols { x, gain, bias } => {
                    let xv = &self.values[x];
                    let (rows, cols) = xv.dim();
                    let mut dx = Array2::zeros((rows, cols));
                    let mut dgain = Array2::zeros((rows, 1));
                    let mut dbias = Array2::zeros((rows, 1));
                    for k in 0..cols {
                        let col = xv.column(k);
                        let mean = col.sum() / rows as f64;
                        let var =
                            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let xhat: Vec<f64> = col.iter().map(|v| (v - mean) * inv).collect();
                        let gy: Vec<f64> = (0..rows)
                            .map(|w| g[[w, k]] * self.values[gain][[w, 0]])
                            .collect();
                        let mean_gy = gy.iter().sum::<f64>() / rows as f64;
                        let mean_gy_xhat =
                            gy.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / rows as f64;
                        for w in 0..rows {
                            dgain[[w, 0]] += g[[w, k]] * xhat[w];
                            dbias[[w, 0]] += g[[w, k]];
                            dx[[w, k]] = inv * (gy[w] - mean_gy - xhat[w] * mean_gy_xhat);
                        }
                    }
                    grads[x] += &dx;
                    grads[gain] += &dgain;
                    grads[bias] += &dbias;
                }
                Op::ConcatCols(a, b) => {
                    let na = self.values[a].ncols();
                    let da = g.slice(ndarray::s![.., ..na]).to_owned();
                    let db = g.slice(ndarray::s![.., na..]).to_owned();
                    grads[a] += &da;
                    grads[b] += &db;
                }
                Op::LastRow(a) => {
                    let last = self.values[a].nrows() - 1;
                    for c in 0..g.ncols() {
                        grads[a][[last, c]] += g[[0, c]];
                    }
                }
                Op::BroadcastRows(a, _) => {
                    let da = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    grads[a] += &da;
                }
                Op::Im2ColCausal { x, taps, dilation } => {
                    let cols = self.values[x].ncols();
                    let rows = self.values[x].nrows();
                    let mut dx = Array2::zeros((rows, cols));
                    for w in 0..rows {
                        for i in 0..taps {
                            let offset = (taps - 1 - i) * dilation;
                            if w >= offset {
                                let src = w - offset;
                                for c in 0..cols {
                                    dx[[src, c]] += g[[w, i * cols + c]];
                                }
                            }
                        }
                    }
                    grads[x] += &dx;
                }
                Op::WeightNormCols { v, g: gid } => {
                    let vv = &self.values[v];
                    let (rows, cols) = vv.dim();
                    let mut dv = Array2::zeros((rows, cols));
                    let mut dg = Array2::zeros((1, cols));
                    for j in 0..cols {
                        let norm = col_norm(vv, j);
                        let gj = self.values[gid][[0, j]];
                        let mut dot = 0.0;
                        for i in 0..rows {
                            dot += g[[i, j]] * vv[[i, j]];
                        }
                        dg[[0, j]] = dot / norm;
                        let k = gj / norm;
                        let proj = dot / (norm * norm);
                        for i in 0..rows {
                            dv[[i, j]] = k * (g[[i, j]] - proj * vv[[i, j]]);
                        }
                    }
                    grads[v] += &dv;
                    grads[gid] += &dg;
                }
                Op::Transpose(a) => {
                    let da = g.t().to_owned();
                    grads[a] += &da;
                }
                Op::Element(a, i, j) => {
                    grads[a][[i, j]] += g[[0, 0]];
                }
                Op::Mean(a) => {
                    let n = self.values[a].len() as f64;
                    grads[a] += g[[0, 0]] / n;
                }
                Op::Sum(a) => {
                    grads[a] += g[[0, 0]];
                }
            }
        }
        Ok(grads)
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn col_norm(m: &Array2<f64>, j: usize) -> f64 {
    let n: f64 = m.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
    n.max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    /// Central finite differences against analytic gradients for an
    /// arbitrary scalar-valued graph builder.
    fn check_grad<F>(build: F, inputs: &[Array2<f64>], tol: f64)
    where
        F: Fn(&mut Graph, &[NodeId]) -> NodeId,
    {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|v| g.leaf(v.clone())).collect();
        let root = build(&mut g, &ids);
        let grads = g.backward(root).unwrap();

        let h = 1e-6;
        for (which, input) in inputs.iter().enumerate() {
            for i in 0..input.nrows() {
                for j in 0..input.ncols() {
                    let eval = |delta: f64| {
                        let mut pert = inputs.to_vec();
                        pert[which][[i, j]] += delta;
                        let mut g2 = Graph::new();
                        let ids2: Vec<NodeId> = pert.iter().map(|v| g2.leaf(v.clone())).collect();
                        let root2 = build(&mut g2, &ids2);
                        g2.scalar(root2)
                    };
                    let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                    let analytic = grads[ids[which]][[i, j]];
                    let denom = analytic.abs().max(numeric.abs()).max(1.0);
                    assert!(
                        (analytic - numeric).abs() / denom < tol,
                        "input {which} [{i},{j}]: analytic {analytic} vs numeric {numeric}"
                    );
                }
            }
        }
    }

    fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn elementwise_op_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 3, 4);
        check_grad(
            |g, ids| {
                let s = g.add(ids[0], ids[1]).unwrap();
                let m = g.mul(s, ids[0]).unwrap();
                let e = g.exp(m);
                let t = g.tanh(e);
                let sg = g.sigmoid(t);
                g.mean(sg)
            },
            &[a, b],
            1e-6,
        );
    }

    #[test]
    fn matmul_softmax_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let a = random_matrix(&mut rng, 3, 5);
        let b = random_matrix(&mut rng, 5, 4);
        check_grad(
            |g, ids| {
                let mm = g.matmul(ids[0], ids[1]).unwrap();
                let sr = g.softmax_rows(mm);
                let sc = g.softmax_cols(sr);
                g.sum(sc)
            },
            &[a, b],
            1e-6,
        );
    }

    #[test]
    fn layer_norm_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let x = random_matrix(&mut rng, 5, 3);
        let gain = random_matrix(&mut rng, 5, 1);
        let bias = random_matrix(&mut rng, 5, 1);
        check_grad(
            |g, ids| {
                let ln = g.layer_norm_cols(ids[0], ids[1], ids[2]).unwrap();
                let sq = g.mul(ln, ln).unwrap();
                g.mean(sq)
            },
            &[x, gain, bias],
            1e-5,
        );
    }

    #[test]
    fn conv_and_weight_norm_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let x = random_matrix(&mut rng, 6, 2);
        let v = random_matrix(&mut rng, 2 * 2, 3);
        let gn = random_matrix(&mut rng, 1, 3);
        check_grad(
            |g, ids| {
                let cols = g.im2col_causal(ids[0], 2, 2).unwrap();
                let w = g.weight_norm_cols(ids[1], ids[2]).unwrap();
                let y = g.matmul(cols, w).unwrap();
                let r = g.relu(y);
                g.mean(r)
            },
            &[x, v, gn],
            1e-5,
        );
    }

    #[test]
    fn structural_op_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let a = random_matrix(&mut rng, 4, 3);
        let b = random_matrix(&mut rng, 4, 1);
        let c = random_matrix(&mut rng, 1, 4);
        check_grad(
            |g, ids| {
                let cat = g.concat_cols(ids[0], ids[1]).unwrap();
                let bc = g.broadcast_rows(ids[2], 4).unwrap();
                let s = g.add(cat, bc).unwrap();
                let lr = g.last_row(s);
                let ab = g.abs(lr);
                g.sum(ab)
            },
            &[a, b, c],
            1e-6,
        );
    }

    #[test]
    fn transpose_and_element_gradients() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 3, 2);
        check_grad(
            |g, ids| {
                let at = g.transpose(ids[0]);
                let mm = g.matmul(at, ids[1]).unwrap();
                let e = g.element(mm, 2, 1).unwrap();
                let s = g.sigmoid(e);
                g.sum(s)
            },
            &[a, b],
            1e-6,
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let a = g.leaf(arr2(&[[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]));
        let s = g.softmax_rows(a);
        for row in g.value(s).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn im2col_is_causal() {
        let mut g = Graph::new();
        let x = g.leaf(arr2(&[[1.0], [2.0], [3.0], [4.0]]));
        let c = g.im2col_causal(x, 2, 2).unwrap();
        // taps at offsets {2, 0}: row w = [x[w-2], x[w]] with zero padding
        let expect = arr2(&[[0.0, 1.0], [0.0, 2.0], [1.0, 3.0], [2.0, 4.0]]);
        assert_eq!(g.value(c), &expect);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut g = Graph::new();
        let a = g.leaf(arr2(&[[1.0, 2.0]]));
        assert!(g.backward(a).is_err());
    }
}
