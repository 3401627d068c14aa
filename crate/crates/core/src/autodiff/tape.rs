//! The recorded-op tape and its reverse pass.
//!
//! Shape rules are strict and violations panic (they are programming
//! errors, not runtime conditions); the one recoverable error is calling
//! [`Tape::backward`] on a non-scalar. Dropout masks draw from the tape's
//! own seeded stream, so a whole forward/backward pass is a pure function
//! of (tape seed, op sequence).

use std::rc::Rc;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("backward requires a scalar (1x1) loss, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },
}

/// Handle to a tensor recorded on a tape.
pub type TId = usize;

/// Immutable CSR sparse matrix; the constant left operand of `spmm`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpMat {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SpMat {
    /// CSR from (row, col, value) triples; triples must be unique.
    pub fn from_triples(rows: usize, cols: usize, triples: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triples.len()).collect();
        order.sort_by_key(|&i| (triples[i].0, triples[i].1));
        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in triples {
            indptr[r + 1] += 1;
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut indices = Vec::with_capacity(triples.len());
        let mut values = Vec::with_capacity(triples.len());
        for &i in &order {
            let (r, c, v) = triples[i];
            assert!(r < rows && c < cols, "spmat triple ({r}, {c}) out of bounds");
            indices.push(c);
            values.push(v);
        }
        SpMat { rows, cols, indptr, indices, values }
    }

    /// self · x (dense result).
    pub fn matmul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, x.nrows(), "spmm: inner dimensions differ");
        let d = x.ncols();
        let mut out = Array2::zeros((self.rows, d));
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let v = self.values[k];
                let src = x.row(c);
                let mut dst = out.row_mut(r);
                for j in 0..d {
                    dst[j] += v * src[j];
                }
            }
        }
        out
    }

    /// selfᵀ · g (dense result); the pullback of `matmul_dense`.
    pub fn transpose_matmul_dense(&self, g: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.rows, g.nrows(), "spmm backward: dimensions differ");
        let d = g.ncols();
        let mut out = Array2::zeros((self.cols, d));
        for r in 0..self.rows {
            let grow = g.row(r);
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let v = self.values[k];
                let mut dst = out.row_mut(c);
                for j in 0..d {
                    dst[j] += v * grow[j];
                }
            }
        }
        out
    }
}

/// Batch-norm running statistics, owned by the layer across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState {
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BnState {
    pub fn new(dim: usize) -> Self {
        BnState {
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: 0.1,
            eps: 1e-5,
        }
    }
}

enum Op {
    Leaf,
    Matmul(TId, TId),
    Spmm(Rc<SpMat>, TId),
    Add(TId, TId),
    /// (n×d) + broadcast of a (1×d) bias row.
    AddBiasRow(TId, TId),
    Scale(TId, f64),
    ConcatCols(Vec<TId>),
    /// Per-segment row sum into (num_segments × d).
    SumSegments(TId, Rc<Vec<usize>>),
    MeanSegments(TId, Rc<Vec<usize>>, Vec<usize>),
    /// Per-segment column-wise max; argmax rows saved for the backward.
    MaxSegments(TId, Vec<usize>),
    Relu(TId),
    LeakyRelu(TId, f64),
    Tanh(TId),
    Mul(TId, TId),
    /// (n×d) ⊙ broadcast of an (n×1) column.
    MulColBroadcast(TId, TId),
    LogSoftmaxRows(TId),
    BatchNorm {
        x: TId,
        gamma: TId,
        beta: TId,
        x_hat: Array2<f64>,
        inv_std: Array1<f64>,
        train: bool,
    },
    /// Mask entries are 0 or 1/(1−p).
    Dropout(TId, Array2<f64>),
    GatherRows(TId, Rc<Vec<usize>>),
    /// Softmax of an (n×1) column within each segment.
    SegmentSoftmax(TId, Rc<Vec<usize>>),
    /// Mean negative log-likelihood of the labeled entries of (B×C) log-probs.
    NllMean(TId, Rc<Vec<usize>>),
    SumAll(TId),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation; create one per forward/backward pass.
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Array2<f64>>>,
    rng: ChaCha8Rng,
}

impl Tape {
    /// `seed` drives dropout masks only.
    pub fn new(seed: u64) -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn value(&self, id: TId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    /// Gradient of the last `backward` loss w.r.t. node `id`, if it was
    /// reached and required.
    pub fn grad(&self, id: TId) -> Option<&Array2<f64>> {
        self.grads.get(id).and_then(|g| g.as_ref())
    }

    pub fn scalar(&self, id: TId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "scalar() on non-scalar node");
        v[(0, 0)]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> TId {
        self.nodes.push(Node { value, op, requires_grad });
        self.nodes.len() - 1
    }

    fn requires(&self, id: TId) -> bool {
        self.nodes[id].requires_grad
    }

    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> TId {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn matmul(&mut self, a: TId, b: TId) -> TId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.ncols(), vb.nrows(), "matmul: inner dimensions differ");
        let value = va.dot(vb);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Matmul(a, b), req)
    }

    pub fn spmm(&mut self, a: &Rc<SpMat>, x: TId) -> TId {
        let value = a.matmul_dense(&self.nodes[x].value);
        let req = self.requires(x);
        self.push(value, Op::Spmm(Rc::clone(a), x), req)
    }

    pub fn add(&mut self, a: TId, b: TId) -> TId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.dim(), vb.dim(), "add: shapes differ");
        let value = va + vb;
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Add(a, b), req)
    }

    pub fn add_bias_row(&mut self, x: TId, bias: TId) -> TId {
        let (vx, vb) = (&self.nodes[x].value, &self.nodes[bias].value);
        assert_eq!(vb.nrows(), 1, "add_bias_row: bias must be a single row");
        assert_eq!(vx.ncols(), vb.ncols(), "add_bias_row: widths differ");
        let value = vx + &vb.row(0);
        let req = self.requires(x) || self.requires(bias);
        self.push(value, Op::AddBiasRow(x, bias), req)
    }

    pub fn scale(&mut self, x: TId, c: f64) -> TId {
        let value = &self.nodes[x].value * c;
        let req = self.requires(x);
        self.push(value, Op::Scale(x, c), req)
    }

    pub fn concat_cols(&mut self, parts: &[TId]) -> TId {
        assert!(!parts.is_empty(), "concat_cols: no parts");
        let rows = self.nodes[parts[0]].value.nrows();
        let total: usize = parts.iter().map(|&p| self.nodes[p].value.ncols()).sum();
        let mut value = Array2::zeros((rows, total));
        let mut at = 0;
        for &p in parts {
            let v = &self.nodes[p].value;
            assert_eq!(v.nrows(), rows, "concat_cols: row counts differ");
            value.slice_mut(ndarray::s![.., at..at + v.ncols()]).assign(v);
            at += v.ncols();
        }
        let req = parts.iter().any(|&p| self.requires(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), req)
    }

    fn check_segments(&self, x: TId, segments: &[usize], num_segments: usize) {
        let v = &self.nodes[x].value;
        assert_eq!(v.nrows(), segments.len(), "segments: length differs from rows");
        assert!(
            segments.iter().all(|&s| s < num_segments),
            "segments: id out of range"
        );
    }

    /// Per-segment sum of rows → (num_segments × d). Empty segments sum to 0.
    pub fn sum_segments(&mut self, x: TId, segments: &Rc<Vec<usize>>, num_segments: usize) -> TId {
        self.check_segments(x, segments, num_segments);
        let v = &self.nodes[x].value;
        let mut value = Array2::zeros((num_segments, v.ncols()));
        for (row, &s) in segments.iter().enumerate() {
            let src = v.row(row);
            let mut dst = value.row_mut(s);
            dst += &src;
        }
        let req = self.requires(x);
        self.push(value, Op::SumSegments(x, Rc::clone(segments)), req)
    }

    /// Per-segment mean of rows; every segment must be nonempty.
    pub fn mean_segments(&mut self, x: TId, segments: &Rc<Vec<usize>>, num_segments: usize) -> TId {
        self.check_segments(x, segments, num_segments);
        let v = &self.nodes[x].value;
        let mut counts = vec![0usize; num_segments];
        for &s in segments.iter() {
            counts[s] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0), "mean_segments: empty segment");
        let mut value = Array2::zeros((num_segments, v.ncols()));
        for (row, &s) in segments.iter().enumerate() {
            let src = v.row(row);
            let mut dst = value.row_mut(s);
            dst += &src;
        }
        for s in 0..num_segments {
            let mut dst = value.row_mut(s);
            dst /= counts[s] as f64;
        }
        let req = self.requires(x);
        self.push(value, Op::MeanSegments(x, Rc::clone(segments), counts), req)
    }

    /// Per-segment column-wise max; ties route the gradient to the lowest
    /// contributing row. Every segment must be nonempty.
    pub fn max_segments(&mut self, x: TId, segments: &Rc<Vec<usize>>, num_segments: usize) -> TId {
        self.check_segments(x, segments, num_segments);
        let v = &self.nodes[x].value;
        let d = v.ncols();
        let mut value = Array2::from_elem((num_segments, d), f64::NEG_INFINITY);
        let mut argmax = vec![usize::MAX; num_segments * d];
        for (row, &s) in segments.iter().enumerate() {
            for c in 0..d {
                let cand = v[(row, c)];
                if cand > value[(s, c)] {
                    value[(s, c)] = cand;
                    argmax[s * d + c] = row;
                }
            }
        }
        assert!(
            argmax.iter().all(|&r| r != usize::MAX),
            "max_segments: empty segment"
        );
        let req = self.requires(x);
        self.push(value, Op::MaxSegments(x, argmax), req)
    }

    pub fn relu(&mut self, x: TId) -> TId {
        let value = self.nodes[x].value.mapv(|v| v.max(0.0));
        let req = self.requires(x);
        self.push(value, Op::Relu(x), req)
    }

    pub fn leaky_relu(&mut self, x: TId, slope: f64) -> TId {
        let value = self.nodes[x].value.mapv(|v| if v > 0.0 { v } else { slope * v });
        let req = self.requires(x);
        self.push(value, Op::LeakyRelu(x, slope), req)
    }

    pub fn tanh(&mut self, x: TId) -> TId {
        let value = self.nodes[x].value.mapv(f64::tanh);
        let req = self.requires(x);
        self.push(value, Op::Tanh(x), req)
    }

    pub fn mul(&mut self, a: TId, b: TId) -> TId {
        let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
        assert_eq!(va.dim(), vb.dim(), "mul: shapes differ");
        let value = va * vb;
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Mul(a, b), req)
    }

    /// (n×d) with every row scaled by the matching entry of an (n×1) column.
    pub fn mul_col_broadcast(&mut self, x: TId, col: TId) -> TId {
        let (vx, vc) = (&self.nodes[x].value, &self.nodes[col].value);
        assert_eq!(vc.ncols(), 1, "mul_col_broadcast: gate must be one column");
        assert_eq!(vx.nrows(), vc.nrows(), "mul_col_broadcast: row counts differ");
        let value = vx * &vc.column(0).insert_axis(Axis(1));
        let req = self.requires(x) || self.requires(col);
        self.push(value, Op::MulColBroadcast(x, col), req)
    }

    /// Numerically stable row-wise log-softmax (row-max subtraction).
    pub fn log_softmax_rows(&mut self, x: TId) -> TId {
        let v = &self.nodes[x].value;
        let mut value = v.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&e| (e - max).exp()).sum::<f64>().ln() + max;
            row.mapv_inplace(|e| e - lse);
        }
        let req = self.requires(x);
        self.push(value, Op::LogSoftmaxRows(x), req)
    }

    /// Batch norm over the row (batch) dimension. Train mode normalizes by
    /// batch statistics (biased variance) and folds them into `bn`'s running
    /// averages; eval mode applies the running statistics as constants.
    pub fn batch_norm(
        &mut self,
        x: TId,
        gamma: TId,
        beta: TId,
        bn: &mut BnState,
        train: bool,
    ) -> TId {
        let v = &self.nodes[x].value;
        let (n, d) = v.dim();
        let vg = &self.nodes[gamma].value;
        let vb = &self.nodes[beta].value;
        assert_eq!(vg.dim(), (1, d), "batch_norm: gamma must be 1x{d}");
        assert_eq!(vb.dim(), (1, d), "batch_norm: beta must be 1x{d}");
        assert_eq!(bn.running_mean.len(), d, "batch_norm: state dim differs");
        assert!(n > 0, "batch_norm: empty batch");
        let (mean, var) = if train {
            let mean = v.mean_axis(Axis(0)).unwrap();
            let var = v
                .outer_iter()
                .fold(Array1::<f64>::zeros(d), |acc, row| acc + (&row - &mean).mapv(|e| e * e))
                / n as f64;
            bn.running_mean = &bn.running_mean * (1.0 - bn.momentum) + &mean * bn.momentum;
            bn.running_var = &bn.running_var * (1.0 - bn.momentum) + &var * bn.momentum;
            (mean, var)
        } else {
            (bn.running_mean.clone(), bn.running_var.clone())
        };
        let inv_std = var.mapv(|e| 1.0 / (e + bn.eps).sqrt());
        let x_hat = (v - &mean) * &inv_std;
        let value = &x_hat * &vg.row(0) + &vb.row(0);
        let req = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(value, Op::BatchNorm { x, gamma, beta, x_hat, inv_std, train }, req)
    }

    /// Inverted dropout: in train mode each entry independently survives
    /// with probability 1−p and is scaled by 1/(1−p); eval mode is the
    /// identity (no op recorded).
    pub fn dropout(&mut self, x: TId, p: f64, train: bool) -> TId {
        assert!((0.0..1.0).contains(&p), "dropout: p must be in [0, 1), got {p}");
        if !train || p == 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let shape = self.nodes[x].value.dim();
        let mask =
            Array2::from_shape_fn(shape, |_| if self.rng.gen::<f64>() < p { 0.0 } else { keep });
        let value = &self.nodes[x].value * &mask;
        let req = self.requires(x);
        self.push(value, Op::Dropout(x, mask), req)
    }

    pub fn gather_rows(&mut self, x: TId, idx: &Rc<Vec<usize>>) -> TId {
        let v = &self.nodes[x].value;
        let mut value = Array2::zeros((idx.len(), v.ncols()));
        for (row, &src) in idx.iter().enumerate() {
            assert!(src < v.nrows(), "gather_rows: index {src} out of range");
            value.row_mut(row).assign(&v.row(src));
        }
        let req = self.requires(x);
        self.push(value, Op::GatherRows(x, Rc::clone(idx)), req)
    }

    /// Softmax of an (n×1) column within each segment; entries of a segment
    /// sum to 1. Segments may interleave.
    pub fn segment_softmax(&mut self, x: TId, segments: &Rc<Vec<usize>>) -> TId {
        let v = &self.nodes[x].value;
        assert_eq!(v.ncols(), 1, "segment_softmax: input must be one column");
        assert_eq!(v.nrows(), segments.len(), "segment_softmax: length differs");
        let num_segments = segments.iter().copied().max().map_or(0, |m| m + 1);
        let mut max = vec![f64::NEG_INFINITY; num_segments];
        for (row, &s) in segments.iter().enumerate() {
            max[s] = max[s].max(v[(row, 0)]);
        }
        let mut value = Array2::zeros(v.dim());
        let mut denom = vec![0.0f64; num_segments];
        for (row, &s) in segments.iter().enumerate() {
            let e = (v[(row, 0)] - max[s]).exp();
            value[(row, 0)] = e;
            denom[s] += e;
        }
        for (row, &s) in segments.iter().enumerate() {
            value[(row, 0)] /= denom[s];
        }
        let req = self.requires(x);
        self.push(value, Op::SegmentSoftmax(x, Rc::clone(segments)), req)
    }

    /// Mean of −logp[i, labels[i]] over rows, as a 1×1 tensor.
    pub fn nll_mean(&mut self, logp: TId, labels: &Rc<Vec<usize>>) -> TId {
        let v = &self.nodes[logp].value;
        assert_eq!(v.nrows(), labels.len(), "nll_mean: label count differs");
        assert!(
            labels.iter().all(|&c| c < v.ncols()),
            "nll_mean: label out of range"
        );
        let total: f64 = labels.iter().enumerate().map(|(i, &c)| -v[(i, c)]).sum();
        let value = Array2::from_elem((1, 1), total / labels.len() as f64);
        let req = self.requires(logp);
        self.push(value, Op::NllMean(logp, Rc::clone(labels)), req)
    }

    pub fn sum_all(&mut self, x: TId) -> TId {
        let value = Array2::from_elem((1, 1), self.nodes[x].value.sum());
        let req = self.requires(x);
        self.push(value, Op::SumAll(x), req)
    }

    /// Reverse pass from a scalar loss: fills gradients for every reachable
    /// node that requires them. Reusing the tape afterwards is fine; a new
    /// backward clears previous gradients.
    pub fn backward(&mut self, loss: TId) -> Result<(), AutodiffError> {
        let dim = self.nodes[loss].value.dim();
        if dim != (1, 1) {
            return Err(AutodiffError::NonScalarLoss { rows: dim.0, cols: dim.1 });
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss] = Some(Array2::ones((1, 1)));
        for id in (0..=loss).rev() {
            if !self.nodes[id].requires_grad {
                continue;
            }
            let Some(g) = self.grads[id].take() else { continue };
            self.pull_back(id, &g);
            self.grads[id] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: TId, delta: Array2<f64>) {
        if !self.nodes[id].requires_grad {
            return;
        }
        match &mut self.grads[id] {
            Some(g) => *g += &delta,
            slot => *slot = Some(delta),
        }
    }

    fn pull_back(&mut self, id: TId, g: &Array2<f64>) {
        // `op` is moved out and restored to satisfy the borrow checker
        // without cloning saved arrays.
        let op = std::mem::replace(&mut self.nodes[id].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let da = g.dot(&self.nodes[b].value.t());
                    self.accumulate(a, da);
                }
                if self.requires(b) {
                    let db = self.nodes[a].value.t().dot(g);
                    self.accumulate(b, db);
                }
            }
            Op::Spmm(m, x) => {
                let x = *x;
                if self.requires(x) {
                    let dx = m.transpose_matmul_dense(g);
                    self.accumulate(x, dx);
                }
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::AddBiasRow(x, bias) => {
                let (x, bias) = (*x, *bias);
                self.accumulate(x, g.clone());
                let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                self.accumulate(bias, db);
            }
            Op::Scale(x, c) => {
                let (x, c) = (*x, *c);
                self.accumulate(x, g * c);
            }
            Op::ConcatCols(parts) => {
                let parts = parts.clone();
                let mut at = 0;
                for p in parts {
                    let w = self.nodes[p].value.ncols();
                    let dp = g.slice(ndarray::s![.., at..at + w]).to_owned();
                    self.accumulate(p, dp);
                    at += w;
                }
            }
            Op::SumSegments(x, segments) => {
                let x = *x;
                let mut dx = Array2::zeros(self.nodes[x].value.dim());
                for (row, &s) in segments.iter().enumerate() {
                    dx.row_mut(row).assign(&g.row(s));
                }
                self.accumulate(x, dx);
            }
            Op::MeanSegments(x, segments, counts) => {
                let x = *x;
                let mut dx = Array2::zeros(self.nodes[x].value.dim());
                for (row, &s) in segments.iter().enumerate() {
                    let scaled = &g.row(s) / counts[s] as f64;
                    dx.row_mut(row).assign(&scaled);
                }
                self.accumulate(x, dx);
            }
            Op::MaxSegments(x, argmax) => {
                let x = *x;
                let d = g.ncols();
                let mut dx = Array2::zeros(self.nodes[x].value.dim());
                for s in 0..g.nrows() {
                    for c in 0..d {
                        dx[(argmax[s * d + c], c)] += g[(s, c)];
                    }
                }
                self.accumulate(x, dx);
            }
            Op::Relu(x) => {
                let x = *x;
                let mask = self.nodes[x].value.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                self.accumulate(x, g * &mask);
            }
            Op::LeakyRelu(x, slope) => {
                let (x, slope) = (*x, *slope);
                let mask = self.nodes[x].value.mapv(|v| if v > 0.0 { 1.0 } else { slope });
                self.accumulate(x, g * &mask);
            }
            Op::Tanh(x) => {
                let x = *x;
                let dx = g * &self.nodes[id].value.mapv(|y| 1.0 - y * y);
                self.accumulate(x, dx);
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                if self.requires(a) {
                    let da = g * &self.nodes[b].value;
                    self.accumulate(a, da);
                }
                if self.requires(b) {
                    let db = g * &self.nodes[a].value;
                    self.accumulate(b, db);
                }
            }
            Op::MulColBroadcast(x, col) => {
                let (x, col) = (*x, *col);
                if self.requires(x) {
                    let gate = self.nodes[col].value.column(0).insert_axis(Axis(1)).to_owned();
                    self.accumulate(x, g * &gate);
                }
                if self.requires(col) {
                    let dcol = (g * &self.nodes[x].value)
                        .sum_axis(Axis(1))
                        .insert_axis(Axis(1));
                    self.accumulate(col, dcol);
                }
            }
            Op::LogSoftmaxRows(x) => {
                let x = *x;
                // dx = g − softmax(x) · rowsum(g)
                let y = &self.nodes[id].value;
                let mut dx = g.clone();
                for (mut drow, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                    let gsum: f64 = drow.iter().sum();
                    for (d, &ly) in drow.iter_mut().zip(yrow.iter()) {
                        *d -= ly.exp() * gsum;
                    }
                }
                self.accumulate(x, dx);
            }
            Op::BatchNorm { x, gamma, beta, x_hat, inv_std, train } => {
                let (x, gamma, beta, train) = (*x, *gamma, *beta, *train);
                let n = g.nrows() as f64;
                let vg = self.nodes[gamma].value.row(0).to_owned();
                if self.requires(beta) {
                    let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(beta, db);
                }
                if self.requires(gamma) {
                    let dg = (g * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(gamma, dg);
                }
                if self.requires(x) {
                    let dxhat = g * &vg;
                    let dx = if train {
                        let sum_dxhat = dxhat.sum_axis(Axis(0));
                        let sum_dxhat_xhat = (&dxhat * x_hat).sum_axis(Axis(0));
                        let mut dx = &dxhat * n;
                        dx -= &sum_dxhat;
                        dx -= &(x_hat * &sum_dxhat_xhat);
                        dx * &(inv_std / n)
                    } else {
                        dxhat * inv_std
                    };
                    self.accumulate(x, dx);
                }
            }
            Op::Dropout(x, mask) => {
                let x = *x;
                self.accumulate(x, g * mask);
            }
            Op::GatherRows(x, idx) => {
                let x = *x;
                let mut dx = Array2::zeros(self.nodes[x].value.dim());
                for (row, &src) in idx.iter().enumerate() {
                    let mut dst = dx.row_mut(src);
                    dst += &g.row(row);
                }
                self.accumulate(x, dx);
            }
            Op::SegmentSoftmax(x, segments) => {
                let x = *x;
                let y = &self.nodes[id].value;
                let num_segments = segments.iter().copied().max().map_or(0, |m| m + 1);
                let mut inner = vec![0.0f64; num_segments];
                for (row, &s) in segments.iter().enumerate() {
                    inner[s] += g[(row, 0)] * y[(row, 0)];
                }
                let mut dx = Array2::zeros(y.dim());
                for (row, &s) in segments.iter().enumerate() {
                    dx[(row, 0)] = y[(row, 0)] * (g[(row, 0)] - inner[s]);
                }
                self.accumulate(x, dx);
            }
            Op::NllMean(logp, labels) => {
                let logp = *logp;
                let scale = g[(0, 0)] / labels.len() as f64;
                let mut dx = Array2::zeros(self.nodes[logp].value.dim());
                for (i, &c) in labels.iter().enumerate() {
                    dx[(i, c)] = -scale;
                }
                self.accumulate(logp, dx);
            }
            Op::SumAll(x) => {
                let x = *x;
                let dx = Array2::from_elem(self.nodes[x].value.dim(), g[(0, 0)]);
                self.accumulate(x, dx);
            }
        }
        self.nodes[id].op = op;
    }
}
