//! Reverse-mode tape over dense row-major matrices.
//!
//! Every value on the tape is a matrix `rows × cols` (vectors are `1 × n`).
//! Operations append a node holding the forward value and enough context to
//! run the backward rule. Nodes are only ever appended, so the node list is
//! topologically ordered and a single reverse sweep visits each node once.

use std::collections::HashMap;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    /// `x^p`; callers keep `x` positive for non-integer `p`.
    Pow(f64),
    /// `a * x + b`.
    Affine(f64, f64),
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Sigmoid => sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Relu => x.max(0.0),
            Unary::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Unary::Pow(p) if p == -1.0 => 1.0 / x,
            Unary::Pow(p) => x.powf(p),
            Unary::Affine(a, b) => a * x + b,
        }
    }

    /// Derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Tanh => 1.0 - y * y,
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::LeakyRelu(s) => {
                if x > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Unary::Pow(p) if p == -1.0 => -y * y,
            Unary::Pow(p) => p * x.powf(p - 1.0),
            Unary::Affine(a, _) => a,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability clamp applied before taking logs in the BCE loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    Unary(Unary, Var),
    SoftmaxRows(Var),
    SegmentSum {
        x: Var,
        targets: Vec<usize>,
    },
    SegmentSoftmax {
        x: Var,
        segments: Vec<usize>,
        n_segments: usize,
    },
    Gather {
        x: Var,
        index: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    MulCol(Var, Var),
    RowDot(Var, Var),
    SqDist(Var, Var),
    NormalizeRows(Var),
    SegmentPool {
        assign: Var,
        x: Var,
        segments: Vec<usize>,
    },
    MeanRows(Var),
    Sum(Var),
    Bce {
        pred: Var,
        labels: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for one reverse sweep.
///
/// A tape is single-use: after [`Tape::backward`] it refuses a second sweep,
/// so gradients can never be accumulated twice from the same recording.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    grads: Vec<Option<Vec<f64>>>,
    consumed: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(vec![n.rows, n.cols], n.value.clone()).expect("tape node shape")
    }

    /// Gradient of the last backward sweep with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Records a leaf holding a copy of `t`. Gradients for it are readable via
    /// [`Tape::grad`] when `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Result<Var> {
        let (r, c) = t.matrix_dims()?;
        Ok(self.push(r, c, t.data().to_vec(), Op::Leaf, t.requires_grad()))
    }

    /// Constant matrix leaf.
    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<Var> {
        if rows * cols != value.len() {
            return Err(Error::dims("constant", &[rows, cols], &[value.len()]));
        }
        Ok(self.push(rows, cols, value, Op::Leaf, false))
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same handle.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let t = store.get(id);
        let (r, c) = t.matrix_dims()?;
        let v = self.push(
            r,
            c,
            t.data().to_vec(),
            Op::Leaf,
            t.requires_grad(),
        );
        self.params.insert(id, v);
        Ok(v)
    }

    // ----------------------------------------------------------------- ops

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(Error::dims("matmul", &[m, k], &[k2, n]));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            &self.node(a).value,
            (k as isize, 1),
            &self.node(b).value,
            (n as isize, 1),
            &mut out,
            n,
        );
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, n, out, Op::MatMul(a, b), ng))
    }

    fn binary(&mut self, kind: Binary, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ca != cb || !(ra == rb || ra == 1 || rb == 1) {
            return Err(Error::dims("elementwise", &[ra, ca], &[rb, cb]));
        }
        let rows = ra.max(rb);
        let (av, bv) = (&self.node(a).value, &self.node(b).value);
        let mut out = Vec::with_capacity(rows * ca);
        for r in 0..rows {
            let ar = if ra == 1 { 0 } else { r };
            let br = if rb == 1 { 0 } else { r };
            let x = &av[ar * ca..(ar + 1) * ca];
            let y = &bv[br * ca..(br + 1) * ca];
            match kind {
                Binary::Add => out.extend(x.iter().zip(y).map(|(p, q)| p + q)),
                Binary::Sub => out.extend(x.iter().zip(y).map(|(p, q)| p - q)),
                Binary::Mul => out.extend(x.iter().zip(y).map(|(p, q)| p * q)),
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(rows, ca, out, Op::Binary(kind, a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn unary(&mut self, f: Unary, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let out = self.node(x).value.iter().map(|&v| f.apply(v)).collect();
        let ng = self.ng(x);
        self.push(r, c, out, Op::Unary(f, x), ng)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Unary::Sigmoid, x)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Unary::Tanh, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Unary::Relu, x)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(Unary::LeakyRelu(slope), x)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Var {
        self.unary(Unary::Pow(p), x)
    }

    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        self.unary(Unary::Affine(scale, shift), x)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.affine(x, s, 0.0)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if c == 0 {
            return Err(Error::dims("softmax_rows", &[r, c], &[]));
        }
        let xv = &self.node(x).value;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            softmax_into(&xv[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
        }
        let ng = self.ng(x);
        Ok(self.push(r, c, out, Op::SoftmaxRows(x), ng))
    }

    /// Sums message rows into their target node rows.
    pub fn segment_sum(&mut self, x: Var, targets: &[usize], n_nodes: usize) -> Result<Var> {
        let (e, d) = self.shape(x);
        if targets.len() != e {
            return Err(Error::dims("segment_sum", &[e, d], &[targets.len()]));
        }
        check_indices("segment target", targets, n_nodes)?;
        let xv = &self.node(x).value;
        let mut out = vec![0.0; n_nodes * d];
        for (i, &t) in targets.iter().enumerate() {
            let src = &xv[i * d..(i + 1) * d];
            for (o, s) in out[t * d..(t + 1) * d].iter_mut().zip(src) {
                *o += s;
            }
        }
        let ng = self.ng(x);
        Ok(self.push(
            n_nodes,
            d,
            out,
            Op::SegmentSum {
                x,
                targets: targets.to_vec(),
            },
            ng,
        ))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(&mut self, x: Var, segments: &[usize], n_segments: usize) -> Result<Var> {
        let (e, d) = self.shape(x);
        if segments.len() != e {
            return Err(Error::dims("segment_softmax", &[e, d], &[segments.len()]));
        }
        check_indices("segment", segments, n_segments)?;
        let xv = &self.node(x).value;
        let mut max = vec![f64::NEG_INFINITY; n_segments * d];
        for (i, &s) in segments.iter().enumerate() {
            for k in 0..d {
                let m = &mut max[s * d + k];
                *m = m.max(xv[i * d + k]);
            }
        }
        let mut out = vec![0.0; e * d];
        let mut denom = vec![0.0; n_segments * d];
        for (i, &s) in segments.iter().enumerate() {
            for k in 0..d {
                let v = (xv[i * d + k] - max[s * d + k]).exp();
                out[i * d + k] = v;
                denom[s * d + k] += v;
            }
        }
        for (i, &s) in segments.iter().enumerate() {
            for k in 0..d {
                out[i * d + k] /= denom[s * d + k];
            }
        }
        let ng = self.ng(x);
        Ok(self.push(
            e,
            d,
            out,
            Op::SegmentSoftmax {
                x,
                segments: segments.to_vec(),
                n_segments,
            },
            ng,
        ))
    }

    /// Selects rows by index (embedding lookup, edge-source gather).
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(x);
        check_indices("gather", index, r)?;
        let xv = &self.node(x).value;
        let mut out = Vec::with_capacity(index.len() * c);
        for &i in index {
            out.extend_from_slice(&xv[i * c..(i + 1) * c]);
        }
        let ng = self.ng(x);
        Ok(self.push(
            index.len(),
            c,
            out,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
            ng,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(&p) => self.shape(p).0,
            None => return Err(Error::contract("concat of zero tensors")),
        };
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(Error::dims("concat_cols", &[rows], &[r, c]));
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let n = self.node(p);
                out.extend_from_slice(&n.value[i * n.cols..(i + 1) * n.cols]);
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > c {
            return Err(Error::Index {
                what: "column slice",
                index: start + len,
                bound: c,
            });
        }
        let xv = &self.node(x).value;
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xv[i * c + start..i * c + start + len]);
        }
        let ng = self.ng(x);
        Ok(self.push(r, len, out, Op::SliceCols { x, start }, ng))
    }

    /// Scales each row of `x` (`m × d`) by the matching entry of `w` (`m × 1`).
    pub fn mul_col(&mut self, x: Var, w: Var) -> Result<Var> {
        let (m, d) = self.shape(x);
        let (wm, wc) = self.shape(w);
        if wm != m || wc != 1 {
            return Err(Error::dims("mul_col", &[m, d], &[wm, wc]));
        }
        let (xv, wv) = (&self.node(x).value, &self.node(w).value);
        let mut out = Vec::with_capacity(m * d);
        for i in 0..m {
            out.extend(xv[i * d..(i + 1) * d].iter().map(|v| v * wv[i]));
        }
        let ng = self.ng(x) || self.ng(w);
        Ok(self.push(m, d, out, Op::MulCol(x, w), ng))
    }

    /// Dot product of matching rows; result is `m × 1`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, d) = self.shape(a);
        if self.shape(b) != (m, d) {
            let (rb, cb) = self.shape(b);
            return Err(Error::dims("row_dot", &[m, d], &[rb, cb]));
        }
        let (av, bv) = (&self.node(a).value, &self.node(b).value);
        let out = (0..m)
            .map(|i| {
                av[i * d..(i + 1) * d]
                    .iter()
                    .zip(&bv[i * d..(i + 1) * d])
                    .map(|(p, q)| p * q)
                    .sum()
            })
            .collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(m, 1, out, Op::RowDot(a, b), ng))
    }

    /// Squared euclidean distances between rows of `x` (`n × d`) and `k` (`c × d`).
    pub fn sq_dist(&mut self, x: Var, k: Var) -> Result<Var> {
        let (n, d) = self.shape(x);
        let (c, dk) = self.shape(k);
        if d != dk {
            return Err(Error::dims("sq_dist", &[n, d], &[c, dk]));
        }
        let (xv, kv) = (&self.node(x).value, &self.node(k).value);
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            let xi = &xv[i * d..(i + 1) * d];
            for j in 0..c {
                let kj = &kv[j * d..(j + 1) * d];
                out[i * c + j] = xi.iter().zip(kj).map(|(p, q)| (p - q) * (p - q)).sum();
            }
        }
        let ng = self.ng(x) || self.ng(k);
        Ok(self.push(n, c, out, Op::SqDist(x, k), ng))
    }

    /// Divides each row by its sum. Rows must have positive sums.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let xv = &self.node(x).value;
        let mut out = xv.clone();
        for i in 0..r {
            let row = &mut out[i * c..(i + 1) * c];
            let s: f64 = row.iter().sum();
            if !(s > 0.0) {
                return Err(Error::contract("normalize_rows on a non-positive row sum"));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        let ng = self.ng(x);
        Ok(self.push(r, c, out, Op::NormalizeRows(x), ng))
    }

    /// Soft pooling per segment: for segment `s` and cluster `j`, output row
    /// `s * c + j` is `Σ_{i ∈ s} assign[i, j] · x[i, :]`.
    pub fn segment_pool(
        &mut self,
        assign: Var,
        x: Var,
        segments: &[usize],
        n_segments: usize,
    ) -> Result<Var> {
        let (n, c) = self.shape(assign);
        let (nx, d) = self.shape(x);
        if n != nx || segments.len() != n {
            return Err(Error::dims("segment_pool", &[n, c], &[nx, d]));
        }
        check_indices("pool segment", segments, n_segments)?;
        let (av, xv) = (&self.node(assign).value, &self.node(x).value);
        let mut out = vec![0.0; n_segments * c * d];
        for i in 0..n {
            let s = segments[i];
            let xi = &xv[i * d..(i + 1) * d];
            for j in 0..c {
                let a = av[i * c + j];
                let o = &mut out[(s * c + j) * d..(s * c + j + 1) * d];
                for (ov, xv) in o.iter_mut().zip(xi) {
                    *ov += a * xv;
                }
            }
        }
        let ng = self.ng(assign) || self.ng(x);
        Ok(self.push(
            n_segments * c,
            d,
            out,
            Op::SegmentPool {
                assign,
                x,
                segments: segments.to_vec(),
            },
            ng,
        ))
    }

    /// Column means; result is `1 × d`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r == 0 {
            return Err(Error::contract("mean over zero rows"));
        }
        let xv = &self.node(x).value;
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, v) in out.iter_mut().zip(&xv[i * c..(i + 1) * c]) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= r as f64);
        let ng = self.ng(x);
        Ok(self.push(1, c, out, Op::MeanRows(x), ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.node(x).value.iter().sum();
        let ng = self.ng(x);
        self.push(1, 1, vec![s], Op::Sum(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.node(x).value.len().max(1);
        let s = self.sum(x);
        self.scale(s, 1.0 / n as f64)
    }

    /// Mean binary cross-entropy; probabilities are clamped to
    /// `[PROB_CLAMP, 1 - PROB_CLAMP]`.
    pub fn bce_loss(&mut self, pred: Var, labels: &[f64]) -> Result<Var> {
        let (r, c) = self.shape(pred);
        if r * c != labels.len() {
            return Err(Error::dims("bce_loss", &[r, c], &[labels.len()]));
        }
        if labels.is_empty() {
            return Err(Error::contract("bce_loss on an empty batch"));
        }
        let loss = bce_value(&self.node(pred).value, labels);
        let ng = self.ng(pred);
        Ok(self.push(
            1,
            1,
            vec![loss],
            Op::Bce {
                pred,
                labels: labels.to_vec(),
            },
            ng,
        ))
    }

    // ------------------------------------------------------------ backward

    /// Runs the reverse sweep from a scalar `loss`, accumulating gradients of
    /// bound parameters into `store`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.consumed {
            return Err(Error::contract("backward already ran on this tape"));
        }
        if self.shape(loss) != (1, 1) {
            let (r, c) = self.shape(loss);
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got {r}x{c}"
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (&id, &v) in &self.params {
            if let Some(g) = &grads[v.0] {
                store.get_mut(id).accumulate_grad(g)?;
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let n = cols;
                if self.ng(*a) {
                    let ga = acc(grads, *a, m * k);
                    // dA = dC · Bᵀ
                    gemm(
                        m,
                        n,
                        k,
                        g,
                        (n as isize, 1),
                        &self.node(*b).value,
                        (1, n as isize),
                        ga,
                        k,
                    );
                }
                if self.ng(*b) {
                    let gb = acc(grads, *b, k * n);
                    // dB = Aᵀ · dC
                    gemm(
                        k,
                        m,
                        n,
                        &self.node(*a).value,
                        (1, k as isize),
                        g,
                        (n as isize, 1),
                        gb,
                        n,
                    );
                }
            }
            Op::Binary(kind, a, b) => {
                let (a, b) = (*a, *b);
                let ra = self.shape(a).0;
                let rb = self.shape(b).0;
                if self.ng(a) {
                    let bv = &self.node(b).value;
                    let ga = acc(grads, a, ra * cols);
                    for r in 0..rows {
                        let ar = if ra == 1 { 0 } else { r };
                        let br = if rb == 1 { 0 } else { r };
                        for c in 0..cols {
                            let d = match kind {
                                Binary::Add | Binary::Sub => g[r * cols + c],
                                Binary::Mul => g[r * cols + c] * bv[br * cols + c],
                            };
                            ga[ar * cols + c] += d;
                        }
                    }
                }
                if self.ng(b) {
                    let av = &self.node(a).value;
                    let gb = acc(grads, b, rb * cols);
                    for r in 0..rows {
                        let ar = if ra == 1 { 0 } else { r };
                        let br = if rb == 1 { 0 } else { r };
                        for c in 0..cols {
                            let d = match kind {
                                Binary::Add => g[r * cols + c],
                                Binary::Sub => -g[r * cols + c],
                                Binary::Mul => g[r * cols + c] * av[ar * cols + c],
                            };
                            gb[br * cols + c] += d;
                        }
                    }
                }
            }
            Op::Unary(f, x) => {
                let xv = &self.node(*x).value;
                let y = &node.value;
                let gx = acc(grads, *x, xv.len());
                for j in 0..xv.len() {
                    gx[j] += g[j] * f.derivative(xv[j], y[j]);
                }
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let gx = acc(grads, *x, rows * cols);
                for r in 0..rows {
                    let yr = &y[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for c in 0..cols {
                        gx[r * cols + c] += yr[c] * (gr[c] - dot);
                    }
                }
            }
            Op::SegmentSum { x, targets } => {
                let gx = acc(grads, *x, targets.len() * cols);
                for (e, &t) in targets.iter().enumerate() {
                    for c in 0..cols {
                        gx[e * cols + c] += g[t * cols + c];
                    }
                }
            }
            Op::SegmentSoftmax {
                x,
                segments,
                n_segments,
            } => {
                let y = &node.value;
                let mut dot = vec![0.0; n_segments * cols];
                for (e, &s) in segments.iter().enumerate() {
                    for c in 0..cols {
                        dot[s * cols + c] += y[e * cols + c] * g[e * cols + c];
                    }
                }
                let gx = acc(grads, *x, rows * cols);
                for (e, &s) in segments.iter().enumerate() {
                    for c in 0..cols {
                        let k = e * cols + c;
                        gx[k] += y[k] * (g[k] - dot[s * cols + c]);
                    }
                }
            }
            Op::Gather { x, index } => {
                let n = self.shape(*x).0;
                let gx = acc(grads, *x, n * cols);
                for (r, &i) in index.iter().enumerate() {
                    for c in 0..cols {
                        gx[i * cols + c] += g[r * cols + c];
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    if self.ng(p) {
                        let gp = acc(grads, p, rows * pc);
                        for r in 0..rows {
                            for c in 0..pc {
                                gp[r * pc + c] += g[r * cols + offset + c];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::SliceCols { x, start } => {
                let xc = self.shape(*x).1;
                let gx = acc(grads, *x, rows * xc);
                for r in 0..rows {
                    for c in 0..cols {
                        gx[r * xc + start + c] += g[r * cols + c];
                    }
                }
            }
            Op::MulCol(x, w) => {
                let (x, w) = (*x, *w);
                if self.ng(x) {
                    let wv = &self.node(w).value;
                    let gx = acc(grads, x, rows * cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            gx[r * cols + c] += g[r * cols + c] * wv[r];
                        }
                    }
                }
                if self.ng(w) {
                    let xv = &self.node(x).value;
                    let gw = acc(grads, w, rows);
                    for r in 0..rows {
                        gw[r] += (0..cols).map(|c| g[r * cols + c] * xv[r * cols + c]).sum::<f64>();
                    }
                }
            }
            Op::RowDot(a, b) => {
                let (a, b) = (*a, *b);
                let d = self.shape(a).1;
                for (target, other) in [(a, b), (b, a)] {
                    if !self.ng(target) {
                        continue;
                    }
                    let ov = &self.node(other).value;
                    let gt = acc(grads, target, rows * d);
                    for r in 0..rows {
                        for c in 0..d {
                            gt[r * d + c] += g[r] * ov[r * d + c];
                        }
                    }
                }
            }
            Op::SqDist(x, k) => {
                let (x, k) = (*x, *k);
                let (n, c) = (rows, cols);
                let d = self.shape(x).1;
                let (xv, kv) = (&self.node(x).value, &self.node(k).value);
                let neg: Vec<f64> = g.iter().map(|v| -2.0 * v).collect();
                if self.ng(x) {
                    let gx = acc(grads, x, n * d);
                    for i in 0..n {
                        let s: f64 = 2.0 * g[i * c..(i + 1) * c].iter().sum::<f64>();
                        for (o, v) in gx[i * d..(i + 1) * d].iter_mut().zip(&xv[i * d..(i + 1) * d]) {
                            *o += s * v;
                        }
                    }
                    gemm(n, c, d, &neg, (c as isize, 1), kv, (d as isize, 1), gx, d);
                }
                if self.ng(k) {
                    let gk = acc(grads, k, c * d);
                    for j in 0..c {
                        let s: f64 = 2.0 * (0..n).map(|i| g[i * c + j]).sum::<f64>();
                        for (o, v) in gk[j * d..(j + 1) * d].iter_mut().zip(&kv[j * d..(j + 1) * d]) {
                            *o += s * v;
                        }
                    }
                    gemm(c, n, d, &neg, (1, c as isize), xv, (d as isize, 1), gk, d);
                }
            }
            Op::NormalizeRows(x) => {
                let xv = &self.node(*x).value;
                let y = &node.value;
                let gx = acc(grads, *x, rows * cols);
                for r in 0..rows {
                    let s: f64 = xv[r * cols..(r + 1) * cols].iter().sum();
                    let dot: f64 = (0..cols).map(|c| g[r * cols + c] * y[r * cols + c]).sum();
                    for c in 0..cols {
                        gx[r * cols + c] += (g[r * cols + c] - dot) / s;
                    }
                }
            }
            Op::SegmentPool {
                assign,
                x,
                segments,
            } => {
                let (assign, x) = (*assign, *x);
                let (n, c) = self.shape(assign);
                let d = cols;
                let (av, xv) = (&self.node(assign).value, &self.node(x).value);
                if self.ng(assign) {
                    let ga = acc(grads, assign, n * c);
                    for i in 0..n {
                        let s = segments[i];
                        for j in 0..c {
                            let go = &g[(s * c + j) * d..(s * c + j + 1) * d];
                            ga[i * c + j] +=
                                go.iter().zip(&xv[i * d..(i + 1) * d]).map(|(p, q)| p * q).sum::<f64>();
                        }
                    }
                }
                if self.ng(x) {
                    let gx = acc(grads, x, n * d);
                    for i in 0..n {
                        let s = segments[i];
                        for j in 0..c {
                            let a = av[i * c + j];
                            let go = &g[(s * c + j) * d..(s * c + j + 1) * d];
                            for t in 0..d {
                                gx[i * d + t] += a * go[t];
                            }
                        }
                    }
                }
            }
            Op::MeanRows(x) => {
                let r = self.shape(*x).0;
                let gx = acc(grads, *x, r * cols);
                let inv = 1.0 / r as f64;
                for i in 0..r {
                    for c in 0..cols {
                        gx[i * cols + c] += g[c] * inv;
                    }
                }
            }
            Op::Sum(x) => {
                let n = self.node(*x).value.len();
                let gx = acc(grads, *x, n);
                gx.iter_mut().for_each(|v| *v += g[0]);
            }
            Op::Bce { pred, labels } => {
                let pv = &self.node(*pred).value;
                let m = labels.len() as f64;
                let gp = acc(grads, *pred, pv.len());
                for j in 0..pv.len() {
                    let p = pv[j].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    let y = labels[j];
                    gp[j] += g[0] * (-y / p + (1.0 - y) / (1.0 - p)) / m;
                }
            }
        }
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn check_indices(what: &'static str, idx: &[usize], bound: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= bound) {
        Some(&index) => Err(Error::Index { what, index, bound }),
        None => Ok(()),
    }
}

pub(crate) fn softmax_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// Mean binary cross-entropy with probability clamping.
pub fn bce_value(pred: &[f64], labels: &[f64]) -> f64 {
    let total: f64 = pred
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / labels.len() as f64
}

/// `out (m × n, row stride ldc) += A (m × k) · B (k × n)` with arbitrary
/// element strides for `A` and `B`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    out: &mut [f64],
    ldc: usize,
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: callers pass slices holding exactly the m×k, k×n and m×n
    // matrices addressed by the given strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            out.as_mut_ptr(),
            ldc as isize,
            1,
        );
    }
}
