use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{matmul, matmul_nt, matmul_tn};
use super::{AdError, ParamId, ParamStore, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Unary {
    Relu,
    LeakyRelu(f64),
    Elu,
    Gelu,
    Tanh,
    Sigmoid,
    Softplus,
    Exp,
}

impl Unary {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Unary::Relu => "relu",
            Unary::LeakyRelu(_) => "leaky_relu",
            Unary::Elu => "elu",
            Unary::Gelu => "gelu",
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Softplus => "softplus",
            Unary::Exp => "exp",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Relu => x.max(0.0),
            Unary::LeakyRelu(s) => {
                if x > 0.0 {
                    x
                } else {
                    s * x
                }
            }
            Unary::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Unary::Gelu => 0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)),
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => sigmoid(x),
            Unary::Softplus => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Unary::Exp => x.exp(),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
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
            Unary::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Unary::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
                cdf + x * pdf
            }
            Unary::Tanh => 1.0 - y * y,
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Softplus => sigmoid(x),
            Unary::Exp => y,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows = 0,
    Cols = 1,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Affine(usize, f64),
    Concat(Vec<usize>, Axis),
    Slice(usize, Axis, usize),
    Transpose(usize),
    Sum(usize),
    Broadcast(usize),
    Softmax(usize, Axis),
    Unary(usize, Unary),
    Dropout(usize, Vec<f64>),
    GatherRows(usize, Vec<usize>),
    ScatterAddRows(usize, Vec<usize>),
    SegmentSoftmax(usize, Vec<usize>),
    LayerNorm(usize, Vec<f64>),
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Wengert list recording every operation of one forward pass.
///
/// A tape built with [`Tape::training`] applies dropout; otherwise dropout is
/// the identity.
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    rng: Option<ChaCha8Rng>,
    check_finite: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: HashMap::new(),
            rng: None,
            check_finite: false,
        }
    }

    pub fn training(rng: ChaCha8Rng) -> Self {
        Tape {
            rng: Some(rng),
            ..Self::new()
        }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    /// Abort with [`AdError::NonFinite`] when an op yields NaN or infinity.
    pub fn set_finite_check(&mut self, on: bool) {
        self.check_finite = on;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var, AdError> {
        if self.check_finite && !value.is_finite() {
            return Err(AdError::NonFinite(name));
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Param => true,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                self.nodes[*a].needs_grad || self.nodes[*b].needs_grad
            }
            Op::Concat(parts, _) => parts.iter().any(|&p| self.nodes[p].needs_grad),
            Op::Affine(a, _)
            | Op::Slice(a, _, _)
            | Op::Transpose(a)
            | Op::Sum(a)
            | Op::Broadcast(a)
            | Op::Softmax(a, _)
            | Op::Unary(a, _)
            | Op::Dropout(a, _)
            | Op::GatherRows(a, _)
            | Op::ScatterAddRows(a, _)
            | Op::SegmentSoftmax(a, _)
            | Op::LayerNorm(a, _) => self.nodes[*a].needs_grad,
        };
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: Arc::new(t),
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// An input whose gradient is retained by [`Tape::gradients`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: Arc::new(t),
            op: Op::Leaf,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// The leaf for a stored parameter; repeated calls return the same leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: store.shared(id),
            op: Op::Param,
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    fn dims(&self, v: Var) -> Result<(usize, usize), AdError> {
        self.nodes[v.0].value.dims2()
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AdError {
        AdError::ShapeMismatch {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        let (_, k) = self.dims(a)?;
        let (k2, _) = self.dims(b)?;
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let out = matmul(self.value(a), self.value(b));
        self.push(out, Op::MatMul(a.0, b.0), "matmul")
    }

    fn broadcast_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize), AdError> {
        let (ra, ca) = self.dims(a)?;
        let (rb, cb) = self.dims(b)?;
        let join = |x: usize, y: usize| {
            if x == y || y == 1 {
                Some(x)
            } else if x == 1 {
                Some(y)
            } else {
                None
            }
        };
        match (join(ra, rb), join(ca, cb)) {
            (Some(r), Some(c)) => Ok((r, c)),
            _ => Err(self.mismatch(op, a, b)),
        }
    }

    fn binary(&mut self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var, AdError> {
        let (r, c) = self.broadcast_shape(name, a, b)?;
        let ta = self.value(a);
        let tb = self.value(b);
        let (ra, ca) = ta.rc();
        let (rb, cb) = tb.rc();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            let ia = if ra == 1 { 0 } else { i };
            let ib = if rb == 1 { 0 } else { i };
            for j in 0..c {
                let x = ta.data()[ia * ca + if ca == 1 { 0 } else { j }];
                let y = tb.data()[ib * cb + if cb == 1 { 0 } else { j }];
                out.push(f(x, y));
            }
        }
        self.push(Tensor::from_parts(r, c, out), op, name)
    }

    /// Elementwise sum; a size-1 row or column dimension broadcasts.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    /// `scale * x + shift` with constant coefficients.
    pub fn scale_shift(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var, AdError> {
        let out = self.value(a).map(|x| scale * x + shift);
        self.push(out, Op::Affine(a.0, scale), "scale_shift")
    }

    pub fn scale(&mut self, a: Var, scale: f64) -> Result<Var, AdError> {
        self.scale_shift(a, scale, 0.0)
    }

    pub fn concat(&mut self, parts: &[Var], axis: Axis) -> Result<Var, AdError> {
        let first = *parts
            .first()
            .ok_or_else(|| AdError::InvalidArgument("concat of zero tensors".into()))?;
        let (r0, c0) = self.dims(first)?;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.dims(p)?;
            match axis {
                Axis::Rows if c != c0 => return Err(self.mismatch("concat", first, p)),
                Axis::Cols if r != r0 => return Err(self.mismatch("concat", first, p)),
                Axis::Rows => total += r,
                Axis::Cols => total += c,
            }
        }
        let out = match axis {
            Axis::Rows => {
                let mut data = Vec::with_capacity(total * c0);
                for &p in parts {
                    data.extend_from_slice(self.value(p).data());
                }
                Tensor::from_parts(total, c0, data)
            }
            Axis::Cols => {
                let mut data = Vec::with_capacity(r0 * total);
                for i in 0..r0 {
                    for &p in parts {
                        data.extend_from_slice(self.value(p).row_slice(i));
                    }
                }
                Tensor::from_parts(r0, total, data)
            }
        };
        self.push(out, Op::Concat(parts.iter().map(|p| p.0).collect(), axis), "concat")
    }

    /// `len` rows or columns starting at `start`.
    pub fn slice(&mut self, a: Var, axis: Axis, start: usize, len: usize) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        let extent = if axis == Axis::Rows { r } else { c };
        if start + len > extent {
            return Err(AdError::InvalidArgument(format!(
                "slice {start}..{} out of range for shape {:?}",
                start + len,
                self.shape(a)
            )));
        }
        let t = self.value(a);
        let out = match axis {
            Axis::Rows => Tensor::from_parts(len, c, t.data()[start * c..(start + len) * c].to_vec()),
            Axis::Cols => {
                let mut data = Vec::with_capacity(r * len);
                for i in 0..r {
                    data.extend_from_slice(&t.row_slice(i)[start..start + len]);
                }
                Tensor::from_parts(r, len, data)
            }
        };
        self.push(out, Op::Slice(a.0, axis, start), "slice")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, AdError> {
        let out = self.value(a).transpose()?;
        self.push(out, Op::Transpose(a.0), "transpose")
    }

    /// Sum over `axis` (that dimension becomes 1), or over everything.
    pub fn sum(&mut self, a: Var, axis: Option<Axis>) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        let t = self.value(a);
        let out = match axis {
            None => Tensor::scalar(t.data().iter().sum()),
            Some(Axis::Rows) => {
                let mut data = vec![0.0; c];
                for i in 0..r {
                    for (d, x) in data.iter_mut().zip(t.row_slice(i)) {
                        *d += x;
                    }
                }
                Tensor::from_parts(1, c, data)
            }
            Some(Axis::Cols) => Tensor::from_parts(r, 1, (0..r).map(|i| t.row_slice(i).iter().sum()).collect()),
        };
        self.push(out, Op::Sum(a.0), "sum")
    }

    pub fn mean(&mut self, a: Var, axis: Option<Axis>) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        let n = match axis {
            None => r * c,
            Some(Axis::Rows) => r,
            Some(Axis::Cols) => c,
        };
        if n == 0 {
            return Err(AdError::InvalidArgument("mean over an empty dimension".into()));
        }
        let s = self.sum(a, axis)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Expands size-1 dimensions of `a` to `shape`.
    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        if (r != rows && r != 1) || (c != cols && c != 1) {
            return Err(AdError::ShapeMismatch {
                op: "broadcast",
                left: vec![r, c],
                right: vec![rows, cols],
            });
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(t.get(if r == 1 { 0 } else { i }, if c == 1 { 0 } else { j }));
            }
        }
        self.push(Tensor::from_parts(rows, cols, data), Op::Broadcast(a.0), "broadcast")
    }

    /// Softmax along `axis`: `Axis::Cols` normalizes each row.
    pub fn softmax(&mut self, a: Var, axis: Axis) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        let t = self.value(a);
        let mut out = t.data().to_vec();
        let (lines, len, stride, step) = match axis {
            Axis::Cols => (r, c, c, 1),
            Axis::Rows => (c, r, 1, c),
        };
        for l in 0..lines {
            let idx = |k: usize| l * stride + k * step;
            let max = (0..len).map(|k| out[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in 0..len {
                let e = (out[idx(k)] - max).exp();
                out[idx(k)] = e;
                z += e;
            }
            for k in 0..len {
                out[idx(k)] /= z;
            }
        }
        self.push(Tensor::from_parts(r, c, out), Op::Softmax(a.0, axis), "softmax")
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Result<Var, AdError> {
        if let Unary::LeakyRelu(s) = f {
            if !s.is_finite() {
                return Err(AdError::InvalidArgument(format!("leaky_relu slope {s}")));
            }
        }
        let out = self.value(a).map(|x| f.apply(x));
        self.push(out, Op::Unary(a.0, f), f.name())
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var, AdError> {
        self.unary(a, Unary::LeakyRelu(slope))
    }

    pub fn elu(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Elu)
    }

    pub fn gelu(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Gelu)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Softplus)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AdError> {
        self.unary(a, Unary::Exp)
    }

    /// Inverted dropout: kept entries are scaled by `1 / (1 - rate)`.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var, AdError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(AdError::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        let Some(rng) = self.rng.as_mut() else { return Ok(a) };
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let n = self.nodes[a.0].value.len();
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
        let t = &self.nodes[a.0].value;
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        self.push(out, Op::Dropout(a.0, mask), "dropout")
    }

    /// Rows `idx[0], idx[1], ...` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(AdError::InvalidArgument(format!("row {bad} out of range for {r} rows")));
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(t.row_slice(i));
        }
        self.push(Tensor::from_parts(idx.len(), c, data), Op::GatherRows(a.0, idx.to_vec()), "gather_rows")
    }

    /// `out[idx[e]] += a[e]` into an `n`-row zero matrix.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &[usize], n: usize) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        if idx.len() != r {
            return Err(AdError::InvalidArgument(format!("{} indices for {r} rows", idx.len())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(AdError::InvalidArgument(format!("target row {bad} out of range for {n} rows")));
        }
        let t = self.value(a);
        let mut data = vec![0.0; n * c];
        for (e, &i) in idx.iter().enumerate() {
            for (d, x) in data[i * c..(i + 1) * c].iter_mut().zip(t.row_slice(e)) {
                *d += x;
            }
        }
        self.push(Tensor::from_parts(n, c, data), Op::ScatterAddRows(a.0, idx.to_vec()), "scatter_add_rows")
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(&mut self, a: Var, segments: &[usize]) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        if segments.len() != r {
            return Err(AdError::InvalidArgument(format!("{} segment ids for {r} rows", segments.len())));
        }
        let n_seg = segments.iter().max().map_or(0, |m| m + 1);
        let t = self.value(a);
        let mut max = vec![f64::NEG_INFINITY; n_seg * c];
        for (e, &s) in segments.iter().enumerate() {
            for j in 0..c {
                max[s * c + j] = max[s * c + j].max(t.get(e, j));
            }
        }
        let mut out = vec![0.0; r * c];
        let mut z = vec![0.0; n_seg * c];
        for (e, &s) in segments.iter().enumerate() {
            for j in 0..c {
                let v = (t.get(e, j) - max[s * c + j]).exp();
                out[e * c + j] = v;
                z[s * c + j] += v;
            }
        }
        for (e, &s) in segments.iter().enumerate() {
            for j in 0..c {
                out[e * c + j] /= z[s * c + j];
            }
        }
        self.push(Tensor::from_parts(r, c, out), Op::SegmentSoftmax(a.0, segments.to_vec()), "segment_softmax")
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)` without affine terms.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var, AdError> {
        let (r, c) = self.dims(a)?;
        let t = self.value(a);
        let mut out = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = t.row_slice(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + eps).sqrt();
            inv_std.push(s);
            out.extend(row.iter().map(|x| (x - mean) * s));
        }
        self.push(Tensor::from_parts(r, c, out), Op::LayerNorm(a.0, inv_std), "layer_norm")
    }

    /// Reverse pass from a scalar, accumulating parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<(), AdError> {
        let grads = self.gradients(loss)?;
        for (&id, &v) in &self.params {
            if let Some(g) = &grads.grads[v.0] {
                store.grad_mut(id).add_assign(g);
            }
        }
        Ok(())
    }

    /// Reverse pass from a scalar, returning the gradient of every input and parameter leaf.
    pub fn gradients(&self, loss: Var) -> Result<Gradients, AdError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(AdError::NotScalar(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lt.shape(), 1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf | Op::Param => {
                    grads[i] = Some(g);
                    continue;
                }
                op => self.propagate(i, op, &g, &mut grads),
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], target: usize, g: Tensor) {
        if !self.nodes[target].needs_grad {
            return;
        }
        match &mut grads[target] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Sums `g` down to the shape of node `target` (undoing broadcasting).
    fn reduce_to(&self, g: &Tensor, target: usize) -> Tensor {
        let (r, c) = self.nodes[target].value.rc();
        let (gr, gc) = g.rc();
        if (r, c) == (gr, gc) {
            return g.clone();
        }
        let mut out = vec![0.0; r * c];
        for i in 0..gr {
            for j in 0..gc {
                let ti = if r == 1 { 0 } else { i };
                let tj = if c == 1 { 0 } else { j };
                out[ti * c + tj] += g.get(i, j);
            }
        }
        Tensor::from_parts(r, c, out)
    }

    fn propagate(&self, i: usize, op: &Op, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[i].value;
        let val = |k: usize| &self.nodes[k].value;
        let needs = |k: usize| self.nodes[k].needs_grad;
        match op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                if needs(*a) {
                    self.accumulate(grads, *a, matmul_nt(g, val(*b)));
                }
                if needs(*b) {
                    self.accumulate(grads, *b, matmul_tn(val(*a), g));
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if needs(*a) {
                    self.accumulate(grads, *a, self.reduce_to(g, *a));
                }
                if needs(*b) {
                    let mut gb = self.reduce_to(g, *b);
                    if sign < 0.0 {
                        gb.data_mut().iter_mut().for_each(|x| *x = -*x);
                    }
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b) => {
                let (r, c) = g.rc();
                let expand = |k: usize| {
                    let t = val(k);
                    let (tr, tc) = t.rc();
                    let mut data = Vec::with_capacity(r * c);
                    for x in 0..r {
                        for y in 0..c {
                            data.push(t.get(if tr == 1 { 0 } else { x }, if tc == 1 { 0 } else { y }));
                        }
                    }
                    data
                };
                if needs(*a) {
                    let other = expand(*b);
                    let ga = Tensor::from_parts(r, c, g.data().iter().zip(&other).map(|(x, y)| x * y).collect());
                    self.accumulate(grads, *a, self.reduce_to(&ga, *a));
                }
                if needs(*b) {
                    let other = expand(*a);
                    let gb = Tensor::from_parts(r, c, g.data().iter().zip(&other).map(|(x, y)| x * y).collect());
                    self.accumulate(grads, *b, self.reduce_to(&gb, *b));
                }
            }
            Op::Affine(a, s) => {
                self.accumulate(grads, *a, g.map(|x| x * s));
            }
            Op::Concat(parts, axis) => {
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = val(p).rc();
                    if needs(p) {
                        let piece = match axis {
                            Axis::Rows => {
                                let c = g.rc().1;
                                Tensor::from_parts(pr, pc, g.data()[offset * c..(offset + pr) * c].to_vec())
                            }
                            Axis::Cols => {
                                let mut data = Vec::with_capacity(pr * pc);
                                for x in 0..pr {
                                    data.extend_from_slice(&g.row_slice(x)[offset..offset + pc]);
                                }
                                Tensor::from_parts(pr, pc, data)
                            }
                        };
                        self.accumulate(grads, p, piece);
                    }
                    offset += if *axis == Axis::Rows { pr } else { pc };
                }
            }
            Op::Slice(a, axis, start) => {
                let (r, c) = val(*a).rc();
                let mut full = vec![0.0; r * c];
                let (gr, gc) = g.rc();
                for x in 0..gr {
                    for y in 0..gc {
                        let (sx, sy) = match axis {
                            Axis::Rows => (x + start, y),
                            Axis::Cols => (x, y + start),
                        };
                        full[sx * c + sy] = g.get(x, y);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, full));
            }
            Op::Transpose(a) => {
                self.accumulate(grads, *a, g.transpose().expect("rank-2 gradient"));
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).rc();
                let (gr, gc) = g.rc();
                let mut data = Vec::with_capacity(r * c);
                for x in 0..r {
                    for y in 0..c {
                        data.push(g.get(if gr == 1 { 0 } else { x }, if gc == 1 { 0 } else { y }));
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, data));
            }
            Op::Broadcast(a) => {
                self.accumulate(grads, *a, self.reduce_to(g, *a));
            }
            Op::Softmax(a, axis) => {
                let (r, c) = out.rc();
                let y = out.data();
                let mut dx = vec![0.0; r * c];
                let (lines, len, stride, step) = match axis {
                    Axis::Cols => (r, c, c, 1),
                    Axis::Rows => (c, r, 1, c),
                };
                for l in 0..lines {
                    let idx = |k: usize| l * stride + k * step;
                    let dot: f64 = (0..len).map(|k| g.data()[idx(k)] * y[idx(k)]).sum();
                    for k in 0..len {
                        dx[idx(k)] = y[idx(k)] * (g.data()[idx(k)] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, dx));
            }
            Op::Unary(a, f) => {
                let x = val(*a).data();
                let data = g
                    .data()
                    .iter()
                    .zip(x)
                    .zip(out.data())
                    .map(|((gv, &xv), &yv)| gv * f.derivative(xv, yv))
                    .collect();
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), data).expect("same shape"));
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), data).expect("same shape"));
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = val(*a).rc();
                let mut data = vec![0.0; r * c];
                for (e, &row) in idx.iter().enumerate() {
                    for (d, x) in data[row * c..(row + 1) * c].iter_mut().zip(g.row_slice(e)) {
                        *d += x;
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, data));
            }
            Op::ScatterAddRows(a, idx) => {
                let c = g.rc().1;
                let mut data = Vec::with_capacity(idx.len() * c);
                for &row in idx {
                    data.extend_from_slice(g.row_slice(row));
                }
                self.accumulate(grads, *a, Tensor::from_parts(idx.len(), c, data));
            }
            Op::SegmentSoftmax(a, segments) => {
                let (r, c) = out.rc();
                let n_seg = segments.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg * c];
                for (e, &s) in segments.iter().enumerate() {
                    for j in 0..c {
                        dot[s * c + j] += g.get(e, j) * out.get(e, j);
                    }
                }
                let mut dx = vec![0.0; r * c];
                for (e, &s) in segments.iter().enumerate() {
                    for j in 0..c {
                        dx[e * c + j] = out.get(e, j) * (g.get(e, j) - dot[s * c + j]);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, dx));
            }
            Op::LayerNorm(a, inv_std) => {
                let (r, c) = out.rc();
                let mut dx = Vec::with_capacity(r * c);
                for (x, s) in inv_std.iter().enumerate() {
                    let gy = g.row_slice(x);
                    let y = out.row_slice(x);
                    let mg = gy.iter().sum::<f64>() / c as f64;
                    let mgy = gy.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                    dx.extend(gy.iter().zip(y).map(|(gv, yv)| s * (gv - mg - yv * mgy)));
                }
                self.accumulate(grads, *a, Tensor::from_parts(r, c, dx));
            }
        }
    }
}

/// Result of [`Tape::gradients`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of an input or parameter leaf; `None` when unreachable.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}
