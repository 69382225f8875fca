use std::cell::RefCell;

use super::{arg_err, norm, softmax_slice, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MatMul(usize, usize),
    VecMat(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Softmax(usize),
    SoftmaxRows(usize),
    Outer(usize, usize),
    Concat(Vec<usize>),
    StackRows(Vec<usize>),
    Slice(usize, usize),
    Rows(usize, Vec<usize>),
    Pick(usize, Vec<usize>),
    Sum(usize),
    Mean(usize),
    MeanRows(usize),
    Cosine(usize, usize),
    NormalizeRows(usize),
    LayerNormRows(usize, f64),
    Sharpen(usize, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Dynamic tape. Every operation appends a node whose parents already
/// exist, so node order is a valid topological order.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Vec<f64>>>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// `c[m x n] += a[m x k] * b[k x n]`
fn gemm(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
}

fn transpose_data(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Leaf that participates in gradient computation.
    pub fn param(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf treated as a constant.
    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Runs `f` on the value of `v` without cloning it.
    pub fn with_value<R>(&self, v: Var, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[v.0].value)
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    fn binary_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let nodes = self.nodes.borrow();
        let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let nodes = self.nodes.borrow();
        let x = &nodes[a.0].value;
        Tensor {
            shape: x.shape().to_vec(),
            data: x.data().iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a.0, b.0), self.rg(&[a.0, b.0])))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a.0, b.0), self.rg(&[a.0, b.0])))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        let t = self.binary_same("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a.0, b.0), self.rg(&[a.0, b.0])))
    }

    fn row_broadcast(
        &self,
        op: &'static str,
        m: Var,
        v: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let nodes = self.nodes.borrow();
        let (x, y) = (&nodes[m.0].value, &nodes[v.0].value);
        if x.shape().len() != 2 || y.shape().len() != 1 || x.shape()[1] != y.shape()[0] {
            return Err(shape_err(op, x, y));
        }
        let cols = y.numel();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, p)| f(*p, y.data()[i % cols]))
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }

    /// `m[r x n] + v[n]`, broadcasting `v` over rows.
    pub fn add_row(&self, m: Var, v: Var) -> Result<Var> {
        let t = self.row_broadcast("add_row", m, v, |x, y| x + y)?;
        Ok(self.push(t, Op::AddRow(m.0, v.0), self.rg(&[m.0, v.0])))
    }

    /// `m[r x n] * v[n]` elementwise, broadcasting `v` over rows.
    pub fn mul_row(&self, m: Var, v: Var) -> Result<Var> {
        let t = self.row_broadcast("mul_row", m, v, |x, y| x * y)?;
        Ok(self.push(t, Op::MulRow(m.0, v.0), self.rg(&[m.0, v.0])))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let t = self.unary(a, |x| x * c);
        self.push(t, Op::Scale(a.0, c), self.rg(&[a.0]))
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        let t = self.unary(a, |x| x + c);
        self.push(t, Op::AddScalar(a.0), self.rg(&[a.0]))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            if x.shape().len() != 2 || y.shape().len() != 2 || x.shape()[1] != y.shape()[0] {
                return Err(shape_err("matmul", x, y));
            }
            let (m, k, n) = (x.shape()[0], x.shape()[1], y.shape()[1]);
            let mut out = vec![0.0; m * n];
            gemm(x.data(), y.data(), &mut out, m, k, n);
            Tensor {
                shape: vec![m, n],
                data: out,
            }
        };
        Ok(self.push(t, Op::MatMul(a.0, b.0), self.rg(&[a.0, b.0])))
    }

    /// Row vector times matrix: `x[k] * w[k x n] -> [n]`.
    pub fn vecmat(&self, x: Var, w: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let (a, b) = (&nodes[x.0].value, &nodes[w.0].value);
            if a.shape().len() != 1 || b.shape().len() != 2 || a.shape()[0] != b.shape()[0] {
                return Err(shape_err("vecmat", a, b));
            }
            let (k, n) = (b.shape()[0], b.shape()[1]);
            let mut out = vec![0.0; n];
            gemm(a.data(), b.data(), &mut out, 1, k, n);
            Tensor::vector(out)
        };
        Ok(self.push(t, Op::VecMat(x.0, w.0), self.rg(&[x.0, w.0])))
    }

    /// `x * w + b` for a vector `x`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.vecmat(x, w)?;
        self.add(y, b)
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.shape().len() != 2 {
                return Err(arg_err("transpose", format!("expected matrix, got {:?}", x.shape())));
            }
            let (r, c) = (x.shape()[0], x.shape()[1]);
            Tensor {
                shape: vec![c, r],
                data: transpose_data(x.data(), r, c),
            }
        };
        Ok(self.push(t, Op::Transpose(a.0), self.rg(&[a.0])))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).reshape(shape.to_vec())?;
        Ok(self.push(t, Op::Reshape(a.0), self.rg(&[a.0])))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let t = self.unary(a, sigmoid);
        self.push(t, Op::Sigmoid(a.0), self.rg(&[a.0]))
    }

    pub fn tanh(&self, a: Var) -> Var {
        let t = self.unary(a, f64::tanh);
        self.push(t, Op::Tanh(a.0), self.rg(&[a.0]))
    }

    pub fn relu(&self, a: Var) -> Var {
        let t = self.unary(a, |x| x.max(0.0));
        self.push(t, Op::Relu(a.0), self.rg(&[a.0]))
    }

    /// Softmax over a non-empty vector.
    pub fn softmax(&self, a: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.shape().len() != 1 || x.numel() == 0 {
                return Err(arg_err("softmax", format!("expected non-empty vector, got {:?}", x.shape())));
            }
            Tensor::vector(softmax_slice(x.data()))
        };
        Ok(self.push(t, Op::Softmax(a.0), self.rg(&[a.0])))
    }

    /// Softmax applied independently to each row of a matrix.
    pub fn softmax_rows(&self, a: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.shape().len() != 2 || x.shape()[1] == 0 {
                return Err(arg_err("softmax_rows", format!("expected matrix, got {:?}", x.shape())));
            }
            let cols = x.shape()[1];
            let data = x.data().chunks(cols).flat_map(softmax_slice).collect();
            Tensor {
                shape: x.shape().to_vec(),
                data,
            }
        };
        Ok(self.push(t, Op::SoftmaxRows(a.0), self.rg(&[a.0])))
    }

    /// `u[p] ⊗ s[q] -> [p x q]`, row-major over (u index, s index).
    pub fn outer(&self, u: Var, s: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[u.0].value, &nodes[s.0].value);
            if x.shape().len() != 1 || y.shape().len() != 1 {
                return Err(shape_err("outer", x, y));
            }
            super::outer(x.data(), y.data())?
        };
        Ok(self.push(t, Op::Outer(u.0, s.0), self.rg(&[u.0, s.0])))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(arg_err("concat", "no inputs"));
        }
        let t = {
            let nodes = self.nodes.borrow();
            let mut data = Vec::new();
            for p in parts {
                let x = &nodes[p.0].value;
                if x.shape().len() != 1 {
                    return Err(arg_err("concat", format!("expected vectors, got {:?}", x.shape())));
                }
                data.extend_from_slice(x.data());
            }
            Tensor::vector(data)
        };
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(t, Op::Concat(ids), rg))
    }

    /// Stacks equal-length vectors into a `[n x d]` matrix.
    pub fn stack_rows(&self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(arg_err("stack_rows", "no inputs"));
        }
        let t = {
            let nodes = self.nodes.borrow();
            let width = nodes[rows[0].0].value.numel();
            let mut data = Vec::with_capacity(width * rows.len());
            for r in rows {
                let x = &nodes[r.0].value;
                if x.shape().len() != 1 || x.numel() != width {
                    return Err(shape_err("stack_rows", &nodes[rows[0].0].value, x));
                }
                data.extend_from_slice(x.data());
            }
            Tensor {
                shape: vec![rows.len(), width],
                data,
            }
        };
        let ids: Vec<usize> = rows.iter().map(|p| p.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(t, Op::StackRows(ids), rg))
    }

    /// Contiguous sub-vector `[start, start + len)`.
    pub fn slice(&self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.shape().len() != 1 || start + len > x.numel() {
                return Err(arg_err(
                    "slice",
                    format!("range {start}..{} out of bounds for {:?}", start + len, x.shape()),
                ));
            }
            Tensor::vector(x.data()[start..start + len].to_vec())
        };
        Ok(self.push(t, Op::Slice(a.0, start), self.rg(&[a.0])))
    }

    /// Embedding-row lookup: gathers rows of `table[v x d]` into `[ids.len() x d]`.
    pub fn rows(&self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[table.0].value;
            if x.shape().len() != 2 {
                return Err(arg_err("rows", format!("expected matrix, got {:?}", x.shape())));
            }
            let (n, d) = (x.shape()[0], x.shape()[1]);
            let mut data = Vec::with_capacity(ids.len() * d);
            for &i in ids {
                if i >= n {
                    return Err(arg_err("rows", format!("row {i} out of range for {n} rows")));
                }
                data.extend_from_slice(x.row(i));
            }
            Tensor {
                shape: vec![ids.len(), d],
                data,
            }
        };
        Ok(self.push(t, Op::Rows(table.0, ids.to_vec()), self.rg(&[table.0])))
    }

    /// Gathers entries by flat (row-major) index into a vector.
    pub fn pick(&self, a: Var, flat: &[usize]) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let mut data = Vec::with_capacity(flat.len());
            for &i in flat {
                if i >= x.numel() {
                    return Err(arg_err("pick", format!("index {i} out of range for {:?}", x.shape())));
                }
                data.push(x.data()[i]);
            }
            Tensor::vector(data)
        };
        Ok(self.push(t, Op::Pick(a.0, flat.to_vec()), self.rg(&[a.0])))
    }

    pub fn sum(&self, a: Var) -> Var {
        let s = self.with_value(a, |x| x.data().iter().sum());
        self.push(Tensor::scalar(s), Op::Sum(a.0), self.rg(&[a.0]))
    }

    pub fn mean(&self, a: Var) -> Result<Var> {
        let (s, n) = self.with_value(a, |x| (x.data().iter().sum::<f64>(), x.numel()));
        if n == 0 {
            return Err(arg_err("mean", "empty input"));
        }
        Ok(self.push(Tensor::scalar(s / n as f64), Op::Mean(a.0), self.rg(&[a.0])))
    }

    /// Column means of a `[r x n]` matrix, giving `[n]`.
    pub fn mean_rows(&self, a: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            if x.shape().len() != 2 || x.shape()[0] == 0 {
                return Err(arg_err("mean_rows", format!("expected non-empty matrix, got {:?}", x.shape())));
            }
            let (r, c) = (x.shape()[0], x.shape()[1]);
            let mut out = vec![0.0; c];
            for row in x.data().chunks(c) {
                add_into(&mut out, row);
            }
            out.iter_mut().for_each(|v| *v /= r as f64);
            Tensor::vector(out)
        };
        Ok(self.push(t, Op::MeanRows(a.0), self.rg(&[a.0])))
    }

    /// Scalar cosine similarity of two equal-length vectors; zero-norm gives 0.
    pub fn cosine(&self, a: Var, b: Var) -> Result<Var> {
        let s = {
            let nodes = self.nodes.borrow();
            let (x, y) = (&nodes[a.0].value, &nodes[b.0].value);
            if x.shape().len() != 1 || x.shape() != y.shape() {
                return Err(shape_err("cosine", x, y));
            }
            super::cosine_slice(x.data(), y.data())
        };
        Ok(self.push(Tensor::scalar(s), Op::Cosine(a.0, b.0), self.rg(&[a.0, b.0])))
    }

    /// Scales every row of a matrix (or a single vector) to unit L2 norm.
    /// Zero rows stay zero.
    pub fn normalize_rows(&self, a: Var) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let cols = match x.shape() {
                [n] => *n,
                [_, c] => *c,
                s => return Err(arg_err("normalize_rows", format!("unsupported shape {s:?}"))),
            };
            let mut data = x.data().to_vec();
            if cols > 0 {
                for row in data.chunks_mut(cols) {
                    let n = norm(row);
                    if n > 0.0 {
                        row.iter_mut().for_each(|v| *v /= n);
                    }
                }
            }
            Tensor {
                shape: x.shape().to_vec(),
                data,
            }
        };
        Ok(self.push(t, Op::NormalizeRows(a.0), self.rg(&[a.0])))
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)` without affine terms.
    pub fn layer_norm_rows(&self, a: Var, eps: f64) -> Result<Var> {
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let cols = match x.shape() {
                [n] => *n,
                [_, c] => *c,
                s => return Err(arg_err("layer_norm_rows", format!("unsupported shape {s:?}"))),
            };
            if cols == 0 {
                return Err(arg_err("layer_norm_rows", "zero-width rows"));
            }
            let mut data = x.data().to_vec();
            for row in data.chunks_mut(cols) {
                let mu = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / cols as f64;
                let inv = 1.0 / (var + eps).sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mu) * inv);
            }
            Tensor {
                shape: x.shape().to_vec(),
                data,
            }
        };
        Ok(self.push(t, Op::LayerNormRows(a.0, eps), self.rg(&[a.0])))
    }

    /// Attention sharpening `w_i^γ / Σ_j w_j^γ` over non-negative weights.
    /// With `γ == 1` the input is returned unchanged.
    pub fn sharpen(&self, w: Var, gamma: f64) -> Result<Var> {
        if !(gamma >= 1.0) {
            return Err(arg_err("sharpen", format!("gamma must be >= 1, got {gamma}")));
        }
        if gamma == 1.0 {
            return Ok(w);
        }
        let t = {
            let nodes = self.nodes.borrow();
            let x = &nodes[w.0].value;
            if x.shape().len() != 1 || x.numel() == 0 {
                return Err(arg_err("sharpen", format!("expected non-empty vector, got {:?}", x.shape())));
            }
            if x.data().iter().any(|v| *v < 0.0) {
                return Err(arg_err("sharpen", "weights must be non-negative"));
            }
            // Rescaling by the max keeps w^γ away from underflow; the ratio is unchanged.
            let max = x.data().iter().copied().fold(0.0, f64::max);
            let p: Vec<f64> = x
                .data()
                .iter()
                .map(|v| if max > 0.0 { (v / max).powf(gamma) } else { 1.0 })
                .collect();
            let z: f64 = p.iter().sum();
            Tensor::vector(p.into_iter().map(|v| v / z).collect())
        };
        Ok(self.push(t, Op::Sharpen(w.0, gamma), self.rg(&[w.0])))
    }

    /// Reverse pass from a one-element root. Gradients of earlier backward
    /// calls on the same graph are discarded.
    pub fn backward(&self, root: Var) -> Result<()> {
        let nodes = self.nodes.borrow();
        let rootv = &nodes[root.0].value;
        if !rootv.is_scalar() {
            return Err(arg_err(
                "backward",
                format!("root must be a scalar, got shape {:?}", rootv.shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        drop(nodes);
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the last backward root with respect to `v`, or `None`
    /// when `v` did not influence the root.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let grads = self.grads.borrow();
        let g = grads.get(v.0)?.as_ref()?;
        let shape = self.shape(v);
        Some(Tensor {
            shape,
            data: g.clone(),
        })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, contrib: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(existing) => add_into(existing, &contrib),
        slot @ None => *slot = Some(contrib),
    }
}

fn accumulate_with(
    grads: &mut [Option<Vec<f64>>],
    nodes: &[Node],
    id: usize,
    f: impl FnOnce(&mut [f64]),
) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.numel()]);
    f(slot);
}

fn backprop(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = &nodes[id].value;
    let val = |i: usize| &nodes[i].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g.to_vec());
            accumulate(grads, nodes, *b, g.to_vec());
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, g.to_vec());
            accumulate(grads, nodes, *b, g.iter().map(|v| -v).collect());
        }
        Op::Mul(a, b) => {
            let (x, y) = (val(*a).data(), val(*b).data());
            accumulate(grads, nodes, *a, g.iter().zip(y).map(|(g, y)| g * y).collect());
            accumulate(grads, nodes, *b, g.iter().zip(x).map(|(g, x)| g * x).collect());
        }
        Op::AddRow(m, v) => {
            accumulate(grads, nodes, *m, g.to_vec());
            let cols = val(*v).numel();
            accumulate_with(grads, nodes, *v, |dst| {
                for row in g.chunks(cols) {
                    add_into(dst, row);
                }
            });
        }
        Op::MulRow(m, v) => {
            let (x, y) = (val(*m).data(), val(*v).data());
            let cols = y.len();
            accumulate(
                grads,
                nodes,
                *m,
                g.iter().enumerate().map(|(i, g)| g * y[i % cols]).collect(),
            );
            accumulate_with(grads, nodes, *v, |dst| {
                for (i, gv) in g.iter().enumerate() {
                    dst[i % cols] += gv * x[i];
                }
            });
        }
        Op::Scale(a, c) => accumulate(grads, nodes, *a, g.iter().map(|v| v * c).collect()),
        Op::AddScalar(a) | Op::Reshape(a) => accumulate(grads, nodes, *a, g.to_vec()),
        Op::MatMul(a, b) => {
            let (x, y) = (val(*a), val(*b));
            let (m, k, n) = (x.shape()[0], x.shape()[1], y.shape()[1]);
            if nodes[*a].requires_grad {
                // dA = dC * B^T
                let bt = transpose_data(y.data(), k, n);
                accumulate_with(grads, nodes, *a, |dst| gemm(g, &bt, dst, m, n, k));
            }
            if nodes[*b].requires_grad {
                // dB = A^T * dC
                let at = transpose_data(x.data(), m, k);
                accumulate_with(grads, nodes, *b, |dst| gemm(&at, g, dst, k, m, n));
            }
        }
        Op::VecMat(xv, w) => {
            let (x, wt) = (val(*xv), val(*w));
            let (k, n) = (wt.shape()[0], wt.shape()[1]);
            if nodes[*xv].requires_grad {
                accumulate_with(grads, nodes, *xv, |dst| {
                    for (p, d) in dst.iter_mut().enumerate() {
                        let row = &wt.data()[p * n..(p + 1) * n];
                        *d += row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
            }
            if nodes[*w].requires_grad {
                accumulate_with(grads, nodes, *w, |dst| gemm(x.data(), g, dst, k, 1, n));
            }
        }
        Op::Transpose(a) => {
            let (r, c) = (out.shape()[0], out.shape()[1]);
            accumulate(grads, nodes, *a, transpose_data(g, r, c));
        }
        Op::Sigmoid(a) => accumulate(
            grads,
            nodes,
            *a,
            g.iter().zip(out.data()).map(|(g, y)| g * y * (1.0 - y)).collect(),
        ),
        Op::Tanh(a) => accumulate(
            grads,
            nodes,
            *a,
            g.iter().zip(out.data()).map(|(g, y)| g * (1.0 - y * y)).collect(),
        ),
        Op::Relu(a) => accumulate(
            grads,
            nodes,
            *a,
            g.iter()
                .zip(val(*a).data())
                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
        ),
        Op::Softmax(a) => accumulate(grads, nodes, *a, softmax_backward(out.data(), g)),
        Op::SoftmaxRows(a) => {
            let cols = out.shape()[1];
            let d = out
                .data()
                .chunks(cols)
                .zip(g.chunks(cols))
                .flat_map(|(y, g)| softmax_backward(y, g))
                .collect();
            accumulate(grads, nodes, *a, d);
        }
        Op::Outer(u, s) => {
            let (x, y) = (val(*u).data(), val(*s).data());
            let q = y.len();
            accumulate_with(grads, nodes, *u, |dst| {
                for (i, d) in dst.iter_mut().enumerate() {
                    *d += g[i * q..(i + 1) * q].iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
                }
            });
            accumulate_with(grads, nodes, *s, |dst| {
                for (i, xv) in x.iter().enumerate() {
                    for (j, d) in dst.iter_mut().enumerate() {
                        *d += g[i * q + j] * xv;
                    }
                }
            });
        }
        Op::Concat(parts) | Op::StackRows(parts) => {
            let mut off = 0;
            for p in parts {
                let n = val(*p).numel();
                accumulate(grads, nodes, *p, g[off..off + n].to_vec());
                off += n;
            }
        }
        Op::Slice(a, start) => {
            let start = *start;
            accumulate_with(grads, nodes, *a, |dst| add_into(&mut dst[start..start + g.len()], g));
        }
        Op::Rows(table, ids) => {
            let d = val(*table).shape()[1];
            accumulate_with(grads, nodes, *table, |dst| {
                for (k, &i) in ids.iter().enumerate() {
                    add_into(&mut dst[i * d..(i + 1) * d], &g[k * d..(k + 1) * d]);
                }
            });
        }
        Op::Pick(a, idx) => {
            accumulate_with(grads, nodes, *a, |dst| {
                for (k, &i) in idx.iter().enumerate() {
                    dst[i] += g[k];
                }
            });
        }
        Op::Sum(a) => accumulate(grads, nodes, *a, vec![g[0]; val(*a).numel()]),
        Op::Mean(a) => {
            let n = val(*a).numel();
            accumulate(grads, nodes, *a, vec![g[0] / n as f64; n]);
        }
        Op::MeanRows(a) => {
            let (r, c) = (val(*a).shape()[0], val(*a).shape()[1]);
            let mut d = Vec::with_capacity(r * c);
            for _ in 0..r {
                d.extend(g.iter().map(|v| v / r as f64));
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::Cosine(a, b) => {
            let (x, y) = (val(*a).data(), val(*b).data());
            let (nx, ny) = (norm(x), norm(y));
            if nx == 0.0 || ny == 0.0 {
                return;
            }
            let c = out.data()[0];
            let gs = g[0];
            // d cos / dx = y / (|x||y|) - cos * x / |x|^2
            accumulate(
                grads,
                nodes,
                *a,
                x.iter()
                    .zip(y)
                    .map(|(xv, yv)| gs * (yv / (nx * ny) - c * xv / (nx * nx)))
                    .collect(),
            );
            accumulate(
                grads,
                nodes,
                *b,
                x.iter()
                    .zip(y)
                    .map(|(xv, yv)| gs * (xv / (nx * ny) - c * yv / (ny * ny)))
                    .collect(),
            );
        }
        Op::NormalizeRows(a) => {
            let x = val(*a);
            let cols = *x.shape().last().unwrap();
            let mut d = vec![0.0; x.numel()];
            if cols > 0 {
                for ((drow, xrow), (yrow, grow)) in d
                    .chunks_mut(cols)
                    .zip(x.data().chunks(cols))
                    .zip(out.data().chunks(cols).zip(g.chunks(cols)))
                {
                    let n = norm(xrow);
                    if n == 0.0 {
                        continue;
                    }
                    let yg: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                    for ((dv, yv), gv) in drow.iter_mut().zip(yrow).zip(grow) {
                        *dv = (gv - yv * yg) / n;
                    }
                }
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::LayerNormRows(a, eps) => {
            let x = val(*a);
            let cols = *x.shape().last().unwrap();
            let mut d = vec![0.0; x.numel()];
            for ((drow, xrow), (yrow, grow)) in d
                .chunks_mut(cols)
                .zip(x.data().chunks(cols))
                .zip(out.data().chunks(cols).zip(g.chunks(cols)))
            {
                let n = cols as f64;
                let mu = xrow.iter().sum::<f64>() / n;
                let var = xrow.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
                let inv = 1.0 / (var + eps).sqrt();
                let gm = grow.iter().sum::<f64>() / n;
                let gym = grow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / n;
                for ((dv, yv), gv) in drow.iter_mut().zip(yrow).zip(grow) {
                    *dv = inv * (gv - gm - yv * gym);
                }
            }
            accumulate(grads, nodes, *a, d);
        }
        Op::Sharpen(a, gamma) => {
            let x = val(*a).data();
            let s = out.data();
            let gs: f64 = g.iter().zip(s).map(|(a, b)| a * b).sum();
            // s_i = p_i / Z with p_i = w_i^γ; dp_i/dw_i = γ p_i / w_i
            let d = x
                .iter()
                .zip(s)
                .zip(g)
                .map(|((w, si), gi)| if *w > 0.0 { (gi - gs) * si * gamma / w } else { 0.0 })
                .collect();
            accumulate(grads, nodes, *a, d);
        }
    }
}

fn softmax_backward(y: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    y.iter().zip(g).map(|(yv, gv)| yv * (gv - dot)).collect()
}
