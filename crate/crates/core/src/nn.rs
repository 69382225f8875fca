//! Small layer helpers over [`Graph`] shared by the encoders and the policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{Bound, Graph, ParamId, ParamStore, Result, Var};

/// Affine map `x W + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: store.xavier(format!("{name}.w"), &[input, output], rng),
            b: store.zeros(format!("{name}.b"), &[output]),
        }
    }

    pub fn vec(&self, g: &Graph, p: &Bound, x: Var) -> Result<Var> {
        g.linear(x, p[self.w], p[self.b])
    }

    /// Row-wise application to a `[r x input]` matrix.
    pub fn rows(&self, g: &Graph, p: &Bound, x: Var) -> Result<Var> {
        let y = g.matmul(x, p[self.w])?;
        g.add_row(y, p[self.b])
    }
}

/// LSTM cell with fused gate weights in (input, forget, cell, output) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let wx = store.xavier(format!("{name}.wx"), &[input, 4 * hidden], rng);
        let wh = store.xavier(format!("{name}.wh"), &[hidden, 4 * hidden], rng);
        let b = store.zeros(format!("{name}.b"), &[4 * hidden]);
        // forget gate starts open
        for v in &mut store.get_mut(b).data_mut()[hidden..2 * hidden] {
            *v = 1.0;
        }
        Self { wx, wh, b, hidden }
    }

    /// One step; returns `(h, c)`.
    pub fn step(&self, g: &Graph, p: &Bound, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let zx = g.vecmat(x, p[self.wx])?;
        self.step_pre(g, p, zx, h, c)
    }

    /// Step with the input projection `x Wx` already computed.
    pub fn step_pre(&self, g: &Graph, p: &Bound, zx: Var, h: Var, c: Var) -> Result<(Var, Var)> {
        let n = self.hidden;
        let z = g.add(zx, g.vecmat(h, p[self.wh])?)?;
        let z = g.add(z, p[self.b])?;
        let i = g.sigmoid(g.slice(z, 0, n)?);
        let f = g.sigmoid(g.slice(z, n, n)?);
        let cand = g.tanh(g.slice(z, 2 * n, n)?);
        let o = g.sigmoid(g.slice(z, 3 * n, n)?);
        let c = g.add(g.mul(f, c)?, g.mul(i, cand)?)?;
        let h = g.mul(o, g.tanh(c))?;
        Ok((h, c))
    }

    pub fn zero_state(&self, g: &Graph) -> (Var, Var) {
        let z = crate::tensor::Tensor::zeros(&[self.hidden]);
        (g.constant(z.clone()), g.constant(z))
    }

    /// Runs over the rows of `xs[T x input]` and returns the final hidden state.
    pub fn run(&self, g: &Graph, p: &Bound, xs: Var, reverse: bool) -> Result<Var> {
        let zx = g.matmul(xs, p[self.wx])?;
        let t = g.shape(zx)[0];
        let width = 4 * self.hidden;
        let flat = g.reshape(zx, &[t * width])?;
        let (mut h, mut c) = self.zero_state(g);
        for k in 0..t {
            let k = if reverse { t - 1 - k } else { k };
            let row = g.slice(flat, k * width, width)?;
            (h, c) = self.step_pre(g, p, row, h, c)?;
        }
        Ok(h)
    }
}
