use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{arg_err, Graph, Result, Tensor, Var};

/// Compares reverse-mode gradients of a scalar function against central
/// differences.
///
/// Returns `max_i |analytic_i - numeric_i| / max(1, |analytic_i|)`.
pub fn check_gradients<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&Graph, Var) -> Result<Var>,
{
    if !(eps > 0.0) {
        return Err(arg_err("check_gradients", "eps must be positive"));
    }
    let eval = |t: &Tensor| -> Result<f64> {
        let g = Graph::new();
        let v = g.constant(t.clone());
        let out = f(&g, v)?;
        g.with_value(out, Tensor::item)
            .ok_or_else(|| arg_err("check_gradients", "function output is not a scalar"))
    };

    let g = Graph::new();
    let v = g.param(x.clone());
    let out = f(&g, v)?;
    g.backward(out)?;
    let analytic = g.grad(v).unwrap_or_else(|| Tensor::zeros(x.shape()));

    let mut worst = 0.0f64;
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

/// Result of [`check_gradients_piecewise`].
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseCheck {
    /// Worst relative error over coordinates whose stencil stays on one piece.
    pub smooth: f64,
    /// Coordinates whose stencil at `eps` crossed a kink.
    pub straddled: usize,
    /// Worst relative error of the straddling coordinates at `fine_eps`.
    pub refined: f64,
    /// Straddling coordinates that still cross a kink at `fine_eps`.
    pub unresolved: usize,
}

/// Gradient check for piecewise-smooth functions. `pattern` names the
/// active piece (which hinges are on, which argmax won); a coordinate whose
/// `x ± eps` probes land on another piece is rechecked with `fine_eps`.
pub fn check_gradients_piecewise<F, P, K>(f: F, pattern: P, x: &Tensor, eps: f64, fine_eps: f64) -> Result<PiecewiseCheck>
where
    F: Fn(&Graph, Var) -> Result<Var>,
    P: Fn(&Tensor) -> K,
    K: PartialEq,
{
    if !(eps > 0.0 && fine_eps > 0.0) {
        return Err(arg_err("check_gradients_piecewise", "steps must be positive"));
    }
    let eval = |t: &Tensor| -> Result<f64> {
        let g = Graph::new();
        let v = g.constant(t.clone());
        let out = f(&g, v)?;
        g.with_value(out, Tensor::item)
            .ok_or_else(|| arg_err("check_gradients_piecewise", "function output is not a scalar"))
    };
    let g = Graph::new();
    let v = g.param(x.clone());
    let out = f(&g, v)?;
    g.backward(out)?;
    let analytic = g.grad(v).unwrap_or_else(|| Tensor::zeros(x.shape()));
    let here = pattern(x);

    let mut res = PiecewiseCheck {
        smooth: 0.0,
        straddled: 0,
        refined: 0.0,
        unresolved: 0,
    };
    let mut probe = x.clone();
    // central difference at step h, and whether both probes stay on this piece
    let mut central = |i: usize, h: f64| -> Result<(f64, bool)> {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let (up, same_up) = (eval(&probe)?, pattern(&probe) == here);
        probe.data_mut()[i] = orig - h;
        let (down, same_down) = (eval(&probe)?, pattern(&probe) == here);
        probe.data_mut()[i] = orig;
        Ok(((up - down) / (2.0 * h), same_up && same_down))
    };
    for i in 0..x.numel() {
        let a = analytic.data()[i];
        let rel = |n: f64| (a - n).abs() / a.abs().max(1.0);
        let (n, smooth) = central(i, eps)?;
        if smooth {
            res.smooth = res.smooth.max(rel(n));
            continue;
        }
        res.straddled += 1;
        let (n, smooth) = central(i, fine_eps)?;
        res.refined = res.refined.max(rel(n));
        res.unresolved += usize::from(!smooth);
    }
    Ok(res)
}

/// Reduces any tensor to a scalar with a fixed random weighting so every
/// output coordinate carries a distinct gradient.
fn weighted_sum(g: &Graph, v: Var, seed: u64) -> Result<Var> {
    let n = g.shape(v).iter().product::<usize>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let flat = g.reshape(v, &[n])?;
    let w = g.constant(Tensor::vector(w));
    let p = g.mul(flat, w)?;
    Ok(g.sum(p))
}

/// A differentiable case: maps a flat input to a scalar.
pub type OpFn = fn(&Graph, Var) -> Result<Var>;

/// One case per differentiable graph operation, as `(name, input length, f)`.
/// Constant operands are derived deterministically inside each closure.
pub fn op_cases() -> Vec<(&'static str, usize, OpFn)> {
    fn consts(n: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }
    vec![
        ("add", 4, |g, x| {
            let c = g.constant(consts(4, 1));
            let y = g.add(x, c)?;
            let y = g.mul(y, y)?;
            weighted_sum(g, y, 9)
        }),
        ("sub", 4, |g, x| {
            let c = g.constant(consts(4, 1));
            let y = g.sub(c, x)?;
            let y = g.mul(y, y)?;
            weighted_sum(g, y, 9)
        }),
        ("mul", 4, |g, x| {
            let y = g.mul(x, x)?;
            weighted_sum(g, y, 9)
        }),
        ("scale_add_scalar", 3, |g, x| {
            let y = g.scale(x, -2.5);
            let y = g.add_scalar(y, 0.7);
            let y = g.mul(y, y)?;
            weighted_sum(g, y, 9)
        }),
        ("matmul", 6, |g, x| {
            let a = g.reshape(x, &[2, 3])?;
            let b = g.transpose(a)?;
            let m = g.matmul(a, b)?;
            weighted_sum(g, m, 9)
        }),
        ("vecmat", 6, |g, x| {
            let v = g.slice(x, 0, 2)?;
            let w = g.slice(x, 2, 4)?;
            let w = g.reshape(w, &[2, 2])?;
            let y = g.vecmat(v, w)?;
            weighted_sum(g, y, 9)
        }),
        ("add_row_mul_row", 8, |g, x| {
            let m = g.slice(x, 0, 6)?;
            let m = g.reshape(m, &[3, 2])?;
            let v = g.slice(x, 6, 2)?;
            let a = g.add_row(m, v)?;
            let b = g.mul_row(a, v)?;
            weighted_sum(g, b, 9)
        }),
        ("sigmoid", 5, |g, x| {
            let y = g.sigmoid(x);
            weighted_sum(g, y, 9)
        }),
        ("tanh", 5, |g, x| {
            let y = g.tanh(x);
            weighted_sum(g, y, 9)
        }),
        ("relu", 5, |g, x| {
            let y = g.relu(x);
            let y = g.mul(y, y)?;
            weighted_sum(g, y, 9)
        }),
        ("softmax", 5, |g, x| {
            let y = g.softmax(x)?;
            weighted_sum(g, y, 9)
        }),
        ("softmax_rows", 6, |g, x| {
            let m = g.reshape(x, &[2, 3])?;
            let y = g.softmax_rows(m)?;
            weighted_sum(g, y, 9)
        }),
        ("outer", 5, |g, x| {
            let u = g.slice(x, 0, 2)?;
            let s = g.slice(x, 2, 3)?;
            let o = g.outer(u, s)?;
            weighted_sum(g, o, 9)
        }),
        ("concat_stack", 6, |g, x| {
            let a = g.slice(x, 0, 3)?;
            let b = g.slice(x, 3, 3)?;
            let c = g.concat(&[b, a, b])?;
            let s = g.stack_rows(&[a, b, a])?;
            let c = weighted_sum(g, c, 9)?;
            let s = weighted_sum(g, s, 10)?;
            let cs = g.mul(c, s)?;
            Ok(cs)
        }),
        ("rows_lookup", 6, |g, x| {
            let t = g.reshape(x, &[3, 2])?;
            let r = g.rows(t, &[2, 0, 2])?;
            let r = g.tanh(r);
            weighted_sum(g, r, 9)
        }),
        ("pick", 5, |g, x| {
            let p = g.pick(x, &[4, 1, 1])?;
            let p = g.mul(p, p)?;
            weighted_sum(g, p, 9)
        }),
        ("mean", 4, |g, x| {
            let y = g.mul(x, x)?;
            g.mean(y)
        }),
        ("mean_rows", 6, |g, x| {
            let m = g.reshape(x, &[3, 2])?;
            let m = g.tanh(m);
            let y = g.mean_rows(m)?;
            weighted_sum(g, y, 9)
        }),
        ("cosine", 6, |g, x| {
            let a = g.slice(x, 0, 3)?;
            let b = g.slice(x, 3, 3)?;
            g.cosine(a, b)
        }),
        ("normalize_rows", 6, |g, x| {
            let m = g.reshape(x, &[2, 3])?;
            let y = g.normalize_rows(m)?;
            weighted_sum(g, y, 9)
        }),
        ("layer_norm_rows", 8, |g, x| {
            let m = g.reshape(x, &[2, 4])?;
            let y = g.layer_norm_rows(m, 1e-5)?;
            weighted_sum(g, y, 9)
        }),
        ("sharpen", 4, |g, x| {
            let w = g.softmax(x)?;
            let s = g.sharpen(w, 2.5)?;
            weighted_sum(g, s, 9)
        }),
        ("softmax_dot_composite", 4, |g, x| {
            let w = g.softmax(x)?;
            let c = g.constant(consts(4, 5));
            let d = g.mul(w, c)?;
            Ok(g.sum(d))
        }),
    ]
}

/// Worst relative error of each case over `points` random inputs in
/// [-1.5, 1.5).
pub fn op_gradient_errors(eps: f64, points: usize) -> Result<Vec<(&'static str, f64)>> {
    let mut out = Vec::new();
    for (name, n, f) in op_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = Tensor::vector((0..n).map(|_| rng.gen_range(-1.5..1.5)).collect());
            worst = worst.max(check_gradients(f, &x, eps)?);
        }
        out.push((name, worst));
    }
    Ok(out)
}
