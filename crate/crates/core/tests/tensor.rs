use dialog_core::tensor::gradcheck::{op_cases, op_gradient_errors};
use dialog_core::tensor::{check_gradients, Graph, Result, Tensor, TensorError, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mat(rows: &[&[f64]]) -> Tensor {
    Tensor::matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn matmul_examples() {
    let g = Graph::new();
    let eye = g.constant(mat(&[&[1.0, 0.0], &[0.0, 1.0]]));
    let m = g.constant(mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
    assert_eq!(g.value(g.matmul(eye, m).unwrap()).data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = g.constant(mat(&[&[1.0, 0.0]]));
    let b = g.constant(mat(&[&[0.0], &[5.0]]));
    assert_eq!(g.value(g.matmul(a, b).unwrap()).data(), &[0.0]);

    // 1*5 + 2*6 = 17, 3*5 + 4*6 = 39
    let c = g.constant(mat(&[&[5.0], &[6.0]]));
    let out = g.value(g.matmul(m, c).unwrap());
    assert_eq!(out.shape(), &[2, 1]);
    assert_eq!(out.data(), &[17.0, 39.0]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let g = Graph::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[2, 3]));
    match g.matmul(a, b) {
        Err(TensorError::Shape { left, right, .. }) => {
            assert_eq!(left, vec![2, 3]);
            assert_eq!(right, vec![2, 3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
    let msg = g.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]"));
}

#[test]
fn softmax_rejects_empty() {
    let g = Graph::new();
    let e = g.constant(Tensor::vector(vec![]));
    assert!(g.softmax(e).is_err());
}

#[test]
fn backward_examples() {
    let g = Graph::new();
    let x = g.param(Tensor::scalar(4.0));
    g.backward(x).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[1.0]);

    let g = Graph::new();
    let x = g.param(Tensor::scalar(2.0));
    let y = g.param(Tensor::scalar(3.0));
    let p = g.mul(x, y).unwrap();
    g.backward(p).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[3.0]);
    assert_eq!(g.grad(y).unwrap().data(), &[2.0]);

    let g = Graph::new();
    let v = g.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(g.backward(v).is_err());
}

#[test]
fn constants_get_no_gradient() {
    let g = Graph::new();
    let x = g.param(Tensor::vector(vec![1.0, 2.0]));
    let c = g.constant(Tensor::vector(vec![3.0, 4.0]));
    let s = g.mul(x, c).unwrap();
    let s = g.sum(s);
    g.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap().data(), &[3.0, 4.0]);
    assert!(g.grad(c).is_none());
}

#[test]
fn sum_gradient_is_exact() {
    let x = Tensor::vector(vec![0.3, -1.2, 4.0, 7.5]);
    let err = check_gradients(|g, x| Ok(g.sum(x)), &x, 1e-3).unwrap();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn gradcheck_rejects_non_scalar_output() {
    let x = Tensor::vector(vec![1.0, 2.0]);
    assert!(check_gradients(|g, x| Ok(g.tanh(x)), &x, 1e-3).is_err());
}

#[test]
fn every_op_matches_finite_differences() {
    let worst = op_gradient_errors(1e-3, 5).unwrap();
    assert_eq!(worst.len(), op_cases().len());
    for (name, err) in worst {
        assert!(err < 1e-4, "{name}: relative error {err}");
    }
}

#[test]
fn lstm_cell_then_sum_matches_finite_differences() {
    // input 3, hidden 2: weights [(3 + 2) x 8] + bias [8] = 48 values
    fn cell(g: &Graph, x: Var) -> Result<Var> {
        let w = g.slice(x, 0, 40)?;
        let w = g.reshape(w, &[5, 8])?;
        let b = g.slice(x, 40, 8)?;
        let inp = g.constant(Tensor::vector(vec![0.5, -0.3, 0.9]));
        let h0 = g.constant(Tensor::vector(vec![0.1, -0.2]));
        let c0 = g.constant(Tensor::vector(vec![0.05, 0.3]));
        let xh = g.concat(&[inp, h0])?;
        let z = g.linear(xh, w, b)?;
        let i = g.slice(z, 0, 2)?;
        let f = g.slice(z, 2, 2)?;
        let o = g.slice(z, 4, 2)?;
        let u = g.slice(z, 6, 2)?;
        let (i, f, o, u) = (g.sigmoid(i), g.sigmoid(f), g.sigmoid(o), g.tanh(u));
        let fc = g.mul(f, c0)?;
        let iu = g.mul(i, u)?;
        let c = g.add(fc, iu)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok(g.sum(h))
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor::vector((0..48).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let err = check_gradients(cell, &x, 1e-3).unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn reused_node_accumulates_gradient() {
    // f(x) = sum(tanh(x) * tanh(x) + tanh(x)) reuses tanh(x) three times
    let f = |g: &Graph, x: Var| {
        let t = g.tanh(x);
        let tt = g.mul(t, t)?;
        let s = g.add(tt, t)?;
        Ok(g.sum(s))
    };
    let x = Tensor::vector(vec![0.3, -0.8, 1.1]);
    let g = Graph::new();
    let v = g.param(x.clone());
    let out = f(&g, v).unwrap();
    g.backward(out).unwrap();
    let grad = g.grad(v).unwrap();
    for (xi, gi) in x.data().iter().zip(grad.data()) {
        let t = xi.tanh();
        let expected = (2.0 * t + 1.0) * (1.0 - t * t);
        assert!((gi - expected).abs() < 1e-12);
    }
    assert!(check_gradients(f, &x, 1e-3).unwrap() < 1e-4);
}

#[test]
fn sharpen_with_unit_gamma_is_bitwise_identity() {
    let g = Graph::new();
    let x = g.constant(Tensor::vector(vec![0.1, 0.2, 0.7]));
    let w = g.softmax(x).unwrap();
    let s = g.sharpen(w, 1.0).unwrap();
    let (a, b) = (g.value(w), g.value(s));
    for (p, q) in a.data().iter().zip(b.data()) {
        assert_eq!(p.to_bits(), q.to_bits());
    }
    assert!(g.sharpen(w, 0.5).is_err());
}

#[test]
fn sharpen_limits() {
    let g = Graph::new();
    let w = g.constant(Tensor::vector(vec![0.5, 0.5]));
    let s = g.value(g.sharpen(w, 2.0).unwrap());
    assert_eq!(s.data(), &[0.5, 0.5]);
    let w = g.constant(Tensor::vector(vec![0.2, 0.5, 0.3]));
    let s = g.value(g.sharpen(w, 200.0).unwrap());
    assert!((s.data()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn forward_ops_stay_finite_on_extreme_inputs() {
    let g = Graph::new();
    let x = g.constant(Tensor::vector(vec![1e4, -1e4, 0.0]));
    for v in [g.sigmoid(x), g.tanh(x), g.softmax(x).unwrap(), g.normalize_rows(x).unwrap()] {
        assert!(g.value(v).is_finite());
    }
    let z = g.constant(Tensor::vector(vec![0.0, 0.0, 0.0]));
    assert!(g.value(g.normalize_rows(z).unwrap()).is_finite());
    assert_eq!(g.value(g.cosine(z, x).unwrap()).data(), &[0.0]);
}

proptest! {
    #[test]
    fn softmax_lands_on_simplex(xs in prop::collection::vec(-50.0f64..50.0, 1..30)) {
        let g = Graph::new();
        let x = g.constant(Tensor::vector(xs));
        let s = g.value(g.softmax(x).unwrap());
        prop_assert!(s.data().iter().all(|v| *v >= 0.0));
        prop_assert!((s.data().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn outer_has_product_length(p in 1usize..12, q in 1usize..12) {
        let g = Graph::new();
        let u = g.constant(Tensor::vector(vec![1.0; p]));
        let s = g.constant(Tensor::vector(vec![2.0; q]));
        let o = g.outer(u, s).unwrap();
        let flat = g.reshape(o, &[p * q]).unwrap();
        prop_assert_eq!(g.shape(flat), vec![p * q]);
    }

    #[test]
    fn cosine_stays_in_unit_interval(a in prop::collection::vec(-10.0f64..10.0, 4), b in prop::collection::vec(-10.0f64..10.0, 4)) {
        let c = dialog_core::tensor::cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
    }
}
