use super::{ParamStore, Tensor};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update. `grads[i]` belongs to the i-th parameter of
    /// `store`; `None` is treated as a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) {
        if self.m.is_empty() {
            self.m = store.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (i, param) in store.tensors_mut().iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let g = grads.get(i).and_then(Option::as_ref);
            for (j, w) in param.data_mut().iter_mut().enumerate() {
                let gj = g.map_or(0.0, |g| g.data()[j]);
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Graph;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![3.0, -2.0]));
        let mut opt = Adam::new(0.1);
        for _ in 0..500 {
            let g = Graph::new();
            let b = store.bind(&g);
            let sq = g.mul(b[id], b[id]).unwrap();
            let loss = g.sum(sq);
            g.backward(loss).unwrap();
            opt.step(&mut store, &b.grads(&g));
        }
        assert!(store.get(id).data().iter().all(|v| v.abs() < 1e-2));
    }
}
