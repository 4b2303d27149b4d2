use ndarray::{Array2, Zip};

use super::params::{ParamKind, Params};
use crate::scalar::{lit, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction. Each parameter keeps its own step count so
/// that parameters frozen for a while start their correction afresh.
pub struct Adam<T> {
    first: Vec<Array2<T>>,
    second: Vec<Array2<T>>,
    steps: Vec<i32>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &Params<T>) -> Self {
        let mut first = Vec::new();
        params.for_each(|_, _, a| first.push(Array2::zeros(a.dim())));
        let second = first.clone();
        let steps = vec![0; first.len()];
        Adam { first, second, steps }
    }

    /// One update with learning rate `lr`; embedding tables are skipped
    /// when `freeze_embeddings` is set.
    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>, lr: f64, freeze_embeddings: bool) {
        let mut grad_arrays = Vec::new();
        grads.for_each(|_, _, g| grad_arrays.push(g));
        let (b1, b2, eps) = (lit::<T>(BETA1), lit::<T>(BETA2), lit::<T>(EPSILON));
        let one = T::one();
        let mut idx = 0;
        params.for_each_mut(|_, kind, p| {
            let i = idx;
            idx += 1;
            if freeze_embeddings && kind == ParamKind::Embedding {
                return;
            }
            self.steps[i] += 1;
            let t = self.steps[i];
            let step_size = lit::<T>(lr) * (one - b2.powi(t)).sqrt() / (one - b1.powi(t));
            Zip::from(p)
                .and(&mut self.first[i])
                .and(&mut self.second[i])
                .and(grad_arrays[i])
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p = *p - step_size * *m / (v.sqrt() + eps);
                });
        });
    }
}
