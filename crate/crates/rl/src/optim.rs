//! Adam with global gradient-norm clipping.

use ndarray::{Array1, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One descent step on `params` along `grad`.
    pub fn update(&mut self, mut params: ArrayViewMut1<f64>, grad: ArrayView1<f64>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
        }
    }
}

/// Rescales `grad` so its L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_grad_norm(grad: &mut Array1<f64>, max_norm: f64) -> f64 {
    let norm = grad.dot(grad).sqrt();
    if norm > max_norm && norm.is_finite() {
        *grad *= max_norm / norm;
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = Array1::from(vec![1.0, -1.0]);
        adam.update(p.view_mut(), Array1::from(vec![3.0, -0.5]).view());
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = Adam::new(1, 0.05);
        let mut p = Array1::from(vec![4.0]);
        for _ in 0..2_000 {
            let g = Array1::from(vec![2.0 * (p[0] - 1.5)]);
            adam.update(p.view_mut(), g.view());
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = Array1::from(vec![3.0, 4.0]);
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g.dot(&g).sqrt() - 0.5).abs() < 1e-15);
        let mut small = Array1::from(vec![0.1, 0.0]);
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small[0], 0.1);
    }
}
