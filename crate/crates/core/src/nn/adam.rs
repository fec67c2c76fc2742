use serde::{Deserialize, Serialize};

use super::Real;

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
        }
    }

    /// One bias-corrected update at learning rate `config.lr * lr_scale`.
    pub fn update(&mut self, params: &mut [T], grads: &[T], lr_scale: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let step_size = T::of(c.lr * lr_scale * bc2.sqrt() / bc1);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let eps = T::of(c.eps * bc2.sqrt());
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p -= step_size * *m / (v.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), 2);
        let mut p = vec![1.0, -1.0];
        adam.update(&mut p, &[0.3, -2.0], 1.0);
        assert!((p[0] - (1.0 - 2e-4)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 2e-4)).abs() < 1e-9);
    }

    #[test]
    fn zero_scale_freezes_params() {
        let mut adam = Adam::<f32>::new(AdamConfig::default(), 1);
        let mut p = vec![0.5f32];
        adam.update(&mut p, &[1.0], 0.0);
        assert_eq!(p[0], 0.5);
    }
}
