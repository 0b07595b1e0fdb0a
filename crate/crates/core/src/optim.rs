//! Adam with bias-corrected moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moments plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    /// Zeroed moments mirroring `params`.
    pub fn new(config: AdamConfig, params: &[&Tensor]) -> Self {
        let zeros = |t: &&Tensor| vec![0.0; t.numel()];
        Adam {
            config,
            t: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    /// Restores a saved state; moment lengths must match each other.
    pub fn from_state(config: AdamConfig, t: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::contract("adam moment buffers disagree"));
        }
        if v.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::contract("adam second moment must be finite and non-negative"));
        }
        Ok(Adam { config, t, m, v })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One update `θ ← θ − α·m̂/(√v̂ + ε)` over every parameter.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::contract(format!(
                "adam tracks {} parameters, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.numel() != self.m[i].len() {
                return Err(Error::dim("adam step", p.shape(), g.shape()));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((theta, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Tensor {
        Tensor::vector(vec![v]).unwrap()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = 1, v̂ = 1 after bias correction, so Δθ = −α/(1+ε).
        let mut p = scalar_param(0.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.001), &[&p]);
        adam.step(&mut [&mut p], &[scalar_param(1.0)]).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut p = Tensor::vector(vec![0.3, -2.0]).unwrap();
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::with_lr(0.1), &[&p]);
        for _ in 0..10 {
            adam.step(&mut [&mut p], &[Tensor::zeros(vec![2]).unwrap()]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn minimizes_a_parabola() {
        // Scalar oracle: f(θ) = θ², ∇ = 2θ.
        let mut p = scalar_param(1.0);
        let mut adam = Adam::new(AdamConfig::with_lr(0.01), &[&p]);
        for _ in 0..5000 {
            let g = scalar_param(2.0 * p.data()[0]);
            adam.step(&mut [&mut p], &[g]).unwrap();
        }
        assert!(p.data()[0].abs() < 1e-3, "{}", p.data()[0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let mut adam = Adam::new(AdamConfig::default(), &[&p]);
        let err = adam.step(&mut [&mut p], &[scalar_param(1.0)]);
        assert!(err.is_err());
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn deterministic_and_finite_on_large_gradients() {
        let run = || {
            let mut p = Tensor::vector(vec![1.0, -1.0, 0.5]).unwrap();
            let mut adam = Adam::new(AdamConfig::with_lr(0.01), &[&p]);
            for k in 0..50 {
                let g = Tensor::vector(vec![1e150, -1e-300, k as f64]).unwrap();
                adam.step(&mut [&mut p], &[g]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.is_finite());
    }
}
