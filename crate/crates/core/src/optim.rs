//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Gradients, Network};
use crate::real::Real;

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
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Adam hyperparameters {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    /// State for parameter tensors of the given lengths.
    pub fn new(config: AdamConfig, lens: &[usize]) -> Self {
        Adam {
            config,
            step: 0,
            first: lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_network(config: AdamConfig, net: &Network<T>) -> Self {
        Self::new(config, &net.param_lens())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &T> {
        self.second.iter().flatten()
    }

    /// One update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::DimensionMismatch {
                context: "optimizer tensors",
                expected: self.first.len(),
                actual: params.len().min(grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    context: "optimizer tensor length",
                    expected: m.len(),
                    actual: if p.len() != m.len() { p.len() } else { g.len() },
                });
            }
        }
        if !grads.iter().all(|g| g.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite {
                context: "gradient",
            });
        }

        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        // lr * m_hat / (sqrt(v_hat) + eps) = step * m / (sqrt(v / bc2) + eps)
        let step_size = T::of(c.lr / bc1);
        let inv_bc2 = T::of(1.0 / bc2);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let eps = T::of(c.eps);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for (((p, &g), m), v) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p -= step_size * *m / ((*v * inv_bc2).sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Applies `grads` to `net` and verifies the updated parameters are finite.
    pub fn update_network(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        let g = grads.slices();
        self.step(&mut net.param_slices_mut(), &g)?;
        if !net.is_finite() {
            return Err(Error::NonFinite {
                context: "parameters after optimizer step",
            });
        }
        Ok(())
    }
}
