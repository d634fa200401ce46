//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Parameters;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates, one tensor per parameter tensor in
/// [`Parameters`] order, plus the number of completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &impl Parameters) -> Self {
        let zeros: Vec<Tensor> = params.named_tensors().iter().map(|(_, t)| t.zeros_like()).collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. If any gradient entry is non-finite the
    /// step is aborted before anything is modified.
    pub fn step<P: Parameters, G: Parameters>(&mut self, params: &mut P, grads: &G, config: &AdamConfig) -> Result<()> {
        let grads = grads.named_tensors();
        let mut params = params.named_tensors_mut();
        if grads.len() != params.len() || params.len() != self.first.len() {
            return Err(Error::Input(format!(
                "adam: {} parameter tensors, {} gradients, {} moment slots",
                params.len(),
                grads.len(),
                self.first.len()
            )));
        }
        for ((name, p), (_, g)) in params.iter().zip(&grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    context: "adam gradient",
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {name}")));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = *config;
        let correction1 = 1.0 - beta1.powi(t);
        let correction2 = 1.0 - beta2.powi(t);
        for (k, (_, p)) in params.iter_mut().enumerate() {
            let g = grads[k].1.data();
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            for (j, theta) in p.data_mut().iter_mut().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                *theta -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
