//! Adam optimizer with bias correction.

use std::collections::HashMap;

use super::Parameter;
use crate::error::{Error, Result};

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: HashMap<String, Vec<f64>>,
    v: HashMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Adam {
        Adam::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Adam {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update over all trainable parameters. Gradients are
    /// consumed (zeroed) afterwards.
    pub fn step(&mut self, params: &[Parameter]) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for p in params {
            if !p.trainable {
                continue;
            }
            let grad = p
                .tensor
                .grad()
                .ok_or_else(|| Error::MissingGradient(p.name.clone()))?;
            let n = grad.len();
            let m = self.m.entry(p.name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(p.name.clone()).or_insert_with(|| vec![0.0; n]);
            let mut data = p.tensor.to_vec();
            for i in 0..n {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            p.tensor.set_data(&data);
            p.tensor.zero_grad();
        }
        Ok(())
    }
}
