//! Bias-corrected Adam over named parameter blocks.

use crate::backward::GradientTape;
use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &Params) -> Self {
        let shapes: Vec<usize> = params.blocks().iter().map(|(_, m)| m.as_slice().len()).collect();
        Self {
            config,
            step_count: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update in place. A non-finite gradient aborts before any
    /// parameter is touched.
    pub fn step(&mut self, tape: &GradientTape, params: &mut Params) -> Result<()> {
        let grads = tape.grads.blocks();
        if grads.len() != self.first_moment.len() {
            return Err(Error::DimensionMismatch {
                context: "Adam parameter blocks",
                expected: self.first_moment.len(),
                actual: grads.len(),
            });
        }
        for (name, g) in &grads {
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient { block: name.clone() });
            }
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for (((_, p), (_, g)), (m, v)) in params
            .blocks_mut()
            .into_iter()
            .zip(&grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for (((p, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
