use serde::{Deserialize, Serialize};

use super::params::{Mat, ParamCollection, ParamGrads};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam moments for one [`ParamCollection`].
///
/// Entries whose gradient is exactly zero everywhere are skipped (moments and
/// values untouched), so parameters a loss never reached stay bit-identical.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Mat>,
    second_moment: Vec<Mat>,
    step_count: u64,
}

impl AdamState {
    pub fn new(params: &ParamCollection, config: AdamConfig) -> Self {
        let zeros: Vec<Mat> = params.values().iter().map(|v| Mat::zeros(v.dim())).collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(&mut self, params: &mut ParamCollection, grads: &ParamGrads) -> Result<()> {
        if grads.0.len() != params.len()
            || grads.0.iter().zip(params.values()).any(|(g, p)| g.dim() != p.dim())
            || self.first_moment.len() != params.len()
        {
            return Err(Error::Shape("gradients are not congruent to parameters".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        if learning_rate == 0.0 {
            return Ok(());
        }
        let t = self.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let values = params.values_mut();
        for (i, g) in grads.0.iter().enumerate() {
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            ndarray::Zip::from(&mut values[i])
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}
