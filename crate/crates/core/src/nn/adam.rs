use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state over a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step_count: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Result<Self> {
        let c = &config;
        if !(c.learning_rate >= 0.0 && c.learning_rate.is_finite())
            || !(c.beta1 > 0.0 && c.beta1 < 1.0)
            || !(c.beta2 > 0.0 && c.beta2 < 1.0)
            || c.epsilon.is_nan()
            || c.epsilon <= 0.0
        {
            return Err(Error::Config(format!("invalid Adam settings {c:?}")));
        }
        Ok(Self {
            config,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One bias-corrected Adam update. Gradients are validated before any
    /// parameter is touched, so an error leaves params and state unchanged.
    pub fn step(
        &mut self,
        params: &mut [&mut [f64]],
        grads: &[Vec<f64>],
        names: &[String],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return dim_err(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            ));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            let name = names.get(i).map_or("?", String::as_str);
            if p.len() != g.len() || p.len() != m.len() {
                return dim_err(format!(
                    "{name}: param {} / grad {} / state {} lengths differ",
                    p.len(),
                    g.len(),
                    m.len()
                ));
            }
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient of {name}[{j}] is {}",
                    g[j]
                )));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step_count as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (1.0 - b1) * gj;
                v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
