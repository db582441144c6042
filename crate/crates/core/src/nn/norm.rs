use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-channel batch normalization.
///
/// Training mode uses the biased (1/n) batch variance. Running estimates
/// follow `running = momentum * running + (1 - momentum) * batch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Intermediates kept by the forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        if self.beta.len() != c || self.running_mean.len() != c || self.running_var.len() != c {
            return dim_err("batch-norm vectors differ in length");
        }
        if self.running_var.iter().any(|v| *v < 0.0) {
            return Err(Error::Invalid("negative running variance".into()));
        }
        if self.epsilon.is_nan()
            || self.epsilon <= 0.0
            || !(self.momentum > 0.0 && self.momentum < 1.0)
        {
            return Err(Error::Config(format!(
                "batch-norm momentum {} / epsilon {} out of range",
                self.momentum, self.epsilon
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache)> {
        let c = self.channels();
        if x.cols() != c {
            return dim_err(format!(
                "batch norm over {c} channels given {} columns",
                x.cols()
            ));
        }
        let n = x.rows();
        let (mean, var, batch_stats) = match mode {
            Mode::Training { update_stats } => {
                if n < 2 {
                    return Err(Error::Invalid(format!(
                        "batch norm in training mode needs at least 2 rows, got {n}"
                    )));
                }
                let mean = x.column_means();
                let mut var = vec![0.0; c];
                for row in x.row_iter() {
                    for ((v, m), xv) in var.iter_mut().zip(&mean).zip(row) {
                        let d = xv - m;
                        *v += d * d;
                    }
                }
                for v in &mut var {
                    *v /= n as f64;
                }
                if update_stats {
                    let mo = self.momentum;
                    for j in 0..c {
                        self.running_mean[j] = mo * self.running_mean[j] + (1.0 - mo) * mean[j];
                        self.running_var[j] = mo * self.running_var[j] + (1.0 - mo) * var[j];
                    }
                }
                (mean, var, true)
            }
            Mode::Inference => (self.running_mean.clone(), self.running_var.clone(), false),
        };
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        let mut normalized = Matrix::zeros(n, c);
        let mut out = Matrix::zeros(n, c);
        for i in 0..n {
            let xr = x.row(i);
            let nr = normalized.row_mut(i);
            for j in 0..c {
                nr[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let or = out.row_mut(i);
            let nr = normalized.row(i);
            for j in 0..c {
                or[j] = self.gamma[j] * nr[j] + self.beta[j];
            }
        }
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
                batch_stats,
            },
        ))
    }

    /// Applies running statistics without mutating anything.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let c = self.channels();
        if x.cols() != c {
            return dim_err(format!(
                "batch norm over {c} channels given {} columns",
                x.cols()
            ));
        }
        let scale: Vec<f64> = (0..c)
            .map(|j| self.gamma[j] / (self.running_var[j] + self.epsilon).sqrt())
            .collect();
        let mut out = x.clone();
        for row in out.as_mut_slice().chunks_exact_mut(c.max(1)) {
            for j in 0..c {
                row[j] = (row[j] - self.running_mean[j]) * scale[j] + self.beta[j];
            }
        }
        Ok(out)
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache,
        upstream: &Matrix,
    ) -> Result<(BatchNormGrads, Matrix)> {
        let c = self.channels();
        let xhat = &cache.normalized;
        if upstream.rows() != xhat.rows() || upstream.cols() != c {
            return dim_err("upstream gradient does not match batch-norm output");
        }
        let n = xhat.rows();
        let mut dgamma = vec![0.0; c];
        let dbeta = upstream.column_sums();
        for i in 0..n {
            for ((g, u), h) in dgamma.iter_mut().zip(upstream.row(i)).zip(xhat.row(i)) {
                *g += u * h;
            }
        }
        let mut dx = Matrix::zeros(n, c);
        if cache.batch_stats {
            // dx = inv_std/n * (n*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat)),
            // with dxhat = dy*gamma, so the sums are gamma*dbeta and gamma*dgamma.
            let nf = n as f64;
            for i in 0..n {
                let (u, h, d) = (upstream.row(i), xhat.row(i), dx.row_mut(i));
                for j in 0..c {
                    let g = self.gamma[j];
                    d[j] = cache.inv_std[j] / nf
                        * (nf * u[j] * g - g * dbeta[j] - h[j] * g * dgamma[j]);
                }
            }
        } else {
            for i in 0..n {
                let (u, d) = (upstream.row(i), dx.row_mut(i));
                for j in 0..c {
                    d[j] = u[j] * self.gamma[j] * cache.inv_std[j];
                }
            }
        }
        Ok((
            BatchNormGrads {
                gamma: dgamma,
                beta: dbeta,
            },
            dx,
        ))
    }
}
