use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization and architecture settings for adversarial training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Adam step size for both players.
    pub learning_rate: f64,
    /// Rows per minibatch; half become real pairs, half seed synthetic pairs.
    pub batch_size: usize,
    pub epochs: usize,
    /// Noise dimension.
    pub d_z: usize,
    pub leaky_alpha: f64,
    /// One-sided smoothed label for real pairs.
    pub real_label: f64,
    pub seed: u64,
    pub d_steps_per_t_step: usize,
    /// Hidden widths shared by the transformer and the discriminator.
    pub hidden: Vec<usize>,
    /// Minimize `-log D(s, T(s, z))` instead of `log(1 - D(s, T(s, z)))`.
    pub non_saturating: bool,
    /// During transformer updates, normalize the discriminator's hidden
    /// layers with joint real/synthetic batch statistics instead of its
    /// running estimates.
    pub discriminator_batch_stats_in_t_step: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            batch_size: 128,
            epochs: 200,
            d_z: 128,
            leaky_alpha: 0.2,
            real_label: 0.9,
            seed: 0,
            d_steps_per_t_step: 1,
            hidden: vec![256, 256],
            non_saturating: false,
            discriminator_batch_stats_in_t_step: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be >= 0", self.learning_rate));
        }
        // each half of the minibatch goes through batch norm on its own
        if self.batch_size < 4 || !self.batch_size.is_multiple_of(2) {
            return bad(format!(
                "batch_size {} must be even and at least 4",
                self.batch_size
            ));
        }
        if self.d_z == 0 {
            return bad("d_z must be positive".into());
        }
        if !(0.0..1.0).contains(&self.leaky_alpha) {
            return bad(format!("leaky_alpha {} outside [0, 1)", self.leaky_alpha));
        }
        if !(self.real_label > 0.5 && self.real_label <= 1.0) {
            return bad(format!("real_label {} outside (0.5, 1]", self.real_label));
        }
        if self.d_steps_per_t_step == 0 {
            return bad("d_steps_per_t_step must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden widths {:?} must be positive", self.hidden));
        }
        Ok(())
    }

    pub fn half_batch(&self) -> usize {
        self.batch_size / 2
    }
}
