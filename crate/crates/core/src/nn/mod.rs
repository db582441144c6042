//! Dense-network kernel with hand-derived backward passes.

mod activation;
mod adam;
mod dense;
mod mlp;
mod norm;

pub use activation::{leaky_relu, leaky_relu_backward, sigmoid};
pub use adam::{Adam, AdamConfig};
pub use dense::{Dense, DenseGrads};
pub use mlp::{Mlp, MlpSpec};
pub use norm::{BatchNorm, BatchNormCache, BatchNormGrads};

/// How batch normalization treats the current batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with batch statistics. `update_stats` controls whether the
    /// running estimates absorb them.
    Training { update_stats: bool },
    /// Normalize with the running estimates.
    Inference,
}

impl Mode {
    pub const TRAIN: Mode = Mode::Training { update_stats: true };
    pub const TRAIN_FROZEN: Mode = Mode::Training {
        update_stats: false,
    };
}
