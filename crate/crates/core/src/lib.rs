//! Conditional adversarial feature transformer for complementary item
//! recommendation.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`] and [`nn`]: a small dense-network kernel (fully connected
//!   layers, batch normalization, leaky ReLU, hand-written backward passes,
//!   Adam).
//! - [`model`]: the feature transformer `T(s, z)`, the pair discriminator
//!   `D(s, t)`, the adversarial objectives and the alternating trainer.
//! - [`data`]: feature-pair datasets, PCA, and synthetic mixtures with a
//!   closed-form conditional oracle.
//! - [`retrieval`]: exact nearest-neighbour index and the recommendation path.
//! - [`eval`]: baselines, density stratification, oracle metrics and
//!   discriminator score maps.

pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod nn;
pub mod retrieval;

mod binio;

pub use error::{Error, Result};
pub use linalg::Matrix;
