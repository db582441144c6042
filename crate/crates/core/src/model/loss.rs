//! Adversarial objectives.
//!
//! The discriminator objective is
//! `E_real[y·log D + (1 - y)·log(1 - D)] + E_fake[log(1 - D)]`
//! with `y` the (possibly smoothed) real label; the discriminator ascends it.
//! The transformer objective is the fake term alone, which the transformer
//! descends. Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`
//! before every logarithm.

use super::{Discriminator, Transformer};
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[inline]
fn in_clamp_range(p: f64) -> bool {
    (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p)
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len() as f64;
    values.sum::<f64>() / n
}

/// Mean smoothed cross-entropy term over real-pair scores.
pub fn real_term(scores: &[f64], real_label: f64) -> f64 {
    mean(scores.iter().map(|&p| {
        let p = clamp_prob(p);
        real_label * p.ln() + (1.0 - real_label) * (1.0 - p).ln()
    }))
}

/// Mean of `log(1 - D)` over synthetic-pair scores.
pub fn fake_term(scores: &[f64]) -> f64 {
    mean(scores.iter().map(|&p| (1.0 - clamp_prob(p)).ln()))
}

/// Discriminator objective from precomputed scores.
pub fn discriminator_objective(real: &[f64], fake: &[f64], real_label: f64) -> Result<f64> {
    if real.is_empty() || fake.is_empty() {
        return Err(Error::Invalid(
            "objective needs non-empty real and fake batches".into(),
        ));
    }
    Ok(real_term(real, real_label) + fake_term(fake))
}

/// Transformer objective from precomputed synthetic-pair scores.
pub fn transformer_objective(fake: &[f64]) -> Result<f64> {
    if fake.is_empty() {
        return Err(Error::Invalid(
            "objective needs a non-empty fake batch".into(),
        ));
    }
    Ok(fake_term(fake))
}

/// Discriminator objective of `theta` (inference mode) on a real batch and
/// an already-synthesized fake batch.
pub fn d_loss(
    theta: &Discriminator,
    real: (&Matrix, &Matrix),
    fake: (&Matrix, &Matrix),
    real_label: f64,
) -> Result<f64> {
    let real_scores = theta.score_batch(real.0, real.1)?;
    let fake_scores = theta.score_batch(fake.0, fake.1)?;
    discriminator_objective(&real_scores, &fake_scores, real_label)
}

/// Transformer objective: synthesizes `T(s, z)` for each row and scores the
/// pairs with `theta`, both in inference mode.
pub fn t_loss(
    theta: &Discriminator,
    phi: &Transformer,
    sources: &Matrix,
    noise: &Matrix,
) -> Result<f64> {
    if sources.rows() != noise.rows() {
        return dim_err(format!(
            "{} sources but {} noise vectors",
            sources.rows(),
            noise.rows()
        ));
    }
    let fakes = phi.generate(sources, noise)?;
    transformer_objective(&theta.score_batch(sources, &fakes)?)
}

/// d/d(logit) of the per-pair real term, `D = sigmoid(logit)`.
#[inline]
pub(crate) fn real_term_logit_grad(p: f64, real_label: f64) -> f64 {
    if in_clamp_range(p) {
        real_label * (1.0 - p) - (1.0 - real_label) * p
    } else {
        0.0
    }
}

/// d/d(logit) of the per-pair `log(1 - D)`.
#[inline]
pub(crate) fn fake_term_logit_grad(p: f64) -> f64 {
    if in_clamp_range(p) {
        -p
    } else {
        0.0
    }
}

/// d/d(logit) of the per-pair `-log D` (non-saturating transformer loss).
#[inline]
pub(crate) fn non_saturating_logit_grad(p: f64) -> f64 {
    if in_clamp_range(p) {
        -(1.0 - p)
    } else {
        0.0
    }
}
