use rand::Rng;

use super::{NoiseVector, TrainConfig};
use crate::error::{dim_err, Result};
use crate::linalg::Matrix;
use crate::nn::{sigmoid, Mlp, MlpSpec, Mode};

/// Conditional feature transformer `T(s, z) -> t̂`.
///
/// The input is the concatenation `[s | z]`; hidden blocks are
/// FC → BN → LeakyReLU and the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    net: Mlp,
    d_s: usize,
    d_z: usize,
}

impl Transformer {
    pub fn new<R: Rng + ?Sized>(
        d_s: usize,
        d_t: usize,
        d_z: usize,
        hidden: &[usize],
        leaky_alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input: d_s + d_z,
            hidden: hidden.to_vec(),
            output: d_t,
            leaky_alpha,
        };
        Ok(Self {
            net: Mlp::new(&spec, rng)?,
            d_s,
            d_z,
        })
    }

    pub fn from_network(net: Mlp, d_s: usize, d_z: usize) -> Result<Self> {
        if net.input_dim() != d_s + d_z {
            return dim_err(format!(
                "transformer network takes {} inputs, expected d_s + d_z = {}",
                net.input_dim(),
                d_s + d_z
            ));
        }
        Ok(Self { net, d_s, d_z })
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_z(&self) -> usize {
        self.d_z
    }

    pub fn d_t(&self) -> usize {
        self.net.output_dim()
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    fn input(&self, s: &Matrix, z: &Matrix) -> Result<Matrix> {
        if s.cols() != self.d_s || z.cols() != self.d_z || s.rows() != z.rows() {
            return dim_err(format!(
                "transformer expects ({}, {}) columns with equal rows, got {}x{} and {}x{}",
                self.d_s,
                self.d_z,
                s.rows(),
                s.cols(),
                z.rows(),
                z.cols()
            ));
        }
        s.hcat(z)
    }

    /// Recording forward pass over a batch.
    pub fn forward(&mut self, s: &Matrix, z: &Matrix, mode: Mode) -> Result<Matrix> {
        let x = self.input(s, z)?;
        self.net.forward(&x, mode)
    }

    /// Inference-mode batch transform.
    pub fn generate(&self, s: &Matrix, z: &Matrix) -> Result<Matrix> {
        let x = self.input(s, z)?;
        self.net.predict(&x)
    }

    /// Inference-mode transform of a single source feature.
    pub fn transform(&self, s: &[f64], z: &NoiseVector) -> Result<Vec<f64>> {
        let out = self.generate(&Matrix::row_vector(s), &Matrix::row_vector(z.as_slice()))?;
        Ok(out.into_vec())
    }

    /// Gradient of the loss w.r.t. the last recorded forward pass.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<Vec<Vec<f64>>> {
        Ok(self.net.backward(upstream)?.0)
    }
}

/// Pair discriminator `D(s, t) ∈ [0, 1]`: an MLP over `[s | t]` with a
/// single linear output passed through a sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: Mlp,
    d_s: usize,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(
        d_s: usize,
        d_t: usize,
        hidden: &[usize],
        leaky_alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input: d_s + d_t,
            hidden: hidden.to_vec(),
            output: 1,
            leaky_alpha,
        };
        Ok(Self {
            net: Mlp::new(&spec, rng)?,
            d_s,
        })
    }

    pub fn from_network(net: Mlp, d_s: usize) -> Result<Self> {
        if net.output_dim() != 1 || net.input_dim() <= d_s {
            return dim_err(format!(
                "discriminator network must map {} > d_s = {d_s} inputs to 1 output",
                net.input_dim()
            ));
        }
        Ok(Self { net, d_s })
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_t(&self) -> usize {
        self.net.input_dim() - self.d_s
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    fn input(&self, s: &Matrix, t: &Matrix) -> Result<Matrix> {
        if s.cols() != self.d_s || t.cols() != self.d_t() || s.rows() != t.rows() {
            return dim_err(format!(
                "discriminator expects ({}, {}) columns with equal rows, got {}x{} and {}x{}",
                self.d_s,
                self.d_t(),
                s.rows(),
                s.cols(),
                t.rows(),
                t.cols()
            ));
        }
        s.hcat(t)
    }

    /// Recording forward pass returning one logit per pair.
    pub fn forward_logits(&mut self, s: &Matrix, t: &Matrix, mode: Mode) -> Result<Vec<f64>> {
        let x = self.input(s, t)?;
        Ok(self.net.forward(&x, mode)?.into_vec())
    }

    /// Backpropagates per-pair logit gradients; returns parameter gradients
    /// and the gradient with respect to the `[s | t]` input.
    pub fn backward(&mut self, logit_grads: &[f64]) -> Result<(Vec<Vec<f64>>, Matrix)> {
        let up = Matrix::new(logit_grads.len(), 1, logit_grads.to_vec())?;
        self.net.backward(&up)
    }

    /// Gradient with respect to the `[s | t]` input only.
    pub fn backward_input(&mut self, logit_grads: &[f64]) -> Result<Matrix> {
        let up = Matrix::new(logit_grads.len(), 1, logit_grads.to_vec())?;
        self.net.backward_input(&up)
    }

    /// Inference-mode scores for a batch of pairs.
    pub fn score_batch(&self, s: &Matrix, t: &Matrix) -> Result<Vec<f64>> {
        let x = self.input(s, t)?;
        Ok(self
            .net
            .predict(&x)?
            .into_vec()
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Inference-mode compatibility score of a single pair.
    pub fn score(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        Ok(self.score_batch(&Matrix::row_vector(s), &Matrix::row_vector(t))?[0])
    }
}

/// The two players plus the noise dimension they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct CraftModel {
    pub transformer: Transformer,
    pub discriminator: Discriminator,
}

impl CraftModel {
    /// Glorot-initialized transformer and discriminator.
    pub fn new<R: Rng + ?Sized>(
        d_s: usize,
        d_t: usize,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if d_s == 0 || d_t == 0 {
            return dim_err("feature dimensions must be positive");
        }
        let transformer = Transformer::new(
            d_s,
            d_t,
            config.d_z,
            &config.hidden,
            config.leaky_alpha,
            rng,
        )?;
        let discriminator = Discriminator::new(d_s, d_t, &config.hidden, config.leaky_alpha, rng)?;
        Ok(Self {
            transformer,
            discriminator,
        })
    }

    pub fn from_parts(transformer: Transformer, discriminator: Discriminator) -> Result<Self> {
        if transformer.d_s() != discriminator.d_s() || transformer.d_t() != discriminator.d_t() {
            return dim_err(format!(
                "transformer ({}, {}) and discriminator ({}, {}) disagree on dims",
                transformer.d_s(),
                transformer.d_t(),
                discriminator.d_s(),
                discriminator.d_t()
            ));
        }
        Ok(Self {
            transformer,
            discriminator,
        })
    }

    pub fn d_s(&self) -> usize {
        self.transformer.d_s()
    }

    pub fn d_t(&self) -> usize {
        self.transformer.d_t()
    }

    pub fn d_z(&self) -> usize {
        self.transformer.d_z()
    }
}
