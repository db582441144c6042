use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{leaky_relu, leaky_relu_backward, BatchNorm, BatchNormCache, Dense, Mode};
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

/// Shape of an [`Mlp`]: `input → [hidden_i: FC → BN → LeakyReLU]* → output`
/// with a linear head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub leaky_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Block {
    dense: Dense,
    norm: BatchNorm,
}

#[derive(Debug, Clone)]
struct BlockTape {
    input: Matrix,
    norm: BatchNormCache,
    pre_activation: Matrix,
}

#[derive(Debug, Clone)]
struct Tape {
    blocks: Vec<BlockTape>,
    head_input: Matrix,
}

/// Multilayer perceptron with batch-normalized hidden blocks.
///
/// [`Mlp::forward`] records the intermediates needed by [`Mlp::backward`];
/// each recorded pass can be consumed by exactly one backward call.
#[derive(Debug, Clone)]
pub struct Mlp {
    blocks: Vec<Block>,
    head: Dense,
    leaky_alpha: f64,
    tape: Option<Tape>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.blocks == other.blocks
            && self.head == other.head
            && self.leaky_alpha == other.leaky_alpha
    }
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Result<Self> {
        if spec.input == 0 || spec.output == 0 || spec.hidden.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {spec:?}")));
        }
        if !(0.0..1.0).contains(&spec.leaky_alpha) {
            return Err(Error::Config(format!(
                "leaky alpha {} outside [0, 1)",
                spec.leaky_alpha
            )));
        }
        let mut blocks = Vec::with_capacity(spec.hidden.len());
        let mut fan_in = spec.input;
        for &width in &spec.hidden {
            blocks.push(Block {
                dense: Dense::glorot(fan_in, width, rng),
                norm: BatchNorm::new(width),
            });
            fan_in = width;
        }
        let head = Dense::glorot(fan_in, spec.output, rng);
        Ok(Self {
            blocks,
            head,
            leaky_alpha: spec.leaky_alpha,
            tape: None,
        })
    }

    /// Reassembles a network from its layers, checking that shapes chain.
    pub fn from_parts(
        layers: Vec<(Dense, BatchNorm)>,
        head: Dense,
        leaky_alpha: f64,
    ) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for (i, (dense, norm)) in layers.iter().enumerate() {
            if dense.bias.len() != dense.fan_out() {
                return dim_err(format!("layer {i}: bias length mismatch"));
            }
            norm.validate()?;
            if norm.channels() != dense.fan_out() {
                return dim_err(format!("layer {i}: norm width != dense width"));
            }
            if let Some(p) = prev {
                if dense.fan_in() != p {
                    return dim_err(format!("layer {i}: fan-in {} != {p}", dense.fan_in()));
                }
            }
            prev = Some(dense.fan_out());
        }
        if let Some(p) = prev {
            if head.fan_in() != p {
                return dim_err(format!("head fan-in {} != {p}", head.fan_in()));
            }
        }
        Ok(Self {
            blocks: layers
                .into_iter()
                .map(|(dense, norm)| Block { dense, norm })
                .collect(),
            head,
            leaky_alpha,
            tape: None,
        })
    }

    pub fn spec(&self) -> MlpSpec {
        MlpSpec {
            input: self.input_dim(),
            hidden: self.blocks.iter().map(|b| b.dense.fan_out()).collect(),
            output: self.output_dim(),
            leaky_alpha: self.leaky_alpha,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.blocks
            .first()
            .map_or(self.head.fan_in(), |b| b.dense.fan_in())
    }

    pub fn output_dim(&self) -> usize {
        self.head.fan_out()
    }

    pub fn leaky_alpha(&self) -> f64 {
        self.leaky_alpha
    }

    pub fn head(&self) -> &Dense {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Dense {
        &mut self.head
    }

    /// Hidden layers as (dense, norm) pairs.
    pub fn layers(&self) -> impl Iterator<Item = (&Dense, &BatchNorm)> {
        self.blocks.iter().map(|b| (&b.dense, &b.norm))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&mut Dense, &mut BatchNorm)> {
        self.blocks.iter_mut().map(|b| (&mut b.dense, &mut b.norm))
    }

    /// Forward pass that records intermediates for [`Mlp::backward`].
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return dim_err(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            ));
        }
        self.tape = None;
        let mut tapes = Vec::with_capacity(self.blocks.len());
        let mut h = x.clone();
        for block in &mut self.blocks {
            let z = block.dense.forward(&h)?;
            let (pre, cache) = block.norm.forward(&z, mode)?;
            let next = leaky_relu(&pre, self.leaky_alpha);
            tapes.push(BlockTape {
                input: h,
                norm: cache,
                pre_activation: pre,
            });
            h = next;
        }
        let out = self.head.forward(&h)?;
        self.tape = Some(Tape {
            blocks: tapes,
            head_input: h,
        });
        Ok(out)
    }

    /// Inference-mode forward pass; records nothing and never mutates.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return dim_err(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.cols()
            ));
        }
        let mut h = x.clone();
        for block in &self.blocks {
            let z = block.dense.forward(&h)?;
            h = leaky_relu(&block.norm.infer(&z)?, self.leaky_alpha);
        }
        self.head.forward(&h)
    }

    /// Backpropagates `upstream = dL/d(output)` through the last recorded
    /// forward pass. Returns parameter gradients in [`Mlp::param_names`]
    /// order, and `dL/d(input)`.
    pub fn backward(&mut self, upstream: &Matrix) -> Result<(Vec<Vec<f64>>, Matrix)> {
        self.backward_impl(upstream, true)
    }

    /// Like [`Mlp::backward`] but only returns `dL/d(input)`.
    pub fn backward_input(&mut self, upstream: &Matrix) -> Result<Matrix> {
        Ok(self.backward_impl(upstream, false)?.1)
    }

    fn backward_impl(
        &mut self,
        upstream: &Matrix,
        want_params: bool,
    ) -> Result<(Vec<Vec<f64>>, Matrix)> {
        let tape = self.tape.take().ok_or_else(|| {
            Error::State("backward called without a recorded forward pass".into())
        })?;
        if upstream.rows() != tape.head_input.rows() || upstream.cols() != self.output_dim() {
            return dim_err(format!(
                "upstream gradient {}x{} does not match output {}x{}",
                upstream.rows(),
                upstream.cols(),
                tape.head_input.rows(),
                self.output_dim()
            ));
        }
        let mut grads: Vec<Vec<f64>> = Vec::new();
        let mut block_grads = Vec::new();
        let head_grads = if want_params {
            Some(self.head.backward(&tape.head_input, upstream)?.0)
        } else {
            None
        };
        let mut g = upstream.matmul(&self.head.weight)?;
        for (block, bt) in self.blocks.iter().zip(&tape.blocks).rev() {
            let g_pre = leaky_relu_backward(&bt.pre_activation, &g, self.leaky_alpha);
            let (ng, g_z) = block.norm.backward(&bt.norm, &g_pre)?;
            if want_params {
                let (dg, g_in) = block.dense.backward(&bt.input, &g_z)?;
                block_grads.push((dg, ng));
                g = g_in;
            } else {
                g = g_z.matmul(&block.dense.weight)?;
            }
        }
        if let Some(head_grads) = head_grads {
            grads.reserve(self.param_count());
            for (dg, ng) in block_grads.into_iter().rev() {
                grads.push(dg.weight.into_vec());
                grads.push(dg.bias);
                grads.push(ng.gamma);
                grads.push(ng.beta);
            }
            grads.push(head_grads.weight.into_vec());
            grads.push(head_grads.bias);
        }
        Ok((grads, g))
    }

    pub fn has_tape(&self) -> bool {
        self.tape.is_some()
    }

    pub fn clear_tape(&mut self) {
        self.tape = None;
    }

    fn param_count(&self) -> usize {
        4 * self.blocks.len() + 2
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_count());
        for i in 0..self.blocks.len() {
            names.push(format!("layer{i}.weight"));
            names.push(format!("layer{i}.bias"));
            names.push(format!("norm{i}.gamma"));
            names.push(format!("norm{i}.beta"));
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        names
    }

    /// Learnable parameter slices, same order as [`Mlp::param_names`].
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(self.param_count());
        for b in &self.blocks {
            out.push(b.dense.weight.as_slice());
            out.push(&b.dense.bias);
            out.push(&b.norm.gamma);
            out.push(&b.norm.beta);
        }
        out.push(self.head.weight.as_slice());
        out.push(&self.head.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(self.param_count());
        for b in &mut self.blocks {
            out.push(b.dense.weight.as_mut_slice());
            out.push(&mut b.dense.bias);
            out.push(&mut b.norm.gamma);
            out.push(&mut b.norm.beta);
        }
        out.push(self.head.weight.as_mut_slice());
        out.push(&mut self.head.bias);
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Mlp {
        let spec = MlpSpec {
            input: 3,
            hidden: vec![5, 4],
            output: 2,
            leaky_alpha: 0.2,
        };
        Mlp::new(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn backward_requires_forward() {
        let mut m = net(1);
        let err = m.backward(&Matrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::State(_)));
        let x = Matrix::new(2, 3, vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]).unwrap();
        m.forward(&x, Mode::TRAIN).unwrap();
        assert!(m.backward(&Matrix::zeros(2, 2)).is_ok());
        assert!(m.backward(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn predict_matches_inference_forward() {
        let mut m = net(2);
        let x = Matrix::new(2, 3, vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]).unwrap();
        let a = m.predict(&x).unwrap();
        let b = m.forward(&x, Mode::Inference).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn names_match_params() {
        let m = net(3);
        assert_eq!(m.param_names().len(), m.params().len());
        assert_eq!(m.param_sizes(), vec![15, 5, 5, 5, 20, 4, 4, 4, 8, 2]);
    }

    #[test]
    fn from_parts_checks_chain() {
        let m = net(4);
        let layers: Vec<_> = m.layers().map(|(d, n)| (d.clone(), n.clone())).collect();
        assert!(Mlp::from_parts(layers.clone(), m.head().clone(), 0.2).is_ok());
        assert!(Mlp::from_parts(layers, Dense::zeros(3, 2), 0.2).is_err());
    }
}
