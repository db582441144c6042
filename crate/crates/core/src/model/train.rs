use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{fake_term_logit_grad, non_saturating_logit_grad, real_term_logit_grad};
use super::{
    discriminator_objective, sample_noise_batch, transformer_objective, CraftModel, TrainConfig,
};
use crate::data::PairDataset;
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;
use crate::nn::{sigmoid, Adam, AdamConfig, Mode};

/// Objective values recorded before the updates of one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: u64,
    /// Discriminator objective (the value the discriminator ascends).
    pub d_loss: f64,
    /// Transformer objective `mean log(1 - D(s, T(s, z)))`.
    pub t_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CraftModel,
    pub history: Vec<StepLosses>,
}

/// Owns a model, one Adam state per player, and the RNG stream that drives
/// shuffling, resampling and noise.
pub struct Trainer {
    model: CraftModel,
    config: TrainConfig,
    opt_t: Adam,
    opt_d: Adam,
    names_t: Vec<String>,
    names_d: Vec<String>,
    rng: ChaCha8Rng,
    steps: u64,
}

impl Trainer {
    /// Fresh model initialized from `config.seed`.
    pub fn new(d_s: usize, d_t: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = CraftModel::new(d_s, d_t, &config, &mut rng)?;
        Self::assemble(model, config, rng)
    }

    /// Continues from an existing model; the RNG stream starts at `config.seed`.
    pub fn with_model(model: CraftModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if model.d_z() != config.d_z {
            return dim_err(format!(
                "model noise dim {} != config d_z {}",
                model.d_z(),
                config.d_z
            ));
        }
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::assemble(model, config, rng)
    }

    fn assemble(model: CraftModel, config: TrainConfig, rng: ChaCha8Rng) -> Result<Self> {
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        };
        let tnet = model.transformer.network();
        let dnet = model.discriminator.network();
        let prefixed = |p: &str, names: Vec<String>| {
            names
                .into_iter()
                .map(|n| format!("{p}.{n}"))
                .collect::<Vec<_>>()
        };
        Ok(Self {
            opt_t: Adam::new(adam, &tnet.param_sizes())?,
            opt_d: Adam::new(adam, &dnet.param_sizes())?,
            names_t: prefixed("transformer", tnet.param_names()),
            names_d: prefixed("discriminator", dnet.param_names()),
            model,
            config,
            rng,
            steps: 0,
        })
    }

    pub fn model(&self) -> &CraftModel {
        &self.model
    }

    pub fn into_model(self) -> CraftModel {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn transformer_optimizer(&self) -> &Adam {
        &self.opt_t
    }

    pub fn discriminator_optimizer(&self) -> &Adam {
        &self.opt_d
    }

    /// Sets the learning rate of both optimizers for subsequent steps.
    pub fn set_learning_rate(&mut self, lr: f64) {
        self.opt_t.config.learning_rate = lr;
        self.opt_d.config.learning_rate = lr;
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One discriminator update on `[real pairs ; (fake_s, T(fake_s, noise))]`
    /// normalized jointly. Only discriminator weights and running statistics
    /// change. Returns the objective before the update.
    pub fn discriminator_step(
        &mut self,
        real_s: &Matrix,
        real_t: &Matrix,
        fake_s: &Matrix,
        noise: &Matrix,
    ) -> Result<f64> {
        let (objective, grads) = discriminator_gradients(
            &mut self.model,
            (real_s, real_t),
            (fake_s, noise),
            self.config.real_label,
        )?;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "step {}: discriminator objective is {objective}",
                self.steps
            )));
        }
        let mut params = self.model.discriminator.network_mut().params_mut();
        self.opt_d.step(&mut params, &grads, &self.names_d)?;
        Ok(objective)
    }

    /// One transformer update. Only transformer weights and running
    /// statistics change. Returns the transformer objective before the
    /// update.
    pub fn transformer_step(
        &mut self,
        real_s: &Matrix,
        real_t: &Matrix,
        fake_s: &Matrix,
        noise: &Matrix,
    ) -> Result<f64> {
        let (objective, grads) = transformer_gradients(
            &mut self.model,
            (real_s, real_t),
            (fake_s, noise),
            TransformerLoss::from_config(&self.config),
        )?;
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "step {}: transformer objective is {objective}",
                self.steps
            )));
        }
        let mut params = self.model.transformer.network_mut().params_mut();
        self.opt_t.step(&mut params, &grads, &self.names_t)?;
        Ok(objective)
    }

    /// One alternating step on the minibatch `batch` (row indices into
    /// `data`): `d_steps_per_t_step` discriminator updates, then one
    /// transformer update on an independently resampled minibatch.
    pub fn train_step(&mut self, data: &PairDataset, batch: &[usize]) -> Result<StepLosses> {
        if batch.len() != self.config.batch_size {
            return dim_err(format!(
                "minibatch of {} rows, config expects {}",
                batch.len(),
                self.config.batch_size
            ));
        }
        if data.d_s() != self.model.d_s() || data.d_t() != self.model.d_t() {
            return dim_err(format!(
                "dataset dims ({}, {}) do not match model ({}, {})",
                data.d_s(),
                data.d_t(),
                self.model.d_s(),
                self.model.d_t()
            ));
        }
        let half = self.config.half_batch();
        let d_z = self.config.d_z;
        let (real_idx, fake_idx) = batch.split_at(half);
        let real_s = data.sources().select_rows(real_idx);
        let real_t = data.targets().select_rows(real_idx);
        let fake_s = data.sources().select_rows(fake_idx);
        let mut d_loss = 0.0;
        for _ in 0..self.config.d_steps_per_t_step {
            let z = sample_noise_batch(&mut self.rng, half, d_z);
            d_loss = self.discriminator_step(&real_s, &real_t, &fake_s, &z)?;
        }

        let n = data.len();
        let resample: Vec<usize> = (0..self.config.batch_size)
            .map(|_| self.rng.random_range(0..n))
            .collect();
        let (real_idx, fake_idx) = resample.split_at(half);
        let z = sample_noise_batch(&mut self.rng, half, d_z);
        let t_loss = self.transformer_step(
            &data.sources().select_rows(real_idx),
            &data.targets().select_rows(real_idx),
            &data.sources().select_rows(fake_idx),
            &z,
        )?;
        let losses = StepLosses {
            step: self.steps,
            d_loss,
            t_loss,
        };
        self.steps += 1;
        Ok(losses)
    }

    /// One pass over a fresh shuffle of `data`; a trailing partial batch is
    /// dropped.
    pub fn run_epoch(&mut self, data: &PairDataset) -> Result<Vec<StepLosses>> {
        let bs = self.config.batch_size;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        order
            .chunks_exact(bs)
            .map(|batch| self.train_step(data, batch))
            .collect()
    }
}

/// Discriminator objective on `[real pairs ; (fake_s, T(fake_s, noise))]`
/// and the gradient of its negation with respect to every discriminator
/// parameter (the direction a descent step moves along to ascend it).
/// The transformer runs with batch statistics and leaves its running
/// statistics alone; the discriminator normalizes the joint batch and
/// updates its running statistics.
pub fn discriminator_gradients(
    model: &mut CraftModel,
    (real_s, real_t): (&Matrix, &Matrix),
    (fake_s, noise): (&Matrix, &Matrix),
    real_label: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let fake_t = {
        let t = &mut model.transformer;
        let out = t.forward(fake_s, noise, Mode::TRAIN_FROZEN)?;
        t.network_mut().clear_tape();
        out
    };
    let s = real_s.vcat(fake_s)?;
    let t = real_t.vcat(&fake_t)?;
    let d = &mut model.discriminator;
    let scores: Vec<f64> = d
        .forward_logits(&s, &t, Mode::TRAIN)?
        .into_iter()
        .map(sigmoid)
        .collect();
    let (real, fake) = scores.split_at(real_s.rows());
    let objective = match discriminator_objective(real, fake, real_label) {
        Ok(v) => v,
        Err(e) => {
            d.network_mut().clear_tape();
            return Err(e);
        }
    };
    let (nr, nf) = (real.len() as f64, fake.len() as f64);
    let grads: Vec<f64> = real
        .iter()
        .map(|&p| -real_term_logit_grad(p, real_label) / nr)
        .chain(fake.iter().map(|&p| -fake_term_logit_grad(p) / nf))
        .collect();
    let (param_grads, _) = d.backward(&grads)?;
    Ok((objective, param_grads))
}

/// How the transformer objective is scored and differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TransformerLoss {
    /// Descend `-mean log D` instead of `mean log(1 - D)`.
    pub non_saturating: bool,
    /// Score the joint `[real ; synthetic]` batch with the discriminator's
    /// batch statistics (not recorded) rather than its running estimates.
    pub batch_stats: bool,
}

impl TransformerLoss {
    pub fn from_config(config: &TrainConfig) -> Self {
        Self {
            non_saturating: config.non_saturating,
            batch_stats: config.discriminator_batch_stats_in_t_step,
        }
    }
}

/// Transformer objective `mean log(1 - D(fake_s, T(fake_s, noise)))` and its
/// gradient with respect to every transformer parameter. Only the synthetic
/// rows carry gradient; real rows matter only through batch statistics.
/// With `non_saturating` the gradient is that of `-mean log D` instead,
/// while the returned objective stays the one above.
pub fn transformer_gradients(
    model: &mut CraftModel,
    (real_s, real_t): (&Matrix, &Matrix),
    (fake_s, noise): (&Matrix, &Matrix),
    loss: TransformerLoss,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let fake_t = model.transformer.forward(fake_s, noise, Mode::TRAIN)?;
    let s = real_s.vcat(fake_s)?;
    let t = real_t.vcat(&fake_t)?;
    let d = &mut model.discriminator;
    let dmode = if loss.batch_stats {
        Mode::TRAIN_FROZEN
    } else {
        Mode::Inference
    };
    let logits = match d.forward_logits(&s, &t, dmode) {
        Ok(l) => l,
        Err(e) => {
            model.transformer.network_mut().clear_tape();
            return Err(e);
        }
    };
    let scores: Vec<f64> = logits.into_iter().map(sigmoid).collect();
    let n_real = real_s.rows();
    let fake = &scores[n_real..];
    let objective = transformer_objective(fake);
    let objective = match objective {
        Ok(v) => v,
        Err(e) => {
            d.network_mut().clear_tape();
            model.transformer.network_mut().clear_tape();
            return Err(e);
        }
    };
    let nf = fake.len() as f64;
    let grads: Vec<f64> = std::iter::repeat_n(0.0, n_real)
        .chain(fake.iter().map(|&p| {
            if loss.non_saturating {
                non_saturating_logit_grad(p) / nf
            } else {
                fake_term_logit_grad(p) / nf
            }
        }))
        .collect();
    let dx = d.backward_input(&grads)?;
    let rows: Vec<usize> = (n_real..dx.rows()).collect();
    let dt = dx.select_rows(&rows).column_slice(real_s.cols(), dx.cols());
    let param_grads = model.transformer.backward(&dt)?;
    Ok((objective, param_grads))
}

/// Trains a fresh model for `config.epochs` epochs over `data`.
pub fn train(data: &PairDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, config, |_, _| {})
}

/// [`train`] with a callback after each epoch (epoch index, that epoch's losses).
pub fn train_with(
    data: &PairDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &[StepLosses]),
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(data.d_s(), data.d_t(), config.clone())?;
    if config.epochs > 0 && data.len() < config.batch_size {
        return Err(Error::Config(format!(
            "dataset of {} pairs is smaller than batch_size {}",
            data.len(),
            config.batch_size
        )));
    }
    let mut history = Vec::with_capacity(config.epochs * (data.len() / config.batch_size));
    for epoch in 0..config.epochs {
        let losses = trainer.run_epoch(data)?;
        on_epoch(epoch, &losses);
        history.extend(losses);
    }
    Ok(TrainOutcome {
        model: trainer.into_model(),
        history,
    })
}
