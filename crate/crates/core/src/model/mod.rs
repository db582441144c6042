//! The conditional feature transformer, the pair discriminator, their
//! adversarial objectives, and the alternating trainer.

mod checkpoint;
mod config;
mod loss;
mod networks;
mod noise;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION,
};
pub use config::TrainConfig;
pub use loss::{
    clamp_prob, d_loss, discriminator_objective, fake_term, real_term, t_loss,
    transformer_objective, PROB_CLAMP,
};
pub use networks::{CraftModel, Discriminator, Transformer};
pub use noise::{sample_noise, sample_noise_batch, NoiseVector};
pub use train::{
    discriminator_gradients, train, train_with, transformer_gradients, StepLosses, TrainOutcome,
    Trainer, TransformerLoss,
};
