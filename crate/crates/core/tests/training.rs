use craft_core::data::{preset, DatasetMeta, PairDataset};
use craft_core::model::{
    d_loss, discriminator_gradients, fake_term, read_checkpoint, real_term, sample_noise_batch,
    t_loss, train, train_with, transformer_gradients, write_checkpoint, CraftModel, TrainConfig,
    Trainer, TransformerLoss,
};
use craft_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        epochs: 2,
        d_z: 4,
        hidden: vec![8, 8],
        seed: 9,
        ..TrainConfig::default()
    }
}

fn small_dataset(n: usize) -> PairDataset {
    preset("two-cluster-2d")
        .unwrap()
        .generate_seeded(n, 3)
        .unwrap()
}

fn snapshot(m: &CraftModel) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let own = |ps: Vec<&[f64]>| ps.into_iter().map(<[f64]>::to_vec).collect::<Vec<_>>();
    (
        own(m.transformer.network().params()),
        own(m.discriminator.network().params()),
    )
}

struct Batch {
    real_s: Matrix,
    real_t: Matrix,
    fake_s: Matrix,
    noise: Matrix,
}

fn batch(data: &PairDataset, half: usize, d_z: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..half).map(|_| rng.random_range(0..data.len())).collect()
    };
    let real = pick(&mut rng);
    let fake = pick(&mut rng);
    Batch {
        real_s: data.sources().select_rows(&real),
        real_t: data.targets().select_rows(&real),
        fake_s: data.sources().select_rows(&fake),
        noise: sample_noise_batch(&mut rng, half, d_z),
    }
}

#[test]
fn each_step_moves_only_its_own_player() {
    let data = small_dataset(64);
    let cfg = small_config();
    let mut trainer = Trainer::new(2, 2, cfg.clone()).unwrap();
    let b = batch(&data, 8, cfg.d_z, 1);

    let before = trainer.model().clone();
    trainer
        .discriminator_step(&b.real_s, &b.real_t, &b.fake_s, &b.noise)
        .unwrap();
    let after = trainer.model().clone();
    assert_eq!(before.transformer, after.transformer);
    assert_ne!(snapshot(&before).1, snapshot(&after).1);

    trainer
        .transformer_step(&b.real_s, &b.real_t, &b.fake_s, &b.noise)
        .unwrap();
    let last = trainer.model().clone();
    assert_eq!(after.discriminator, last.discriminator);
    assert_ne!(snapshot(&after).0, snapshot(&last).0);
}

#[test]
fn zero_learning_rate_keeps_weights() {
    let data = small_dataset(64);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    let mut trainer = Trainer::new(2, 2, cfg).unwrap();
    let before = snapshot(trainer.model());
    let losses = trainer.run_epoch(&data).unwrap();
    assert_eq!(losses.len(), 4);
    assert!(losses
        .iter()
        .all(|l| l.d_loss.is_finite() && l.t_loss.is_finite()));
    assert_eq!(before, snapshot(trainer.model()));
}

#[test]
fn discriminator_step_does_not_lower_its_objective() {
    let data = small_dataset(256);
    for seed in 0..5 {
        let cfg = TrainConfig {
            learning_rate: 1e-7,
            seed,
            ..small_config()
        };
        let mut trainer = Trainer::new(2, 2, cfg.clone()).unwrap();
        let b = batch(&data, 8, cfg.d_z, 100 + seed);
        let objective = |m: &CraftModel| {
            let mut m = m.clone();
            discriminator_gradients(
                &mut m,
                (&b.real_s, &b.real_t),
                (&b.fake_s, &b.noise),
                cfg.real_label,
            )
            .unwrap()
            .0
        };
        let before = objective(trainer.model());
        let reported = trainer
            .discriminator_step(&b.real_s, &b.real_t, &b.fake_s, &b.noise)
            .unwrap();
        assert_eq!(reported, before);
        let after = objective(trainer.model());
        assert!(after >= before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn transformer_step_does_not_raise_its_objective() {
    let data = small_dataset(256);
    for seed in 0..5 {
        let cfg = TrainConfig {
            learning_rate: 1e-7,
            seed,
            ..small_config()
        };
        let mut trainer = Trainer::new(2, 2, cfg.clone()).unwrap();
        let b = batch(&data, 8, cfg.d_z, 200 + seed);
        let objective = |m: &CraftModel| {
            let mut m = m.clone();
            transformer_gradients(
                &mut m,
                (&b.real_s, &b.real_t),
                (&b.fake_s, &b.noise),
                TransformerLoss::from_config(&cfg),
            )
            .unwrap()
            .0
        };
        let before = objective(trainer.model());
        trainer
            .transformer_step(&b.real_s, &b.real_t, &b.fake_s, &b.noise)
            .unwrap();
        let after = objective(trainer.model());
        assert!(after <= before, "seed {seed}: {before} -> {after}");
    }
}

#[test]
fn transformer_objective_is_fake_term_of_discriminator_objective() {
    let data = small_dataset(64);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = CraftModel::new(2, 2, &small_config(), &mut rng).unwrap();
    let b = batch(&data, 8, 4, 2);
    let fake_t = model.transformer.generate(&b.fake_s, &b.noise).unwrap();
    let eq1 = d_loss(
        &model.discriminator,
        (&b.real_s, &b.real_t),
        (&b.fake_s, &fake_t),
        0.9,
    )
    .unwrap();
    let real_scores = model
        .discriminator
        .score_batch(&b.real_s, &b.real_t)
        .unwrap();
    let fake_scores = model.discriminator.score_batch(&b.fake_s, &fake_t).unwrap();
    let eq2 = t_loss(
        &model.discriminator,
        &model.transformer,
        &b.fake_s,
        &b.noise,
    )
    .unwrap();
    assert!((eq2 - (eq1 - real_term(&real_scores, 0.9))).abs() < 1e-12);
    assert_eq!(eq2, fake_term(&fake_scores));
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = small_dataset(96);
    let a = train(&data, &small_config()).unwrap();
    let b = train(&data, &small_config()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(
        write_checkpoint(&a.model, &small_config()),
        write_checkpoint(&b.model, &small_config())
    );
    let other = TrainConfig {
        seed: 10,
        ..small_config()
    };
    assert_ne!(train(&data, &other).unwrap().model, a.model);
}

#[test]
fn zero_epochs_returns_initial_model() {
    let data = small_dataset(40);
    let cfg = TrainConfig {
        epochs: 0,
        ..small_config()
    };
    let out = train(&data, &cfg).unwrap();
    assert!(out.history.is_empty());
    let fresh = Trainer::new(2, 2, cfg).unwrap().into_model();
    assert_eq!(out.model, fresh);
}

#[test]
fn history_counts_full_batches() {
    // 70 / 16 leaves a partial batch of 6 that is dropped
    let data = small_dataset(70);
    let cfg = TrainConfig {
        epochs: 3,
        ..small_config()
    };
    let mut per_epoch = Vec::new();
    let out = train_with(&data, &cfg, |e, l| per_epoch.push((e, l.len()))).unwrap();
    assert_eq!(out.history.len(), 3 * 4);
    assert_eq!(per_epoch, vec![(0, 4), (1, 4), (2, 4)]);
    let steps: Vec<u64> = out.history.iter().map(|l| l.step).collect();
    assert_eq!(steps, (0..12).collect::<Vec<_>>());
}

#[test]
fn dataset_smaller_than_batch_rejected() {
    let data = small_dataset(10);
    assert!(train(&data, &small_config()).is_err());
}

#[test]
fn trained_checkpoint_round_trips() {
    let data = small_dataset(64);
    let cfg = small_config();
    let out = train(&data, &cfg).unwrap();
    let bytes = write_checkpoint(&out.model, &cfg);
    let (model, back_cfg) = read_checkpoint(&bytes).unwrap();
    assert_eq!(model, out.model);
    assert_eq!(back_cfg, cfg);
    assert_eq!(write_checkpoint(&model, &back_cfg), bytes);
    let s = data.sources().select_rows(&[0, 1, 2]);
    let z = sample_noise_batch(&mut ChaCha8Rng::seed_from_u64(0), 3, cfg.d_z);
    assert_eq!(
        model.transformer.generate(&s, &z).unwrap(),
        out.model.transformer.generate(&s, &z).unwrap()
    );
}

#[test]
fn mismatched_dataset_rejected() {
    let s = Matrix::zeros(32, 3);
    let t = Matrix::zeros(32, 2);
    let data = PairDataset::with_row_ids(s, t, DatasetMeta::default()).unwrap();
    let mut trainer = Trainer::new(2, 2, small_config()).unwrap();
    assert!(trainer.run_epoch(&data).is_err());
}
