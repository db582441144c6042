//! Built-in synthetic distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MixtureComponent, SyntheticSpec};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["two-cluster-2d", "five-cluster-8d", "density-gradient"];

pub fn preset(name: &str) -> Result<SyntheticSpec> {
    let spec = match name {
        "two-cluster-2d" => two_cluster_2d(),
        "five-cluster-8d" => five_cluster_8d(),
        "density-gradient" => density_gradient(),
        other => {
            return Err(Error::Config(format!(
                "unknown preset {other:?}; expected one of {PRESET_NAMES:?}"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Two well separated source clusters, each with its own affine map.
fn two_cluster_2d() -> SyntheticSpec {
    SyntheticSpec {
        name: "two-cluster-2d".into(),
        d_s: 2,
        d_t: 2,
        components: vec![
            MixtureComponent {
                weight: 0.5,
                center: vec![-2.5, 0.0],
                spread: 0.6,
                map: vec![vec![0.6, -0.8], vec![0.8, 0.6]],
                offset: vec![1.5, 1.0],
                noise: 0.4,
            },
            MixtureComponent {
                weight: 0.5,
                center: vec![2.5, 0.0],
                spread: 0.6,
                map: vec![vec![-0.5, 0.0], vec![0.0, 1.2]],
                offset: vec![-1.0, -1.5],
                noise: 0.4,
            },
        ],
    }
}

/// Five clusters in 8-d with distinct random maps and target offsets. The
/// parameters come from a fixed ChaCha stream so the preset never changes.
fn five_cluster_8d() -> SyntheticSpec {
    const D: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let components = (0..5)
        .map(|k| {
            let mut center = vec![0.0; D];
            center[k] = 4.0;
            center[(k + 5) % D] = -2.0;
            let map = (0..D)
                .map(|_| {
                    (0..D)
                        .map(|_| 0.35 * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            let mut offset: Vec<f64> = (0..D).map(|_| rng.random_range(-0.5..0.5)).collect();
            offset[(3 * k + 1) % D] += 4.0;
            MixtureComponent {
                weight: 0.2,
                center,
                spread: 0.7,
                map,
                offset,
                noise: 0.3,
            }
        })
        .collect();
    SyntheticSpec {
        name: "five-cluster-8d".into(),
        d_s: D,
        d_t: D,
        components,
    }
}

/// Clusters of sharply decreasing population sharing one affine map, so
/// that query density varies while the conditional law stays smooth.
fn density_gradient() -> SyntheticSpec {
    let map = vec![vec![0.8, -0.6], vec![0.6, 0.8]];
    let offset = vec![0.5, -0.5];
    let layout = [
        (0.55, [0.0, 0.0], 0.5),
        (0.25, [3.0, 1.0], 0.5),
        (0.12, [-3.0, 2.0], 0.6),
        (0.06, [1.0, -4.0], 0.8),
        (0.02, [-3.5, -3.5], 1.0),
    ];
    SyntheticSpec {
        name: "density-gradient".into(),
        d_s: 2,
        d_t: 2,
        components: layout
            .iter()
            .map(|&(weight, center, spread)| MixtureComponent {
                weight,
                center: center.to_vec(),
                spread,
                map: map.clone(),
                offset: offset.clone(),
                noise: 0.25,
            })
            .collect(),
    }
}
