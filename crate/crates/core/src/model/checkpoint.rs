//! Checkpoint container: magic, version, a JSON header describing every
//! tensor (name and shape) plus the training configuration, then the tensor
//! payloads as little-endian `f64` in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CraftModel, Discriminator, TrainConfig, Transformer};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{BatchNorm, Dense, Mlp};

const MAGIC: &[u8; 8] = b"CRAFTCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    d_s: usize,
    d_t: usize,
    d_z: usize,
    config: TrainConfig,
    transformer: NetLayout,
    discriminator: NetLayout,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetLayout {
    leaky_alpha: f64,
    norms: Vec<NormSettings>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NormSettings {
    momentum: f64,
    epsilon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn layout(net: &Mlp) -> (NetLayout, Vec<&[f64]>) {
    let mut entries: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    let mut norms = Vec::new();
    for (i, (dense, norm)) in net.layers().enumerate() {
        let (o, n) = (dense.fan_out(), dense.fan_in());
        entries.push((
            format!("layer{i}.weight"),
            vec![o, n],
            dense.weight.as_slice(),
        ));
        entries.push((format!("layer{i}.bias"), vec![o], &dense.bias));
        entries.push((format!("norm{i}.gamma"), vec![o], &norm.gamma));
        entries.push((format!("norm{i}.beta"), vec![o], &norm.beta));
        entries.push((format!("norm{i}.running_mean"), vec![o], &norm.running_mean));
        entries.push((format!("norm{i}.running_var"), vec![o], &norm.running_var));
        norms.push(NormSettings {
            momentum: norm.momentum,
            epsilon: norm.epsilon,
        });
    }
    let head = net.head();
    entries.push((
        "head.weight".into(),
        vec![head.fan_out(), head.fan_in()],
        head.weight.as_slice(),
    ));
    entries.push(("head.bias".into(), vec![head.fan_out()], &head.bias));
    let mut tensors = Vec::with_capacity(entries.len());
    let mut data = Vec::with_capacity(entries.len());
    for (name, shape, values) in entries {
        tensors.push(TensorEntry { name, shape });
        data.push(values);
    }
    (
        NetLayout {
            leaky_alpha: net.leaky_alpha(),
            norms,
            tensors,
        },
        data,
    )
}

pub fn write_checkpoint(model: &CraftModel, config: &TrainConfig) -> Vec<u8> {
    let (tl, td) = layout(model.transformer.network());
    let (dl, dd) = layout(model.discriminator.network());
    let header = Header {
        d_s: model.d_s(),
        d_t: model.d_t(),
        d_z: model.d_z(),
        config: config.clone(),
        transformer: tl,
        discriminator: dl,
    };
    let mut w = Writer::new(MAGIC, CHECKPOINT_VERSION);
    w.str(&serde_json::to_string(&header).expect("header serializes"));
    for t in td.iter().chain(&dd) {
        w.f64s(t);
    }
    w.into_bytes()
}

fn read_net(layout: &NetLayout, r: &mut Reader<'_>, what: &str) -> Result<Mlp> {
    let bad = |msg: String| Error::Format(format!("checkpoint {what}: {msg}"));
    let n_layers = layout.norms.len();
    if layout.tensors.len() != 6 * n_layers + 2 {
        return Err(bad(format!(
            "{} tensors for {n_layers} hidden layers",
            layout.tensors.len()
        )));
    }
    let mut tensors = Vec::with_capacity(layout.tensors.len());
    for entry in &layout.tensors {
        let len = entry
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad(format!("{} shape overflows", entry.name)))?;
        if len.saturating_mul(8) > r.remaining() {
            return Err(bad(format!("truncated in {}", entry.name)));
        }
        tensors.push((entry, r.f64s(len)?));
    }
    let mut it = tensors.into_iter();
    let mut take = |rank: usize| -> Result<(Vec<usize>, Vec<f64>)> {
        let (entry, data) = it.next().expect("tensor count checked above");
        if entry.shape.len() != rank {
            return Err(bad(format!("{} should have rank {rank}", entry.name)));
        }
        Ok((entry.shape.clone(), data))
    };
    let mut layers = Vec::with_capacity(n_layers);
    for settings in &layout.norms {
        let weight = {
            let (shape, data) = take(2)?;
            Matrix::new(shape[0], shape[1], data)?
        };
        let bias = take(1)?.1;
        let norm = BatchNorm {
            gamma: take(1)?.1,
            beta: take(1)?.1,
            running_mean: take(1)?.1,
            running_var: take(1)?.1,
            momentum: settings.momentum,
            epsilon: settings.epsilon,
        };
        layers.push((Dense::new(weight, bias)?, norm));
    }
    let head_w = {
        let (shape, data) = take(2)?;
        Matrix::new(shape[0], shape[1], data)?
    };
    let head_b = take(1)?.1;
    Mlp::from_parts(layers, Dense::new(head_w, head_b)?, layout.leaky_alpha)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(CraftModel, TrainConfig)> {
    let mut r = Reader::open(bytes, MAGIC, CHECKPOINT_VERSION, "checkpoint")?;
    let header: Header = serde_json::from_str(&r.string()?)?;
    let tnet = read_net(&header.transformer, &mut r, "transformer")?;
    let dnet = read_net(&header.discriminator, &mut r, "discriminator")?;
    r.finish()?;
    let transformer = Transformer::from_network(tnet, header.d_s, header.d_z)?;
    let discriminator = Discriminator::from_network(dnet, header.d_s)?;
    let model = CraftModel::from_parts(transformer, discriminator)?;
    if model.d_t() != header.d_t {
        return Err(Error::Format(format!(
            "checkpoint header says d_t = {}, networks say {}",
            header.d_t,
            model.d_t()
        )));
    }
    Ok((model, header.config))
}

pub fn save_checkpoint(
    model: &CraftModel,
    config: &TrainConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, write_checkpoint(model, config))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(CraftModel, TrainConfig)> {
    read_checkpoint(&fs::read(path)?)
}
