use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

const MAGIC: &[u8; 8] = b"CRAFTDS\0";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    /// Seed of the generator that produced the data, if any.
    pub seed: Option<u64>,
    /// Free-form JSON describing how the dataset was produced.
    pub provenance: String,
}

/// Co-occurring (source, target) feature pairs with target item ids.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    sources: Matrix,
    targets: Matrix,
    item_ids: Vec<String>,
    pub meta: DatasetMeta,
}

impl PairDataset {
    pub fn new(
        sources: Matrix,
        targets: Matrix,
        item_ids: Vec<String>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        let n = sources.rows();
        if n == 0 {
            return Err(Error::Invalid("dataset must hold at least one pair".into()));
        }
        if targets.rows() != n || item_ids.len() != n {
            return dim_err(format!(
                "{} sources, {} targets and {} ids",
                n,
                targets.rows(),
                item_ids.len()
            ));
        }
        if sources.cols() == 0 || targets.cols() == 0 {
            return dim_err("feature dimensions must be positive");
        }
        if !sources.is_finite() || !targets.is_finite() {
            return Err(Error::NonFinite(
                "dataset contains non-finite features".into(),
            ));
        }
        Ok(Self {
            sources,
            targets,
            item_ids,
            meta,
        })
    }

    /// Ids default to the row indices.
    pub fn with_row_ids(sources: Matrix, targets: Matrix, meta: DatasetMeta) -> Result<Self> {
        let ids = (0..sources.rows()).map(|i| i.to_string()).collect();
        Self::new(sources, targets, ids, meta)
    }

    pub fn len(&self) -> usize {
        self.sources.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn d_s(&self) -> usize {
        self.sources.cols()
    }

    pub fn d_t(&self) -> usize {
        self.targets.cols()
    }

    pub fn sources(&self) -> &Matrix {
        &self.sources
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// Rows `indices` as a new dataset sharing the metadata.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.sources.select_rows(indices),
            self.targets.select_rows(indices),
            indices.iter().map(|&i| self.item_ids[i].clone()).collect(),
            self.meta.clone(),
        )
    }
}

pub fn write_dataset(ds: &PairDataset) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, DATASET_VERSION);
    w.u64(ds.len() as u64);
    w.u64(ds.d_s() as u64);
    w.u64(ds.d_t() as u64);
    w.str(&ds.meta.name);
    match ds.meta.seed {
        Some(s) => {
            w.u8(1);
            w.u64(s);
        }
        None => {
            w.u8(0);
            w.u64(0);
        }
    }
    w.str(&ds.meta.provenance);
    w.f64s(ds.sources.as_slice());
    w.f64s(ds.targets.as_slice());
    for id in &ds.item_ids {
        w.str(id);
    }
    w.into_bytes()
}

pub fn read_dataset(bytes: &[u8]) -> Result<PairDataset> {
    let mut r = Reader::open(bytes, MAGIC, DATASET_VERSION, "dataset")?;
    let n = r.count()?;
    let d_s = r.count()?;
    let d_t = r.count()?;
    if n == 0 {
        return Err(Error::Format("dataset: header declares zero pairs".into()));
    }
    if d_s == 0 || d_t == 0 {
        return Err(Error::Format(
            "dataset: header declares a zero dimension".into(),
        ));
    }
    let name = r.string()?;
    let has_seed = r.u8()?;
    let seed_value = r.u64()?;
    let seed = match has_seed {
        0 => None,
        1 => Some(seed_value),
        f => return Err(Error::Format(format!("dataset: bad seed flag {f}"))),
    };
    let provenance = r.string()?;
    let feature_count = n
        .checked_mul(d_s + d_t)
        .ok_or_else(|| Error::Format("dataset: header dimensions overflow".into()))?;
    if feature_count.saturating_mul(8) > r.remaining() {
        return Err(Error::Format(format!(
            "dataset: header promises {n}x({d_s}+{d_t}) features but only {} bytes remain",
            r.remaining()
        )));
    }
    let sources = Matrix::new(n, d_s, r.f64s(n * d_s)?)?;
    let targets = Matrix::new(n, d_t, r.f64s(n * d_t)?)?;
    let ids = (0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    PairDataset::new(
        sources,
        targets,
        ids,
        DatasetMeta {
            name,
            seed,
            provenance,
        },
    )
}

pub fn save_dataset(ds: &PairDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<PairDataset> {
    read_dataset(&fs::read(path)?)
}
