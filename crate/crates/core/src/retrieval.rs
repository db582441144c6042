//! Exact nearest-neighbour search over a catalog of target features, and the
//! recommendation path that resolves synthesized features to catalog items.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::binio::{Reader, Writer};
use crate::data::PairDataset;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::model::{sample_noise_batch, Transformer};

const MAGIC: &[u8; 8] = b"CRAFTIX\0";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L2,
}

impl Metric {
    fn tag(self) -> u8 {
        match self {
            Metric::L2 => 0,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Metric::L2),
            t => Err(Error::Format(format!("index: unknown metric tag {t}"))),
        }
    }
}

/// A catalog item returned by a query.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub id: String,
    /// Row of the item in the index.
    pub row: usize,
    pub distance: f64,
}

/// Brute-force index over `M` candidate feature vectors with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    features: Matrix,
    ids: Vec<String>,
    metric: Metric,
    /// Free-form JSON describing how the index was built.
    provenance: String,
}

/// Builds an index over exactly the given rows.
pub fn index_build(targets: Matrix, ids: Vec<String>) -> Result<KnnIndex> {
    if targets.rows() == 0 {
        return Err(Error::Invalid("index needs at least one row".into()));
    }
    if targets.cols() == 0 {
        return dim_err("index features must have positive dimension");
    }
    if ids.len() != targets.rows() {
        return dim_err(format!("{} ids for {} rows", ids.len(), targets.rows()));
    }
    if !targets.is_finite() {
        return Err(Error::NonFinite("index features".into()));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Invalid(format!("duplicate item id {id:?}")));
        }
    }
    Ok(KnnIndex {
        features: targets,
        ids,
        metric: Metric::L2,
        provenance: String::new(),
    })
}

fn by_distance_then_id(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

impl KnnIndex {
    /// Index over a dataset's targets, keyed by its item ids.
    pub fn from_dataset(ds: &PairDataset) -> Result<Self> {
        index_build(ds.targets().clone(), ds.item_ids().to_vec())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// The `k` closest items, ascending by distance, ties by ascending id.
    pub fn knn_query(&self, q: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if q.len() != self.dim() {
            return dim_err(format!(
                "query of dimension {} for an index of dimension {}",
                q.len(),
                self.dim()
            ));
        }
        if k > self.len() {
            return Err(Error::Invalid(format!(
                "k = {k} exceeds the {} indexed items",
                self.len()
            )));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        // squared distances order identically to distances and are exact
        let mut scored: Vec<(f64, &str, usize)> = self
            .features
            .row_iter()
            .zip(&self.ids)
            .enumerate()
            .map(|(row, (x, id))| (sq_dist(q, x), id.as_str(), row))
            .collect();
        let cmp = |a: &(f64, &str, usize), b: &(f64, &str, usize)| {
            by_distance_then_id(&(a.0, a.1), &(b.0, b.1))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(d2, id, row)| Neighbor {
                id: id.to_string(),
                row,
                distance: d2.sqrt(),
            })
            .collect())
    }
}

/// Samples `n_samples` noise vectors, synthesizes `T(s, z_i)` for each,
/// takes `k_per_sample` neighbours of every synthesized feature, and merges
/// them keeping each item's minimum distance. Result is ascending by that
/// distance, ties by id.
pub fn recommend<R: Rng + ?Sized>(
    phi: &Transformer,
    index: &KnnIndex,
    s: &[f64],
    n_samples: usize,
    k_per_sample: usize,
    rng: &mut R,
) -> Result<Vec<Neighbor>> {
    if n_samples == 0 || k_per_sample == 0 {
        return Err(Error::Invalid(
            "n_samples and k_per_sample must be positive".into(),
        ));
    }
    if phi.d_t() != index.dim() {
        return dim_err(format!(
            "transformer emits {}-d features, index holds {}-d features",
            phi.d_t(),
            index.dim()
        ));
    }
    if s.len() != phi.d_s() {
        return dim_err(format!(
            "query of dimension {} for a transformer with d_s = {}",
            s.len(),
            phi.d_s()
        ));
    }
    let z = sample_noise_batch(rng, n_samples, phi.d_z());
    let mut rows = Vec::with_capacity(n_samples * s.len());
    for _ in 0..n_samples {
        rows.extend_from_slice(s);
    }
    let sources = Matrix::new(n_samples, s.len(), rows)?;
    let synthesized = phi.generate(&sources, &z)?;
    let mut best: HashMap<String, Neighbor> = HashMap::new();
    for t_hat in synthesized.row_iter() {
        for nb in index.knn_query(t_hat, k_per_sample)? {
            match best.get_mut(&nb.id) {
                Some(cur) if cur.distance <= nb.distance => {}
                Some(cur) => *cur = nb,
                None => {
                    best.insert(nb.id.clone(), nb);
                }
            }
        }
    }
    let mut merged: Vec<Neighbor> = best.into_values().collect();
    merged.sort_by(|a, b| by_distance_then_id(&(a.distance, &a.id), &(b.distance, &b.id)));
    Ok(merged)
}

pub fn write_index(index: &KnnIndex) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, INDEX_VERSION);
    w.u64(index.len() as u64);
    w.u64(index.dim() as u64);
    w.u8(index.metric.tag());
    w.str(&index.provenance);
    w.f64s(index.features.as_slice());
    for id in &index.ids {
        w.str(id);
    }
    w.into_bytes()
}

pub fn read_index(bytes: &[u8]) -> Result<KnnIndex> {
    let mut r = Reader::open(bytes, MAGIC, INDEX_VERSION, "index")?;
    let m = r.count()?;
    let d = r.count()?;
    let metric = Metric::from_tag(r.u8()?)?;
    let provenance = r.string()?;
    if m == 0 || d == 0 {
        return Err(Error::Format(
            "index: header declares an empty index".into(),
        ));
    }
    let total = m
        .checked_mul(d)
        .ok_or_else(|| Error::Format("index: header dimensions overflow".into()))?;
    if total.saturating_mul(8) > r.remaining() {
        return Err(Error::Format(format!(
            "index: header promises {m}x{d} features but only {} bytes remain",
            r.remaining()
        )));
    }
    let features = Matrix::new(m, d, r.f64s(total)?)?;
    let ids = (0..m).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let mut index = index_build(features, ids)?;
    index.metric = metric;
    index.provenance = provenance;
    Ok(index)
}

pub fn save_index(index: &KnnIndex, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_index(index))?;
    Ok(())
}

pub fn load_index(path: impl AsRef<Path>) -> Result<KnnIndex> {
    read_index(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("item{i}")).collect()
    }

    #[test]
    fn singleton_index() {
        let idx = index_build(Matrix::row_vector(&[1.0, 2.0]), ids(1)).unwrap();
        for q in [[0.0, 0.0], [100.0, -3.0]] {
            let r = idx.knn_query(&q, 1).unwrap();
            assert_eq!(r[0].id, "item0");
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = index_build(Matrix::zeros(2, 1), vec!["a".into(), "a".into()]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn exact_hit_first() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let idx = index_build(m, ids(3)).unwrap();
        let r = idx.knn_query(&[2.0, 2.0], 2).unwrap();
        assert_eq!(r[0].id, "item1");
        assert_eq!(r[0].distance, 0.0);
    }

    #[test]
    fn points_on_a_line() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let idx = index_build(m, vec!["p0".into(), "p1".into(), "p3".into()]).unwrap();
        let r = idx.knn_query(&[0.9], 2).unwrap();
        let got: Vec<&str> = r.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(got, ["p1", "p0"]);
        assert!((r[0].distance - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_id() {
        let m = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
        let idx = index_build(m, vec!["c".into(), "b".into(), "a".into()]).unwrap();
        let r = idx.knn_query(&[0.0], 3).unwrap();
        let got: Vec<&str> = r.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(got, ["a", "b", "c"]);
    }

    #[test]
    fn query_errors() {
        let idx = index_build(Matrix::zeros(2, 3), ids(2)).unwrap();
        assert!(idx.knn_query(&[0.0; 3], 3).is_err());
        assert!(idx.knn_query(&[0.0; 2], 1).is_err());
    }

    #[test]
    fn rebuild_gives_same_answers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = index_build(Matrix::new(50, 4, data.clone()).unwrap(), ids(50)).unwrap();
        let b = index_build(Matrix::new(50, 4, data).unwrap(), ids(50)).unwrap();
        let q = [0.1, 0.2, -0.3, 0.0];
        assert_eq!(a.knn_query(&q, 7).unwrap(), b.knn_query(&q, 7).unwrap());
    }

    #[test]
    fn index_round_trip_and_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..60).map(|_| rng.random_range(-1e3..1e3)).collect();
        let idx = index_build(Matrix::new(20, 3, data).unwrap(), ids(20))
            .unwrap()
            .with_provenance("{\"source\":\"test\"}");
        let bytes = write_index(&idx);
        assert_eq!(read_index(&bytes).unwrap(), idx);
        assert!(read_index(&bytes[..bytes.len() - 3]).is_err());
    }

    fn tiny_transformer(d_t: usize) -> Transformer {
        let cfg = TrainConfig {
            d_z: 3,
            hidden: vec![6],
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Transformer::new(2, d_t, cfg.d_z, &cfg.hidden, cfg.leaky_alpha, &mut rng).unwrap()
    }

    #[test]
    fn single_sample_is_plain_nearest_neighbor() {
        let phi = tiny_transformer(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cat: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let idx = index_build(Matrix::new(20, 2, cat).unwrap(), ids(20)).unwrap();
        let s = [0.3, -0.7];
        let recs = recommend(&phi, &idx, &s, 1, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(recs.len(), 1);
        let z = sample_noise_batch(&mut ChaCha8Rng::seed_from_u64(5), 1, 3);
        let t_hat = phi.generate(&Matrix::row_vector(&s), &z).unwrap();
        let nn = idx.knn_query(t_hat.row(0), 1).unwrap();
        assert_eq!(recs, nn);
    }

    #[test]
    fn merge_keeps_minimum_distance_once() {
        let phi = tiny_transformer(1);
        // with only two catalog items every sample hits both
        let idx = index_build(Matrix::new(2, 1, vec![-5.0, 5.0]).unwrap(), ids(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = [1.0, 1.0];
        let recs = recommend(&phi, &idx, &s, 10, 2, &mut rng).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].distance <= recs[1].distance);
        let z = sample_noise_batch(&mut ChaCha8Rng::seed_from_u64(7), 10, 3);
        let src = Matrix::new(10, 2, [1.0; 20].to_vec()).unwrap();
        let t = phi.generate(&src, &z).unwrap();
        for rec in &recs {
            let target = idx.features().get(rec.row, 0);
            let min = t
                .as_slice()
                .iter()
                .map(|v| (v - target).abs())
                .fold(f64::INFINITY, f64::min);
            assert!((rec.distance - min).abs() < 1e-12);
        }
        let again = recommend(&phi, &idx, &s, 10, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(recs, again);
    }

    #[test]
    fn recommend_dimension_errors() {
        let phi = tiny_transformer(2);
        let idx = index_build(Matrix::zeros(3, 4), ids(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(recommend(&phi, &idx, &[0.0, 0.0], 2, 1, &mut rng).is_err());
    }
}
