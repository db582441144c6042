use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::PairDataset;
use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;

/// Top-k principal directions of a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows.
    pub components: Matrix,
    /// Sample variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Scale projected coordinates to unit variance.
    pub whiten: bool,
}

/// PCA by eigendecomposition of the sample covariance (1/(N-1)).
pub fn pca_fit(features: &Matrix, k: usize) -> Result<PcaProjection> {
    fit(features, k, false)
}

pub fn pca_fit_whitened(features: &Matrix, k: usize) -> Result<PcaProjection> {
    fit(features, k, true)
}

fn fit(features: &Matrix, k: usize, whiten: bool) -> Result<PcaProjection> {
    let (n, d) = (features.rows(), features.cols());
    if n < 2 {
        return Err(Error::Invalid(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::Invalid(format!(
            "k = {k} out of range 1..={} for {n}x{d} data",
            n.min(d)
        )));
    }
    let mean = features.column_means();
    let mut centered = features.clone();
    for row in centered.as_mut_slice().chunks_exact_mut(d) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let cov = centered.t_matmul(&centered)?;
    let scale = 1.0 / (n as f64 - 1.0);
    let cov = DMatrix::from_row_slice(d, d, cov.as_slice()).map(|v| v * scale);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps equal eigenvalues in solver order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Matrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let norm = col.norm();
        // sign convention: largest-magnitude entry positive
        let pivot = col
            .iter()
            .cloned()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(r, j, sign * col[j] / norm);
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaProjection {
        mean,
        components,
        explained_variance,
        whiten,
    })
}

impl PcaProjection {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.rows()
    }

    fn whiten_scale(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| {
                if self.whiten && *v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// `y = components · (x - mean)`, rowwise (divided by the component
    /// standard deviation when whitening).
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return dim_err(format!(
                "projection expects {} columns, got {}",
                self.input_dim(),
                x.cols()
            ));
        }
        let mut centered = x.clone();
        for row in centered.as_mut_slice().chunks_exact_mut(self.input_dim()) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        let mut y = centered.matmul_t(&self.components)?;
        if self.whiten {
            let s = self.whiten_scale();
            for row in y.as_mut_slice().chunks_exact_mut(self.output_dim()) {
                for (v, sd) in row.iter_mut().zip(&s) {
                    *v /= sd;
                }
            }
        }
        Ok(y)
    }

    /// Maps reduced coordinates back into the input space.
    pub fn inverse(&self, y: &Matrix) -> Result<Matrix> {
        if y.cols() != self.output_dim() {
            return dim_err(format!(
                "inverse expects {} columns, got {}",
                self.output_dim(),
                y.cols()
            ));
        }
        let mut y = y.clone();
        if self.whiten {
            let s = self.whiten_scale();
            for row in y.as_mut_slice().chunks_exact_mut(self.output_dim()) {
                for (v, sd) in row.iter_mut().zip(&s) {
                    *v *= sd;
                }
            }
        }
        let mut x = y.matmul(&self.components)?;
        for row in x.as_mut_slice().chunks_exact_mut(self.input_dim()) {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }

    /// Mean squared reconstruction error over the rows of `x`.
    pub fn reconstruction_error(&self, x: &Matrix) -> Result<f64> {
        let back = self.inverse(&self.transform(x)?)?;
        let total: f64 = x
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(total / x.rows() as f64)
    }
}

/// Fits separate projections on sources and targets and returns the
/// reduced dataset with both projections.
pub fn reduce_dataset(
    ds: &PairDataset,
    k_source: usize,
    k_target: usize,
    whiten: bool,
) -> Result<(PairDataset, PcaProjection, PcaProjection)> {
    let ps = fit(ds.sources(), k_source, whiten)?;
    let pt = fit(ds.targets(), k_target, whiten)?;
    let reduced = PairDataset::new(
        ps.transform(ds.sources())?,
        pt.transform(ds.targets())?,
        ds.item_ids().to_vec(),
        ds.meta.clone(),
    )?;
    Ok((reduced, ps, pt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::new(n, d, data).unwrap()
    }

    fn mixed(n: usize, seed: u64) -> Matrix {
        // correlated, anisotropic 4-d data
        let g = gaussian(n, 4, seed);
        let a = Matrix::from_rows(&[
            vec![3.0, 0.0, 0.0, 0.0],
            vec![1.0, 2.0, 0.0, 0.0],
            vec![0.5, -0.3, 1.0, 0.0],
            vec![0.0, 0.2, 0.1, 0.3],
        ])
        .unwrap();
        g.matmul_t(&a).unwrap()
    }

    #[test]
    fn line_data() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let p = pca_fit(&Matrix::from_rows(&rows).unwrap(), 2).unwrap();
        let s5 = 5f64.sqrt();
        assert!((p.components.get(0, 0) - 1.0 / s5).abs() < 1e-10);
        assert!((p.components.get(0, 1) - 2.0 / s5).abs() < 1e-10);
        assert!(p.explained_variance[1].abs() < 1e-9);
    }

    #[test]
    fn isotropic_variances() {
        let p = pca_fit(&gaussian(10_000, 3, 1), 3).unwrap();
        for v in &p.explained_variance {
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn complete_basis_round_trip() {
        let x = mixed(200, 2);
        for whiten in [false, true] {
            let p = fit(&x, 4, whiten).unwrap();
            assert!(p.reconstruction_error(&x).unwrap() < 1e-9);
            let back = p.inverse(&p.transform(&x).unwrap()).unwrap();
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthonormal_sorted_and_centered() {
        let x = mixed(500, 3);
        let p = pca_fit(&x, 3).unwrap();
        let gram = p.components.matmul_t(&p.components).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram.get(i, j) - e).abs() < 1e-8);
            }
        }
        assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
        let y = p.transform(&x).unwrap();
        for m in y.column_means() {
            assert!(m.abs() < 1e-9);
        }
        let at_mean = p.transform(&Matrix::row_vector(&p.mean)).unwrap();
        assert!(at_mean.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn reconstruction_error_monotone_in_k() {
        let x = mixed(300, 4);
        let errs: Vec<f64> = (1..=4)
            .map(|k| pca_fit(&x, k).unwrap().reconstruction_error(&x).unwrap())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
    }

    #[test]
    fn whitened_unit_variance() {
        let x = mixed(2000, 5);
        let p = pca_fit_whitened(&x, 2).unwrap();
        let y = p.transform(&x).unwrap();
        for j in 0..2 {
            let var =
                (0..y.rows()).map(|i| y.get(i, j).powi(2)).sum::<f64>() / (y.rows() - 1) as f64;
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_k() {
        let x = mixed(10, 6);
        assert!(pca_fit(&x, 0).is_err());
        assert!(pca_fit(&x, 5).is_err());
        assert!(pca_fit(&Matrix::zeros(1, 3), 1).is_err());
        let p = pca_fit(&x, 2).unwrap();
        assert!(p.transform(&Matrix::zeros(1, 3)).is_err());
        assert!(p.inverse(&Matrix::zeros(1, 3)).is_err());
    }
}
