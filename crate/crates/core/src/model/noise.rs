use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

/// A noise draw on the unit sphere in `R^d_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector(Vec<f64>);

impl NoiseVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Uniform direction on the unit sphere, via a normalized Gaussian draw.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, d_z: usize) -> NoiseVector {
    assert!(d_z >= 1, "noise dimension must be positive");
    loop {
        let v: Vec<f64> = (0..d_z).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // a zero draw has no direction; redraw
        if norm > 1e-300 {
            return NoiseVector(v.into_iter().map(|x| x / norm).collect());
        }
    }
}

/// `n` independent sphere draws as rows of an `n × d_z` matrix.
pub fn sample_noise_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, d_z: usize) -> Matrix {
    let mut data = Vec::with_capacity(n * d_z);
    for _ in 0..n {
        data.extend(sample_noise(rng, d_z).0);
    }
    Matrix::from_raw(n, d_z, data)
}
