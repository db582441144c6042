use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::linalg::Matrix;

/// Fully connected layer `y = x·Wᵀ + b` with `W` stored as (out × in).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return dim_err(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weight.rows()
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weight: Matrix::from_raw(fan_out, fan_in, data),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.fan_in() {
            return dim_err(format!(
                "dense layer expects {} inputs, got {}",
                self.fan_in(),
                x.cols()
            ));
        }
        let mut y = x.matmul_t(&self.weight)?;
        let out = self.fan_out();
        for row in y.as_mut_slice().chunks_exact_mut(out) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    /// Gradients given the layer input `x` and upstream `dL/dy`; returns the
    /// parameter gradients and `dL/dx`.
    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<(DenseGrads, Matrix)> {
        if upstream.cols() != self.fan_out() || upstream.rows() != x.rows() {
            return dim_err(format!(
                "upstream gradient {}x{} does not match layer output {}x{}",
                upstream.rows(),
                upstream.cols(),
                x.rows(),
                self.fan_out()
            ));
        }
        let weight = upstream.t_matmul(x)?;
        let bias = upstream.column_sums();
        let dx = upstream.matmul(&self.weight)?;
        Ok((DenseGrads { weight, bias }, dx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer() {
        let layer = Dense::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let y = layer.forward(&Matrix::row_vector(&[3.0, -1.0])).unwrap();
        assert_eq!(y.row(0), &[3.0, -1.0]);
    }

    #[test]
    fn hand_computed_layer() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let layer = Dense::new(w, vec![1.0, 0.0]).unwrap();
        let y = layer.forward(&Matrix::row_vector(&[1.0, 1.0])).unwrap();
        assert_eq!(y.row(0), &[4.0, 1.0]);
    }

    #[test]
    fn matches_naive_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut layer = Dense::glorot(3, 4, &mut rng);
        layer.bias = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Matrix::new(5, 3, (0..15).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y = layer.forward(&x).unwrap();
        for i in 0..5 {
            for o in 0..4 {
                let mut acc = layer.bias[o];
                for j in 0..3 {
                    acc += x.get(i, j) * layer.weight.get(o, j);
                }
                assert!((y.get(i, o) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sum_loss_gradients() {
        // L = sum(y): dL/dW[o][j] = sum_i x[i][j], dL/db = batch size
        let layer = Dense::new(
            Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.0]]).unwrap(),
            vec![0.1, 0.2],
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0], vec![0.5, 0.5]]).unwrap();
        let up = Matrix::new(3, 2, vec![1.0; 6]).unwrap();
        let (g, _) = layer.backward(&x, &up).unwrap();
        assert_eq!(g.bias, vec![3.0, 3.0]);
        for o in 0..2 {
            assert_eq!(g.weight.row(o), &[4.5, -1.5]);
        }
    }

    #[test]
    fn shape_errors() {
        let layer = Dense::zeros(3, 2);
        assert!(layer.forward(&Matrix::zeros(1, 2)).is_err());
        assert!(Dense::new(Matrix::zeros(2, 3), vec![0.0]).is_err());
    }
}
