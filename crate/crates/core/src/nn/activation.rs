use crate::linalg::Matrix;

/// Elementwise `x` for `x >= 0`, `alpha * x` otherwise.
pub fn leaky_relu(x: &Matrix, alpha: f64) -> Matrix {
    let data = x
        .as_slice()
        .iter()
        .map(|&v| if v >= 0.0 { v } else { alpha * v })
        .collect();
    Matrix::from_raw(x.rows(), x.cols(), data)
}

/// Gradient through leaky ReLU given the pre-activation `x`.
pub fn leaky_relu_backward(x: &Matrix, upstream: &Matrix, alpha: f64) -> Matrix {
    let data = x
        .as_slice()
        .iter()
        .zip(upstream.as_slice())
        .map(|(&v, &g)| if v >= 0.0 { g } else { alpha * g })
        .collect();
    Matrix::from_raw(x.rows(), x.cols(), data)
}

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
