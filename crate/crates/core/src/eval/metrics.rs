//! Quality measures against a synthetic generator's closed-form conditionals.

use rand::Rng;

use crate::data::SyntheticSpec;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{norm, Matrix};
use crate::model::{sample_noise_batch, Transformer};

fn check_spec(phi: &Transformer, spec: &SyntheticSpec) -> Result<()> {
    if phi.d_s() != spec.d_s || phi.d_t() != spec.d_t {
        return dim_err(format!(
            "transformer maps {} -> {} but the generator is {} -> {}",
            phi.d_s(),
            phi.d_t(),
            spec.d_s,
            spec.d_t
        ));
    }
    Ok(())
}

/// `n` transformer outputs for one source, each from fresh noise.
pub fn sample_outputs<R: Rng + ?Sized>(
    phi: &Transformer,
    s: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Matrix> {
    if s.len() != phi.d_s() {
        return dim_err(format!(
            "source of length {} for d_s = {}",
            s.len(),
            phi.d_s()
        ));
    }
    let z = sample_noise_batch(rng, n, phi.d_z());
    let mut rows = Vec::with_capacity(n * s.len());
    for _ in 0..n {
        rows.extend_from_slice(s);
    }
    phi.generate(&Matrix::new(n, s.len(), rows)?, &z)
}

/// Coordinate-averaged standard deviation of the rows of `x`:
/// `sqrt(mean_j var_j)` with the unbiased per-coordinate variance.
pub fn spread(x: &Matrix) -> f64 {
    let n = x.rows() as f64;
    let mean = x.column_means();
    let mut var = vec![0.0; x.cols()];
    for row in x.row_iter() {
        for ((v, a), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (a - m) * (a - m);
        }
    }
    (var.iter().map(|v| v / (n - 1.0)).sum::<f64>() / x.cols() as f64).sqrt()
}

/// Per-query `‖mean of n_samples outputs − E[t | s]‖ / std(t | s)`.
pub fn conditional_mean_errors<R: Rng + ?Sized>(
    phi: &Transformer,
    spec: &SyntheticSpec,
    queries: &Matrix,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_spec(phi, spec)?;
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be positive".into()));
    }
    queries
        .row_iter()
        .map(|s| {
            let draws = sample_outputs(phi, s, n_samples, rng)?;
            let mean = draws.column_means();
            let mu = spec.conditional_mean(s)?;
            let diff: Vec<f64> = mean.iter().zip(&mu).map(|(a, b)| a - b).collect();
            Ok(norm(&diff) / spec.conditional_std(s)?)
        })
        .collect()
}

/// [`conditional_mean_errors`] averaged over explicit queries.
pub fn conditional_mean_error_at<R: Rng + ?Sized>(
    phi: &Transformer,
    spec: &SyntheticSpec,
    queries: &Matrix,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if queries.rows() == 0 {
        return Err(Error::Invalid("no queries".into()));
    }
    let errs = conditional_mean_errors(phi, spec, queries, n_samples, rng)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Mean normalized distance between the transformer's average output and the
/// oracle conditional mean, over `n_queries` sources drawn from `spec`.
pub fn conditional_mean_error<R: Rng + ?Sized>(
    phi: &Transformer,
    spec: &SyntheticSpec,
    n_queries: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_spec(phi, spec)?;
    let queries = spec.sample_sources(n_queries, rng);
    conditional_mean_error_at(phi, spec, &queries, n_samples, rng)
}

/// Mean of `‖t − E[t | s]‖ / std(t | s)` over the given target rows.
pub fn oracle_distance(spec: &SyntheticSpec, s: &[f64], targets: &[&[f64]]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::Invalid("no recommended items to score".into()));
    }
    let mu = spec.conditional_mean(s)?;
    let sd = spec.conditional_std(s)?;
    let mut total = 0.0;
    for t in targets {
        if t.len() != spec.d_t {
            return dim_err(format!(
                "target of length {} for d_t = {}",
                t.len(),
                spec.d_t
            ));
        }
        let diff: Vec<f64> = t.iter().zip(&mu).map(|(a, b)| a - b).collect();
        total += norm(&diff);
    }
    Ok(total / targets.len() as f64 / sd)
}
