//! Dense linear algebra substrate: matrices, singular systems, SPD solves
//! and a reproducible Gaussian random source.

mod cholesky;
mod matrix;
mod random;
mod svd;

pub use cholesky::{solve_spd, Cholesky};
pub use matrix::{add, axpy, distance, dot, norm, scale, spectral_norm_estimate, sub, Matrix};
pub use random::{splitmix64, RandomSource};
pub use svd::{svd, SingularSystem};

/// `n` standard-normal variates drawn from `src`.
pub fn gaussian_vector(src: &mut RandomSource, n: usize) -> Vec<f64> {
    src.gaussian_vector(n)
}

/// Ordinary least-squares slope, intercept and root-mean-square residual
/// of the line through `(x_i, y_i)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}
