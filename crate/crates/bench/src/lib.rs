//! Shared inputs for the benchmarks.

use illposed_core::linalg::Matrix;
use illposed_core::problems::make_integration_operator;

/// Integration operator of size `n` and data `y = A x` for `x(t) = t(1 − t)`.
pub fn integration_data(n: usize) -> (Matrix, Vec<f64>) {
    let p = make_integration_operator(n).expect("valid size");
    let x: Vec<f64> = p.grid().iter().map(|t| t * (1.0 - t)).collect();
    let y = p.matrix().mul_vec(&x);
    (p.matrix().clone(), y)
}
