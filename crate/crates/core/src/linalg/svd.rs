//! Singular value decomposition by one-sided Jacobi rotations.
//!
//! Columns of the working copy of `A` are rotated pairwise until they are
//! mutually orthogonal; the rotations accumulate into `V`, the column norms
//! are the singular values and the normalized columns form `U`. The method
//! never forms `AᵀA` and computes small singular values to high relative
//! accuracy.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Singular triples `(σ_k, u_k, v_k)` with `A v_k = σ_k u_k` and `Aᵀ u_k = σ_k v_k`.
///
/// Singular values are sorted in nonincreasing order and strictly positive;
/// numerically zero values are dropped, so `rank()` may be smaller than
/// `min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SingularSystem {
    rows: usize,
    cols: usize,
    sigma: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl SingularSystem {
    /// Assembles a singular system from explicit triples. Callers are
    /// responsible for orthonormality; the ordering is checked.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        sigma: Vec<f64>,
        u: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if sigma.len() != u.len() || sigma.len() != v.len() {
            return Err(Error::Shape("singular triple counts differ".into()));
        }
        if u.iter().any(|c| c.len() != rows) || v.iter().any(|c| c.len() != cols) {
            return Err(Error::Shape("singular vector length mismatch".into()));
        }
        if sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Input("singular values must be positive and finite".into()));
        }
        if sigma.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Input("singular values must be nonincreasing".into()));
        }
        Ok(Self {
            rows,
            cols,
            sigma,
            u,
            v,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn u(&self, k: usize) -> &[f64] {
        &self.u[k]
    }

    pub fn v(&self, k: usize) -> &[f64] {
        &self.v[k]
    }

    pub fn u_columns(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn v_columns(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn u_matrix(&self) -> Matrix {
        Matrix::from_columns(self.rows, &self.u)
    }

    pub fn v_matrix(&self) -> Matrix {
        Matrix::from_columns(self.cols, &self.v)
    }

    /// Coefficients `⟨y, u_k⟩`.
    pub fn u_coefficients(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "data length mismatch");
        self.u.iter().map(|u| dot(u, y)).collect()
    }

    /// Coefficients `⟨x, v_k⟩`.
    pub fn v_coefficients(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "unknown length mismatch");
        self.v.iter().map(|v| dot(v, x)).collect()
    }

    /// `Σ c_k v_k`
    pub fn synthesize_v(&self, coeffs: &[f64]) -> Vec<f64> {
        combine(self.cols, &self.v, coeffs)
    }

    /// `Σ c_k u_k`
    pub fn synthesize_u(&self, coeffs: &[f64]) -> Vec<f64> {
        combine(self.rows, &self.u, coeffs)
    }

    /// `U diag(σ) Vᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let mut a = Matrix::zeros(self.rows, self.cols);
        for ((s, u), v) in self.sigma.iter().zip(&self.u).zip(&self.v) {
            for i in 0..self.rows {
                let f = s * u[i];
                if f == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    a[(i, j)] += f * v[j];
                }
            }
        }
        a
    }
}

fn combine(len: usize, basis: &[Vec<f64>], coeffs: &[f64]) -> Vec<f64> {
    assert_eq!(basis.len(), coeffs.len(), "coefficient count mismatch");
    let mut out = vec![0.0; len];
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            super::matrix::axpy(c, b, &mut out);
        }
    }
    out
}

/// Computes the singular system of `a`.
///
/// Singular values `σ ≤ max(rows, cols)·ε·σ₁` are treated as zero and dropped.
pub fn svd(a: &Matrix) -> Result<SingularSystem> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::Size("svd needs at least one row and one column".into()));
    }
    if !a.is_finite() {
        return Err(Error::Input("svd input has non-finite entries".into()));
    }
    if a.rows() >= a.cols() {
        let (sigma, u, v) = jacobi_tall(a.rows(), a.columns());
        Ok(SingularSystem {
            rows: a.rows(),
            cols: a.cols(),
            sigma,
            u,
            v,
        })
    } else {
        let (sigma, u, v) = jacobi_tall(a.cols(), a.transpose().columns());
        Ok(SingularSystem {
            rows: a.rows(),
            cols: a.cols(),
            sigma,
            u: v,
            v: u,
        })
    }
}

/// One-sided Jacobi on the `m × n` matrix given by its columns, `m ≥ n`.
fn jacobi_tall(m: usize, mut cols: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = cols.len();
    let eps = f64::EPSILON;
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut norms2: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let a = norms2[i];
                let b = norms2[j];
                if a == 0.0 || b == 0.0 {
                    continue;
                }
                let d = dot(&cols[i], &cols[j]);
                if d.abs() <= eps * (a * b).sqrt() || d == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * d);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = pair_mut(&mut cols, i, j);
                rotate(ci, cj, c, s);
                let (vi, vj) = pair_mut(&mut v, i, j);
                rotate(vi, vj, c, s);
                norms2[i] = a - t * d;
                norms2[j] = b + t * d;
            }
        }
        // Refresh cached norms to stop drift from the update formulas.
        for (nrm, c) in norms2.iter_mut().zip(&cols) {
            *nrm = dot(c, c);
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sig: Vec<f64> = norms2.iter().map(|v| v.sqrt()).collect();
    order.sort_by(|&p, &q| sig[q].total_cmp(&sig[p]).then(p.cmp(&q)));
    let sigma_max = order.first().map_or(0.0, |&k| sig[k]);
    let cutoff = (m.max(n) as f64) * eps * sigma_max;

    let mut sigma = Vec::new();
    let mut u = Vec::new();
    let mut vv = Vec::new();
    for k in order {
        let s = sig[k];
        if !(s > cutoff) || s == 0.0 {
            break;
        }
        sigma.push(s);
        u.push(cols[k].iter().map(|x| x / s).collect());
        vv.push(std::mem::take(&mut v[k]));
    }
    (sigma, u, vv)
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn pair_mut<T>(v: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RandomSource;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut src = RandomSource::new(seed);
        let data = src.gaussian_vector(rows * cols);
        Matrix::from_row_major(rows, cols, data).unwrap()
    }

    fn orthogonality_defect(cols: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in cols.iter().enumerate() {
            for (j, b) in cols.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let sys = svd(&Matrix::identity(2)).unwrap();
        assert_eq!(sys.sigma(), &[1.0, 1.0]);
        for k in 0..2 {
            assert!((dot(sys.u(k), sys.v(k)).abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_case() {
        let sys = svd(&Matrix::from_diagonal(&[2.0, 3.0])).unwrap();
        assert_eq!(sys.sigma(), &[3.0, 2.0]);
    }

    #[test]
    fn random_5x3_reconstructs() {
        let a = random_matrix(5, 3, 42);
        let sys = svd(&a).unwrap();
        assert_eq!(sys.rank(), 3);
        let err = a.sub(&sys.reconstruct()).frobenius_norm();
        assert!(err <= 1e-10 * a.frobenius_norm(), "reconstruction {err}");
        assert!(orthogonality_defect(sys.u_columns()) <= 1e-10);
        assert!(orthogonality_defect(sys.v_columns()) <= 1e-10);
    }

    #[test]
    fn wide_matrix_goes_through_transpose() {
        let a = random_matrix(3, 7, 5);
        let sys = svd(&a).unwrap();
        assert_eq!(sys.rank(), 3);
        assert_eq!(sys.u(0).len(), 3);
        assert_eq!(sys.v(0).len(), 7);
        let err = a.sub(&sys.reconstruct()).frobenius_norm();
        assert!(err <= 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn zero_column_is_dropped() {
        let mut a = random_matrix(4, 3, 9);
        for i in 0..4 {
            a[(i, 1)] = 0.0;
        }
        let sys = svd(&a).unwrap();
        assert_eq!(sys.rank(), 2);
        let err = a.sub(&sys.reconstruct()).frobenius_norm();
        assert!(err <= 1e-10 * a.frobenius_norm());
    }

    #[test]
    fn singular_vector_equations_hold() {
        let a = random_matrix(12, 9, 3);
        let sys = svd(&a).unwrap();
        let s1 = sys.sigma()[0];
        for k in 0..sys.rank() {
            let av = a.mul_vec(sys.v(k));
            let atu = a.tr_mul_vec(sys.u(k));
            let r1: f64 = av.iter().zip(sys.u(k)).map(|(x, u)| (x - sys.sigma()[k] * u).powi(2)).sum();
            let r2: f64 = atu.iter().zip(sys.v(k)).map(|(x, v)| (x - sys.sigma()[k] * v).powi(2)).sum();
            assert!(r1.sqrt() <= 1e-10 * s1);
            assert!(r2.sqrt() <= 1e-10 * s1);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = f64::NAN;
        assert!(matches!(svd(&a), Err(Error::Input(_))));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let sys = svd(&Matrix::zeros(3, 2)).unwrap();
        assert_eq!(sys.rank(), 0);
    }
}
