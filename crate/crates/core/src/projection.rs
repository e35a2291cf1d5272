//! Regularization by projection: least-squares projection onto `X_n`,
//! dual least-squares projection onto `Y_n`, and the projected singular
//! value `μ_n`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, spectral_norm_estimate, svd, Matrix, RandomSource, SingularSystem};
use crate::pinv::min_norm_solution;

/// Tolerance for a dual subspace to count as lying in `R(A)`.
pub const RANGE_TOLERANCE: f64 = 1e-8;

/// A subspace given by an orthonormal basis.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<f64>>,
}

impl Subspace {
    /// Orthonormalizes `vectors` by modified Gram–Schmidt with one
    /// reorthogonalization pass. Linearly dependent input is rejected.
    pub fn new(ambient: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != ambient {
                return Err(Error::Shape(format!(
                    "basis vector has length {}, ambient dimension is {ambient}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Input("basis vectors must be finite".into()));
            }
            let original = norm(v);
            let mut w = v.clone();
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let nw = norm(&w);
            if !(nw > 1e-10 * original) {
                return Err(Error::Subspace("basis vectors are linearly dependent".into()));
            }
            w.iter_mut().for_each(|x| *x /= nw);
            basis.push(w);
        }
        Ok(Self { ambient, basis })
    }

    /// The whole space `R^ambient`.
    pub fn full(ambient: usize) -> Self {
        let basis = (0..ambient)
            .map(|i| {
                let mut e = vec![0.0; ambient];
                e[i] = 1.0;
                e
            })
            .collect();
        Self { ambient, basis }
    }

    /// Span of `dim` Gaussian random vectors.
    pub fn random(ambient: usize, dim: usize, src: &mut RandomSource) -> Result<Self> {
        if dim > ambient {
            return Err(Error::Parameter(format!("cannot draw a {dim}-dimensional subspace of R^{ambient}")));
        }
        let vectors: Vec<Vec<f64>> = (0..dim).map(|_| src.gaussian_vector(ambient)).collect();
        Self::new(ambient, &vectors)
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Basis as the columns of an `ambient × dim` matrix.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_columns(self.ambient, &self.basis)
    }

    /// Coordinates `Bᵀ x`.
    pub fn coordinates(&self, x: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|q| dot(q, x)).collect()
    }

    /// `B c`
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient];
        for (q, &ci) in self.basis.iter().zip(c) {
            axpy(ci, q, &mut out);
        }
        out
    }

    /// Orthogonal projection `P x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.combine(&self.coordinates(x))
    }

    /// Largest deviation of `BᵀB` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}

/// Result of [`lsq_projection`].
#[derive(Debug, Clone)]
pub struct LsqProjection {
    pub x: Vec<f64>,
    /// Boundedness proxy `‖(B†)ᵀ c‖` with `B = A·basis` and `c` the
    /// coordinates of `x`.
    pub proxy: f64,
}

/// Least-squares projection: minimum-norm minimizer of `‖A x − y‖` over `X_n`.
pub fn lsq_projection(a: &Matrix, y: &[f64], xn: &Subspace) -> Result<LsqProjection> {
    if xn.ambient() != a.cols() || y.len() != a.rows() {
        return Err(Error::Shape("subspace or data does not fit the operator".into()));
    }
    if xn.dim() == 0 {
        return Ok(LsqProjection {
            x: vec![0.0; a.cols()],
            proxy: 0.0,
        });
    }
    let b = a.matmul(&xn.matrix());
    let sys = svd(&b)?;
    let c = crate::pinv::pseudoinverse_apply(&sys, y);
    let proxy = sys
        .v_coefficients(&c)
        .iter()
        .zip(sys.sigma())
        .map(|(ci, s)| (ci / s).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LsqProjection {
        x: xn.combine(&c),
        proxy,
    })
}

/// Alarm threshold `2 ‖(I − P_n) Aᵀ‖ ‖w‖` for the least-squares projection
/// error under a source condition `x† = Aᵀ w`.
pub fn lsq_error_alarm(a: &Matrix, xn: &Subspace, w_norm: f64) -> f64 {
    let columns: Vec<Vec<f64>> = (0..a.rows())
        .map(|i| {
            let r = a.row(i);
            let p = xn.project(r);
            r.iter().zip(&p).map(|(u, v)| u - v).collect()
        })
        .collect();
    let m = Matrix::from_columns(a.cols(), &columns);
    2.0 * spectral_norm_estimate(&m) * w_norm
}

/// Largest distance of a basis vector of `yn` from `R(A)`.
pub fn range_defect(sys: &SingularSystem, yn: &Subspace) -> f64 {
    yn.basis()
        .iter()
        .map(|q| {
            let p = sys.synthesize_u(&sys.u_coefficients(q));
            q.iter().zip(&p).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

/// Dual least-squares projection: minimum-norm solution of `Q_n A x = Q_n y`.
pub fn dual_lsq_projection(a: &Matrix, y: &[f64], yn: &Subspace) -> Result<Vec<f64>> {
    if yn.ambient() != a.rows() || y.len() != a.rows() {
        return Err(Error::Shape("subspace or data does not fit the operator".into()));
    }
    let sys = svd(a)?;
    let defect = range_defect(&sys, yn);
    if defect > RANGE_TOLERANCE {
        return Err(Error::Subspace(format!(
            "dual subspace leaves the range of the operator (distance {defect:e})"
        )));
    }
    if yn.dim() == 0 {
        return Ok(vec![0.0; a.cols()]);
    }
    let projected = yn.matrix().transpose().matmul(a);
    min_norm_solution(&projected, &yn.coordinates(y))
}

/// `μ_n`: smallest singular value of `Q_n A` for `n = dim Y_n`.
pub fn smallest_projected_singular(a: &Matrix, yn: &Subspace) -> Result<f64> {
    if yn.ambient() != a.rows() {
        return Err(Error::Shape("subspace does not fit the operator".into()));
    }
    let n = yn.dim();
    if n == 0 {
        return Err(Error::Parameter("projected singular value needs dim >= 1".into()));
    }
    let sys = svd(&yn.matrix().transpose().matmul(a))?;
    Ok(if sys.rank() < n { 0.0 } else { sys.sigma()[n - 1] })
}

/// Result of [`apriori_dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimensionChoice {
    /// Number of modes; 0 when `δ ≥ μ₁`.
    pub n: usize,
    /// All supplied `μ_n` exceeded `δ`.
    pub capped: bool,
}

impl DimensionChoice {
    pub fn no_reliable_mode(&self) -> bool {
        self.n == 0
    }
}

/// Largest `n` with `μ_n > δ` for a nonincreasing sequence `μ_1, μ_2, …`.
pub fn apriori_dimension(delta: f64, mu: &[f64]) -> Result<DimensionChoice> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("noise level must be > 0, got {delta}")));
    }
    if mu.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Parameter("projected singular values must be nonincreasing".into()));
    }
    let n = mu.iter().take_while(|&&m| m > delta).count();
    Ok(DimensionChoice {
        n,
        capped: n == mu.len(),
    })
}
