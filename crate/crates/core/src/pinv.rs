//! Moore–Penrose inverse, minimum-norm solutions, Picard diagnostics and
//! spectral operator functions `φ(K*K)`.

use crate::error::{Error, Result};
use crate::linalg::{norm, svd, Matrix, SingularSystem};

/// `x† = Σ σ_k⁻¹ ⟨y, u_k⟩ v_k` over the retained singular triples.
pub fn pseudoinverse_apply(sys: &SingularSystem, y: &[f64]) -> Vec<f64> {
    let coeffs: Vec<f64> = sys
        .u_coefficients(y)
        .iter()
        .zip(sys.sigma())
        .map(|(c, s)| c / s)
        .collect();
    sys.synthesize_v(&coeffs)
}

/// Minimum-norm least-squares solution of `A x = y`.
pub fn min_norm_solution(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != a.rows() {
        return Err(Error::Shape(format!(
            "data has length {}, operator has {} rows",
            y.len(),
            a.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("data must be finite".into()));
    }
    Ok(pseudoinverse_apply(&svd(a)?, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

/// Partial sums of the Picard series `Σ σ_k⁻² ⟨y, u_k⟩²`.
#[derive(Debug, Clone)]
pub struct PicardReport {
    pub partial_sums: Vec<f64>,
    /// `|⟨y, u_k⟩|`
    pub coefficients: Vec<f64>,
    pub verdict: PicardVerdict,
}

/// Finite-dimensional Picard diagnostic.
///
/// The verdict is a heuristic: the geometric mean of the positive increments
/// over the last quarter of the modes is compared with the one over the
/// central quarter; a ratio above 10 reports divergence, below 0.1
/// convergence. Quarters without positive increments count as zero.
pub fn picard_diagnostic(sys: &SingularSystem, y: &[f64]) -> PicardReport {
    let coefficients: Vec<f64> = sys.u_coefficients(y).iter().map(|c| c.abs()).collect();
    let increments: Vec<f64> = coefficients
        .iter()
        .zip(sys.sigma())
        .map(|(c, s)| (c / s).powi(2))
        .collect();
    let mut acc = 0.0;
    let partial_sums = increments
        .iter()
        .map(|d| {
            acc += d;
            acc
        })
        .collect();

    let r = increments.len();
    let verdict = if increments.iter().all(|&d| d == 0.0) {
        PicardVerdict::Converging
    } else if r < 4 {
        PicardVerdict::Inconclusive
    } else {
        let middle = positive_geometric_mean(&increments[3 * r / 8..(5 * r / 8).max(3 * r / 8 + 1)]);
        let last = positive_geometric_mean(&increments[3 * r / 4..]);
        match (middle, last) {
            (0.0, l) if l > 0.0 => PicardVerdict::Diverging,
            (_, 0.0) => PicardVerdict::Converging,
            (m, l) if l / m > 10.0 => PicardVerdict::Diverging,
            (m, l) if l / m < 0.1 => PicardVerdict::Converging,
            _ => PicardVerdict::Inconclusive,
        }
    };
    PicardReport {
        partial_sums,
        coefficients,
        verdict,
    }
}

fn positive_geometric_mean(values: &[f64]) -> f64 {
    let logs: Vec<f64> = values.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).collect();
    if logs.is_empty() {
        0.0
    } else {
        (logs.iter().sum::<f64>() / logs.len() as f64).exp()
    }
}

/// Spectral calculus `φ(K*K) x = Σ φ(σ_k²) ⟨x, v_k⟩ v_k + φ(0) P_N x`,
/// where `null_part = P_N x` is supplied by the caller.
pub fn operator_function(
    sys: &SingularSystem,
    phi: impl Fn(f64) -> f64,
    x: &[f64],
    null_part: &[f64],
) -> Vec<f64> {
    assert_eq!(null_part.len(), sys.cols(), "null-space part length mismatch");
    let coeffs: Vec<f64> = sys
        .v_coefficients(x)
        .iter()
        .zip(sys.sigma())
        .map(|(c, s)| phi(s * s) * c)
        .collect();
    let mut out = sys.synthesize_v(&coeffs);
    let phi0 = phi(0.0);
    if phi0 != 0.0 {
        crate::linalg::axpy(phi0, null_part, &mut out);
    }
    out
}

/// `|K|^r x = (K*K)^{r/2} x` restricted to `N(K)^⊥` (for `r > 0`).
pub fn abs_power(sys: &SingularSystem, r: f64, x: &[f64]) -> Vec<f64> {
    let zero = vec![0.0; sys.cols()];
    operator_function(sys, |t| if t > 0.0 { t.powf(r / 2.0) } else { 0.0 }, x, &zero)
}

/// Both sides of the interpolation inequality
/// `‖|K|^s x‖ ≤ ‖|K|^r x‖^{s/r} ‖x‖^{1−s/r}`.
pub fn interpolation_check(sys: &SingularSystem, x: &[f64], r: f64, s: f64) -> Result<(f64, f64)> {
    if !(r > s && s >= 0.0) {
        return Err(Error::Parameter(format!(
            "interpolation exponents need r > s >= 0, got r = {r}, s = {s}"
        )));
    }
    // For s = 0 the left side is ‖P_{N⊥} x‖, which the spectral sum gives directly.
    let coeffs = sys.v_coefficients(x);
    let weighted = |p: f64| -> f64 {
        coeffs
            .iter()
            .zip(sys.sigma())
            .map(|(c, sg)| (sg.powf(p) * c).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let lhs = weighted(s);
    let theta = s / r;
    let rhs = weighted(r).powf(theta) * norm(x).powf(1.0 - theta);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{distance, dot, RandomSource};
    use crate::problems::make_integration_operator;

    fn random_matrix(rows: usize, cols: usize, src: &mut RandomSource) -> Matrix {
        Matrix::from_row_major(rows, cols, src.gaussian_vector(rows * cols)).unwrap()
    }

    #[test]
    fn diagonal_with_dropped_mode() {
        let a = Matrix::from_diagonal(&[2.0, 0.0]);
        let sys = svd(&a).unwrap();
        assert_eq!(sys.rank(), 1);
        let x = pseudoinverse_apply(&sys, &[1.0, 1.0]);
        assert!(distance(&x, &[0.5, 0.0]) < 1e-15);
    }

    #[test]
    fn data_orthogonal_to_range_maps_to_zero() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let x = min_norm_solution(&a, &[0.0, 0.0, 5.0]).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn least_squares_drops_unreachable_component() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let x = min_norm_solution(&a, &[3.0, 7.0]).unwrap();
        assert!(distance(&x, &[3.0, 0.0]) < 1e-15);
    }

    #[test]
    fn bijective_case_recovers_solution() {
        let mut src = RandomSource::new(4);
        let a = random_matrix(6, 6, &mut src);
        let x0 = src.gaussian_vector(6);
        let x = min_norm_solution(&a, &a.mul_vec(&x0)).unwrap();
        assert!(distance(&x, &x0) <= 1e-10 * (1.0 + norm(&x0)));
    }

    #[test]
    fn moore_penrose_equations_on_random_4x3() {
        let mut src = RandomSource::new(8);
        let a = random_matrix(4, 3, &mut src);
        let sys = svd(&a).unwrap();
        let x = src.gaussian_vector(3);
        let y = src.gaussian_vector(4);
        let ax = a.mul_vec(&x);
        // A X A = A
        assert!(distance(&a.mul_vec(&pseudoinverse_apply(&sys, &ax)), &ax) <= 1e-10 * norm(&ax));
        // X A X = X
        let xy = pseudoinverse_apply(&sys, &y);
        let xaxy = pseudoinverse_apply(&sys, &a.mul_vec(&xy));
        assert!(distance(&xaxy, &xy) <= 1e-10 * norm(&xy));
        // X A is the orthogonal projector onto N(A)^⊥ = R^3 here.
        assert!(distance(&pseudoinverse_apply(&sys, &ax), &x) <= 1e-10 * norm(&x));
        // A X is the orthogonal projector onto R(A).
        let ayx = a.mul_vec(&xy);
        let proj = sys.synthesize_u(&sys.u_coefficients(&y));
        assert!(distance(&ayx, &proj) <= 1e-10 * norm(&y));
    }

    #[test]
    fn min_norm_is_projection_onto_range() {
        let mut src = RandomSource::new(12);
        let a = random_matrix(7, 4, &mut src);
        let y = src.gaussian_vector(7);
        let sys = svd(&a).unwrap();
        let x = min_norm_solution(&a, &y).unwrap();
        let proj = sys.synthesize_u(&sys.u_coefficients(&y));
        assert!(distance(&a.mul_vec(&x), &proj) <= 1e-10 * norm(&y));
        // normal equation
        let lhs = a.tr_mul_vec(&a.mul_vec(&x));
        let rhs = a.tr_mul_vec(&y);
        assert!(distance(&lhs, &rhs) <= 1e-10 * norm(&rhs));
    }

    #[test]
    fn picard_smooth_data_converges() {
        let p = make_integration_operator(64).unwrap();
        let sys = p.system();
        let x: Vec<f64> = p.sample(|t| t * (1.0 - t));
        let report = picard_diagnostic(sys, &p.apply(&x));
        assert_eq!(report.verdict, PicardVerdict::Converging);
        assert!(report.partial_sums.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn picard_last_mode_diverges() {
        let p = make_integration_operator(32).unwrap();
        let sys = p.system();
        let y = sys.u(sys.rank() - 1).to_vec();
        let report = picard_diagnostic(sys, &y);
        assert_eq!(report.verdict, PicardVerdict::Diverging);
        let last = *report.partial_sums.last().unwrap();
        let s = sys.sigma()[sys.rank() - 1];
        assert!((last - 1.0 / (s * s)).abs() <= 1e-8 * last);
    }

    #[test]
    fn picard_zero_data() {
        let p = make_integration_operator(16).unwrap();
        let report = picard_diagnostic(p.system(), &[0.0; 16]);
        assert!(report.partial_sums.iter().all(|&v| v == 0.0));
        assert_eq!(report.verdict, PicardVerdict::Converging);
    }

    #[test]
    fn operator_function_examples() {
        let mut src = RandomSource::new(21);
        let a = random_matrix(6, 4, &mut src);
        let sys = svd(&a).unwrap();
        let x = src.gaussian_vector(4);
        let zero = vec![0.0; 4];
        let id = operator_function(&sys, |_| 1.0, &x, &zero);
        assert!(distance(&id, &x) <= 1e-10 * norm(&x));
        let ata = operator_function(&sys, |t| t, &x, &zero);
        let direct = a.tr_mul_vec(&a.mul_vec(&x));
        assert!(distance(&ata, &direct) <= 1e-10 * norm(&direct));
        let abs = operator_function(&sys, f64::sqrt, &x, &zero);
        assert!((norm(&abs) - norm(&a.mul_vec(&x))).abs() <= 1e-10 * norm(&x));
    }

    #[test]
    fn abs_powers_compose() {
        let p = make_integration_operator(24).unwrap();
        let sys = p.system();
        let x = RandomSource::new(5).gaussian_vector(24);
        let lhs = abs_power(sys, 1.7, &x);
        let rhs = abs_power(sys, 0.4, &abs_power(sys, 1.3, &x));
        assert!(distance(&lhs, &rhs) <= 1e-10 * norm(&lhs));
    }

    #[test]
    fn interpolation_examples() {
        let p = make_integration_operator(20).unwrap();
        let sys = p.system();
        let (lhs, rhs) = interpolation_check(sys, sys.v(0), 2.0, 0.7).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        assert!((lhs - sys.sigma()[0].powf(0.7)).abs() < 1e-12);
        let x = RandomSource::new(9).gaussian_vector(20);
        let (l0, r0) = interpolation_check(sys, &x, 1.0, 0.0).unwrap();
        assert!(l0 <= r0 + 1e-10);
        assert!((r0 - norm(&x)).abs() < 1e-12);
        let (l, r) = interpolation_check(sys, &x, 2.0, 1.0).unwrap();
        assert!(l <= r + 1e-10);
        assert!(interpolation_check(sys, &x, 1.0, 1.0).is_err());
        assert!(dot(&x, &x) > 0.0);
    }
}
