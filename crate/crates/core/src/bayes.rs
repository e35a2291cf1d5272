//! Gaussian linear Bayesian inversion: prior `N(0, σ²I)`, noise `N(0, δ²I)`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, svd, Matrix, RandomSource, SingularSystem};
use crate::spectral::tikhonov_solve;

fn check_levels(delta: f64, sigma_prior: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite() && sigma_prior > 0.0 && sigma_prior.is_finite()) {
        return Err(Error::Parameter(format!(
            "noise level and prior standard deviation must be positive (got {delta}, {sigma_prior})"
        )));
    }
    Ok(())
}

/// `x_MAP = (TᵀT + (δ²/σ²) I)⁻¹ Tᵀ y^δ`
pub fn map_estimate(t: &Matrix, y_delta: &[f64], delta: f64, sigma_prior: f64) -> Result<Vec<f64>> {
    check_levels(delta, sigma_prior)?;
    tikhonov_solve(t, y_delta, (delta / sigma_prior).powi(2))
}

/// Gaussian posterior `N(x_MAP, δ²(TᵀT + (δ²/σ²) I)⁻¹)`.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub delta: f64,
    pub sigma_prior: f64,
    sqrt: Matrix,
    system: SingularSystem,
    log_det: f64,
}

/// Builds the posterior from the SVD of `T`:
/// `C = δ² [V diag(1/(s_k² + α)) Vᵀ + α⁻¹ (I − VVᵀ)]` with `α = δ²/σ²`.
pub fn posterior(t: &Matrix, y_delta: &[f64], delta: f64, sigma_prior: f64) -> Result<GaussianPosterior> {
    check_levels(delta, sigma_prior)?;
    if y_delta.len() != t.rows() {
        return Err(Error::Shape("data length does not match the operator".into()));
    }
    let n = t.cols();
    let alpha = (delta / sigma_prior).powi(2);
    let d2 = delta * delta;
    let system = if t.max_abs() == 0.0 {
        SingularSystem::from_parts(t.rows(), n, Vec::new(), Vec::new(), Vec::new())?
    } else {
        svd(t)?
    };
    let weights: Vec<f64> = system.sigma().iter().map(|s| 1.0 / (s * s + alpha)).collect();
    let spectral = |f: &dyn Fn(f64) -> f64, rest: f64| {
        let mut m = Matrix::identity(n).scaled(rest);
        for (v, &w) in system.v_columns().iter().zip(&weights) {
            let c = f(w) - rest;
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += c * v[i] * v[j];
                }
            }
        }
        m
    };
    let covariance = spectral(&|w| d2 * w, d2 / alpha);
    let sqrt = spectral(&|w| delta * w.sqrt(), delta / alpha.sqrt());
    let log_det = weights.iter().map(|w| (d2 * w).ln()).sum::<f64>() + (n - system.rank()) as f64 * (d2 / alpha).ln();
    let rhs = t.tr_mul_vec(y_delta);
    let mean = covariance.mul_vec(&rhs).iter().map(|v| v / d2).collect();
    Ok(GaussianPosterior {
        mean,
        covariance,
        delta,
        sigma_prior,
        sqrt,
        system,
        log_det,
    })
}

impl GaussianPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal standard deviations.
    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.covariance[(i, i)].sqrt()).collect()
    }

    /// Symmetric square root `C^{1/2}`.
    pub fn sqrt_covariance(&self) -> &Matrix {
        &self.sqrt
    }

    /// `log det C`
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `mean + C^{1/2} ξ`
    pub fn sample(&self, src: &mut RandomSource) -> Vec<f64> {
        let xi = src.gaussian_vector(self.dim());
        let mut x = self.sqrt.mul_vec(&xi);
        for (xi, m) in x.iter_mut().zip(&self.mean) {
            *xi += m;
        }
        x
    }

    /// `(x − mean)ᵀ C⁻¹ (x − mean)`
    pub fn mahalanobis_squared(&self, x: &[f64]) -> f64 {
        let alpha = (self.delta / self.sigma_prior).powi(2);
        let d: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let coeffs = self.system.v_coefficients(&d);
        let inside: f64 = coeffs
            .iter()
            .zip(self.system.sigma())
            .map(|(c, s)| (s * s + alpha) * c * c)
            .sum();
        let outside = (dot(&d, &d) - dot(&coeffs, &coeffs)).max(0.0);
        (inside + alpha * outside) / (self.delta * self.delta)
    }

    /// `−log` of the posterior density at `x`.
    pub fn neg_log_density(&self, x: &[f64]) -> f64 {
        let n = self.dim() as f64;
        0.5 * self.mahalanobis_squared(x) + 0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det)
    }
}

/// Result of [`cm_monte_carlo`].
#[derive(Debug, Clone)]
pub struct CmEstimate {
    pub estimate: Vec<f64>,
    /// `Σ w_i / max w_i`
    pub effective_sample_size: f64,
    pub weight_sum: f64,
    pub max_weight: f64,
}

/// Conditional mean by importance sampling from the prior with weights
/// `w_i = exp(−‖T x_i − y^δ‖² / 2δ²)`.
pub fn cm_monte_carlo(
    t: &Matrix,
    y_delta: &[f64],
    delta: f64,
    sigma_prior: f64,
    n_samples: usize,
    src: &mut RandomSource,
) -> Result<CmEstimate> {
    check_levels(delta, sigma_prior)?;
    if y_delta.len() != t.rows() {
        return Err(Error::Shape("data length does not match the operator".into()));
    }
    if n_samples < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n_samples}")));
    }
    let n = t.cols();
    let mut acc = vec![0.0; n];
    let mut weight_sum = 0.0;
    let mut max_weight = 0.0_f64;
    for _ in 0..n_samples {
        let x: Vec<f64> = src.gaussian_vector(n).iter().map(|v| v * sigma_prior).collect();
        let r = norm(&crate::linalg::sub(&t.mul_vec(&x), y_delta));
        let w = (-(r * r) / (2.0 * delta * delta)).exp();
        if w > 0.0 {
            for (a, xi) in acc.iter_mut().zip(&x) {
                *a += w * xi;
            }
            weight_sum += w;
            max_weight = max_weight.max(w);
        }
    }
    if !(weight_sum > 0.0) {
        return Err(Error::Degeneracy(format!(
            "all {n_samples} importance weights underflowed; increase delta or the sample count"
        )));
    }
    Ok(CmEstimate {
        estimate: acc.iter().map(|a| a / weight_sum).collect(),
        effective_sample_size: weight_sum / max_weight,
        weight_sum,
        max_weight,
    })
}

/// Highest-posterior-density ellipsoid `{x : (x−m)ᵀC⁻¹(x−m) ≤ r²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpdSet {
    /// Mahalanobis radius `r`.
    pub radius: f64,
    /// `−log` density on the boundary.
    pub eta_threshold: f64,
}

impl HpdSet {
    pub fn contains(&self, post: &GaussianPosterior, x: &[f64]) -> bool {
        post.mahalanobis_squared(x) <= self.radius * self.radius
    }
}

/// HPD credible set of mass `1 − α`.
pub fn hpd_credible_set(post: &GaussianPosterior, alpha: f64) -> Result<HpdSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("credible level alpha must lie in (0, 1), got {alpha}")));
    }
    let n = post.dim();
    let r2 = chi_square_quantile(n as f64, 1.0 - alpha)?;
    let eta_threshold = 0.5 * r2 + 0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + post.log_det);
    Ok(HpdSet {
        radius: r2.sqrt(),
        eta_threshold,
    })
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma `P(s, x)`: series for `x < s + 1`,
/// continued fraction otherwise.
pub fn regularized_gamma_p(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = s * x.ln() - x - ln_gamma(s);
    if x < s + 1.0 {
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut k = s;
        for _ in 0..10_000 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefix).exp().min(1.0)
    } else {
        // Modified Lentz for Q(s, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (1.0 - (h.ln() + log_prefix).exp()).max(0.0)
    }
}

/// Chi-square CDF with `k` degrees of freedom.
pub fn chi_square_cdf(k: f64, x: f64) -> f64 {
    regularized_gamma_p(0.5 * k, 0.5 * x)
}

/// Chi-square quantile by bisection on the CDF.
pub fn chi_square_quantile(k: f64, p: f64) -> Result<f64> {
    if !(k > 0.0) || !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("chi-square quantile needs k > 0 and 0 < p < 1 (got {k}, {p})")));
    }
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while chi_square_cdf(k, hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if chi_square_cdf(k, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
