//! Spectral regularization `R_α y = φ_α(K*K) K* y`.
//!
//! A filter `φ_α(λ)` replaces `1/λ` on the spectrum of `K*K`; its residual
//! function is `r_α(λ) = 1 − λ φ_α(λ)`. This module provides the three
//! classical filters, the direct Tikhonov solver with its value functions,
//! the linear Landweber iteration and a qualification scan.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{axpy, fit_line, norm, solve_spd, spectral_norm_estimate, Matrix, SingularSystem};

/// Number of log-spaced `λ` samples used by [`qualification_scan`].
pub const QUALIFICATION_SAMPLES: usize = 2000;

/// A regularizing filter family `φ_α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    /// Truncated SVD: `φ_α(λ) = 1/λ` for `λ ≥ α`, zero otherwise.
    Tsvd,
    /// `φ_α(λ) = 1/(λ + α)`.
    Tikhonov,
    /// `m = 1/α` Landweber steps with relaxation `ω`:
    /// `φ_α(λ) = (1 − (1 − ωλ)^m)/λ`.
    Landweber { omega: f64 },
}

impl Filter {
    pub fn name(&self) -> &'static str {
        match self {
            Filter::Tsvd => "tsvd",
            Filter::Tikhonov => "tikhonov",
            Filter::Landweber { .. } => "landweber",
        }
    }

    /// Bound `C_φ` on `λ|φ_α(λ)|`; 1 for all built-ins (Landweber needs `ωλ ≤ 1`).
    pub fn c_phi(&self) -> f64 {
        1.0
    }

    /// Qualification `ν₀`; `None` means infinite.
    pub fn qualification(&self) -> Option<f64> {
        match self {
            Filter::Tikhonov => Some(2.0),
            Filter::Tsvd | Filter::Landweber { .. } => None,
        }
    }

    /// Checks `α > 0`, and for Landweber that `1/α` is a positive integer.
    pub fn validate_alpha(&self, alpha: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Parameter(format!("regularization parameter must be > 0, got {alpha}")));
        }
        if let Filter::Landweber { omega } = self {
            if !(*omega > 0.0) {
                return Err(Error::Parameter(format!("Landweber relaxation must be > 0, got {omega}")));
            }
            steps_from_alpha(alpha)?;
        }
        Ok(())
    }

    pub fn phi(&self, alpha: f64, lambda: f64) -> f64 {
        match *self {
            Filter::Tsvd => {
                if lambda >= alpha && lambda > 0.0 {
                    1.0 / lambda
                } else {
                    0.0
                }
            }
            Filter::Tikhonov => 1.0 / (lambda + alpha),
            Filter::Landweber { omega } => {
                let m = (1.0 / alpha).round();
                if lambda == 0.0 {
                    m * omega
                } else if omega * lambda >= 1.0 {
                    (1.0 - (1.0 - omega * lambda).powf(m)) / lambda
                } else {
                    -(m * (-omega * lambda).ln_1p()).exp_m1() / lambda
                }
            }
        }
    }

    /// `r_α(λ) = 1 − λ φ_α(λ)`
    pub fn residual(&self, alpha: f64, lambda: f64) -> f64 {
        match *self {
            Filter::Tsvd => {
                if lambda >= alpha && lambda > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Filter::Tikhonov => alpha / (lambda + alpha),
            Filter::Landweber { omega } => {
                let m = (1.0 / alpha).round();
                if omega * lambda < 1.0 {
                    (m * (-omega * lambda).ln_1p()).exp()
                } else {
                    (1.0 - omega * lambda).powf(m)
                }
            }
        }
    }

    /// Estimator weights `γ_k = φ_α(σ_k²) σ_k²`.
    pub fn gamma(&self, alpha: f64, sigma: &[f64]) -> Vec<f64> {
        sigma
            .iter()
            .map(|s| {
                let lambda = s * s;
                self.phi(alpha, lambda) * lambda
            })
            .collect()
    }
}

/// Landweber iteration count encoded by `α = 1/m`.
pub fn steps_from_alpha(alpha: f64) -> Result<usize> {
    let m = 1.0 / alpha;
    let rounded = m.round();
    if rounded < 1.0 || (m - rounded).abs() > 1e-9 * m.max(1.0) {
        return Err(Error::Parameter(format!(
            "Landweber needs alpha = 1/m for a positive integer m, got alpha = {alpha}"
        )));
    }
    Ok(rounded as usize)
}

/// `x_α = Σ φ_α(σ_k²) σ_k ⟨y, u_k⟩ v_k`
pub fn filter_apply(filter: &Filter, alpha: f64, sys: &SingularSystem, y: &[f64]) -> Result<Vec<f64>> {
    filter.validate_alpha(alpha)?;
    if y.len() != sys.rows() {
        return Err(Error::Shape(format!(
            "data has length {}, operator has {} rows",
            y.len(),
            sys.rows()
        )));
    }
    let coeffs: Vec<f64> = sys
        .u_coefficients(y)
        .iter()
        .zip(sys.sigma())
        .map(|(c, s)| filter.phi(alpha, s * s) * s * c)
        .collect();
    Ok(sys.synthesize_v(&coeffs))
}

/// Solves the Tikhonov normal equation `(AᵀA + αI) x = Aᵀ y`.
pub fn tikhonov_solve(a: &Matrix, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("Tikhonov parameter must be > 0, got {alpha}")));
    }
    if y.len() != a.rows() {
        return Err(Error::Shape(format!(
            "data has length {}, operator has {} rows",
            y.len(),
            a.rows()
        )));
    }
    let mut normal = a.gram();
    normal.add_diagonal(alpha);
    solve_spd(&normal, &a.tr_mul_vec(y))
}

/// Stopping rule for the linear Landweber iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LandweberStop {
    /// Run exactly this many steps.
    Iterations(usize),
    /// Stop at the first `N` with `‖A x_N − y‖ ≤ τδ`, or after `max_iter` steps.
    Discrepancy { delta: f64, tau: f64, max_iter: usize },
}

/// Result of [`landweber_run`].
#[derive(Debug, Clone)]
pub struct LandweberRun {
    pub x: Vec<f64>,
    /// Final iteration index `N`.
    pub iterations: usize,
    /// `‖A x_n − y‖` for `n = 0..=N`.
    pub residuals: Vec<f64>,
    /// `‖x_n − reference‖` for `n = 0..=N`, when a reference was supplied.
    pub errors: Option<Vec<f64>>,
    pub omega: f64,
    /// Whether the discrepancy bound was met (always false for fixed counts).
    pub discrepancy_reached: bool,
}

/// Default relaxation `0.9/σ₁²`.
pub fn default_omega(a: &Matrix) -> f64 {
    let s = spectral_norm_estimate(a);
    0.9 / (s * s)
}

/// Linear Landweber iteration `x_n = x_{n−1} + ω Aᵀ(y − A x_{n−1})` from `x₀ = 0`.
pub fn landweber_run(
    a: &Matrix,
    y: &[f64],
    omega: Option<f64>,
    stop: LandweberStop,
    reference: Option<&[f64]>,
) -> Result<LandweberRun> {
    if y.len() != a.rows() {
        return Err(Error::Shape(format!(
            "data has length {}, operator has {} rows",
            y.len(),
            a.rows()
        )));
    }
    if let Some(r) = reference {
        if r.len() != a.cols() {
            return Err(Error::Shape("reference solution length mismatch".into()));
        }
    }
    let s1 = spectral_norm_estimate(a);
    let omega = match omega {
        Some(w) => {
            if !(w > 0.0 && w * s1 * s1 < 1.0) {
                return Err(Error::Parameter(format!(
                    "Landweber relaxation must lie in (0, 1/σ₁²) = (0, {:e}), got {w}",
                    1.0 / (s1 * s1)
                )));
            }
            w
        }
        None => 0.9 / (s1 * s1),
    };
    let (max_iter, bound) = match stop {
        LandweberStop::Iterations(m) => (m, None),
        LandweberStop::Discrepancy { delta, tau, max_iter } => {
            if !(delta >= 0.0) || !(tau > 1.0) {
                return Err(Error::Parameter(format!(
                    "discrepancy stopping needs delta >= 0 and tau > 1, got delta = {delta}, tau = {tau}"
                )));
            }
            (max_iter, Some(tau * delta))
        }
    };

    let mut x = vec![0.0; a.cols()];
    let mut r: Vec<f64> = y.to_vec();
    let mut residuals = vec![norm(&r)];
    let mut errors = reference.map(|x_ref| vec![norm(x_ref)]);
    let mut reached = bound.is_some_and(|b| residuals[0] <= b);
    let mut n = 0;
    while n < max_iter && !reached {
        let g = a.tr_mul_vec(&r);
        axpy(omega, &g, &mut x);
        let ax = a.mul_vec(&x);
        for ((ri, yi), axi) in r.iter_mut().zip(y).zip(&ax) {
            *ri = yi - axi;
        }
        n += 1;
        let res = norm(&r);
        residuals.push(res);
        if let (Some(errs), Some(x_ref)) = (errors.as_mut(), reference) {
            errs.push(crate::linalg::distance(&x, x_ref));
        }
        if let Some(b) = bound {
            reached = res <= b;
        }
    }
    Ok(LandweberRun {
        x,
        iterations: n,
        residuals,
        errors,
        omega,
        discrepancy_reached: reached,
    })
}

/// Result of [`qualification_scan`].
#[derive(Debug, Clone)]
pub struct QualificationScan {
    /// Fitted exponent of `ω_ν(α) ≈ C α^slope`.
    pub slope: f64,
    /// `ω_ν(α) = sup_λ λ^{ν/2} |r_α(λ)|` per grid point.
    pub omega: Vec<f64>,
}

/// Log-log slope of `ω_ν(α) = sup_{λ ∈ (0, λ_max]} λ^{ν/2} |r_α(λ)|` over `alphas`.
///
/// The supremum is taken over [`QUALIFICATION_SAMPLES`] log-spaced samples
/// between `10⁻⁶ · min α` and `λ_max`.
pub fn qualification_scan(filter: &Filter, nu: f64, alphas: &[f64], lambda_max: f64) -> Result<QualificationScan> {
    if !(nu > 0.0) {
        return Err(Error::Parameter(format!("source order must be > 0, got {nu}")));
    }
    if alphas.len() < 2 {
        return Err(Error::Parameter("qualification scan needs at least two alphas".into()));
    }
    if !(lambda_max > 0.0) {
        return Err(Error::Parameter("lambda_max must be positive".into()));
    }
    for &a in alphas {
        filter.validate_alpha(a)?;
    }
    let alpha_min = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let lo = (alpha_min * 1e-6).min(lambda_max * 1e-6).ln();
    let hi = lambda_max.ln();
    let lambdas: Vec<f64> = (0..QUALIFICATION_SAMPLES)
        .map(|i| (lo + (hi - lo) * i as f64 / (QUALIFICATION_SAMPLES - 1) as f64).exp())
        .collect();
    let omega: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            lambdas
                .iter()
                .map(|&l| l.powf(nu / 2.0) * filter.residual(a, l).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let xs: Vec<f64> = alphas.iter().map(|a| a.ln()).collect();
    let ys: Vec<f64> = omega.iter().map(|w| w.ln()).collect();
    let (slope, _, _) = fit_line(&xs, &ys);
    Ok(QualificationScan { slope, omega })
}

/// Tikhonov value functions on a grid of `α`.
#[derive(Debug, Clone)]
pub struct ValueFunctions {
    pub alphas: Vec<f64>,
    /// `f(α) = ½‖A x_α − y‖²`
    pub f: Vec<f64>,
    /// `g(α) = ½‖x_α‖²`
    pub g: Vec<f64>,
    /// `j(α) = f(α) + α g(α)`
    pub j: Vec<f64>,
}

/// Evaluates `f`, `g`, `j` on a strictly increasing grid and checks that
/// `f` is nondecreasing and `g` nonincreasing.
pub fn value_functions(a: &Matrix, y_delta: &[f64], alphas: &[f64]) -> Result<ValueFunctions> {
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("value-function grid must be strictly increasing".into()));
    }
    let values: Vec<(f64, f64)> = alphas
        .par_iter()
        .map(|&alpha| {
            let x = tikhonov_solve(a, y_delta, alpha)?;
            let r = crate::linalg::sub(&a.mul_vec(&x), y_delta);
            Ok((0.5 * norm(&r).powi(2), 0.5 * norm(&x).powi(2)))
        })
        .collect::<Result<_>>()?;
    let f: Vec<f64> = values.iter().map(|v| v.0).collect();
    let g: Vec<f64> = values.iter().map(|v| v.1).collect();
    let j = alphas.iter().zip(&f).zip(&g).map(|((al, fv), gv)| fv + al * gv).collect();
    let slack = |v: f64| 1e-10 * v.abs() + 1e-300;
    if f.windows(2).any(|w| w[1] < w[0] - slack(w[0])) {
        return Err(Error::Internal("residual value function is not nondecreasing".into()));
    }
    if g.windows(2).any(|w| w[1] > w[0] + slack(w[0])) {
        return Err(Error::Internal("norm value function is not nonincreasing".into()));
    }
    Ok(ValueFunctions {
        alphas: alphas.to_vec(),
        f,
        g,
        j,
    })
}

impl ValueFunctions {
    /// Relative mismatch between the grid difference quotient of `j` and `g`
    /// at each interior node, skipping nodes where `g` is flat to 1e-12.
    pub fn derivative_mismatch(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for i in 1..self.alphas.len().saturating_sub(1) {
            let dg = (self.g[i + 1] - self.g[i - 1]).abs();
            if dg <= 1e-12 * self.g[i].abs() {
                continue;
            }
            let fd = (self.j[i + 1] - self.j[i - 1]) / (self.alphas[i + 1] - self.alphas[i - 1]);
            out.push((self.alphas[i], (fd - self.g[i]).abs() / self.g[i].abs()));
        }
        out
    }
}

/// Central difference `(j(α+ε) − j(α−ε))/2ε` next to `g(α)`.
pub fn value_derivative_check(a: &Matrix, y_delta: &[f64], alpha: f64, eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps < alpha) {
        return Err(Error::Parameter("need 0 < eps < alpha".into()));
    }
    let vf = value_functions(a, y_delta, &[alpha - eps, alpha, alpha + eps])?;
    Ok(((vf.j[2] - vf.j[0]) / (2.0 * eps), vf.g[1]))
}
