//! Parameter-choice rules: a priori, discrepancy principle and the heuristic
//! rules quasi-optimality, Hanke–Raus and L-curve.
//!
//! Grid rules tie-break toward the larger `α`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{distance, norm, sub, Matrix};
use crate::spectral::tikhonov_solve;

/// Selected parameter with the scan that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceOutcome {
    pub alpha: f64,
    /// Grid index of `alpha` (0-based).
    pub index: usize,
    pub rule: &'static str,
    /// `‖A x_α − y^δ‖` at the selection, when known.
    pub residual: Option<f64>,
    /// Rule-specific scan values, aligned with the grid (or with grid gaps for
    /// quasi-optimality).
    pub scan: Vec<f64>,
    /// Set when the discrepancy principle accepted the first grid point.
    pub boundary: bool,
}

/// `α_n = α₀ qⁿ`, `n = 0..count`.
pub fn geometric_grid(alpha0: f64, q: f64, count: usize) -> Result<Vec<f64>> {
    if !(alpha0 > 0.0) || !(q > 0.0 && q < 1.0) || count == 0 {
        return Err(Error::Parameter(format!(
            "geometric grid needs alpha0 > 0, 0 < q < 1 and count > 0 (got {alpha0}, {q}, {count})"
        )));
    }
    Ok((0..count).map(|n| alpha0 * q.powi(n as i32)).collect())
}

/// `α = c (δ/ρ)^{2/(ν+1)}`
pub fn apriori_alpha(delta: f64, rho: f64, nu: f64, c: f64) -> Result<f64> {
    if !(delta > 0.0 && rho > 0.0 && nu > 0.0 && c > 0.0) {
        return Err(Error::Parameter(format!(
            "a priori rule needs positive delta, rho, nu, c (got {delta}, {rho}, {nu}, {c})"
        )));
    }
    Ok(c * (delta / rho).powf(2.0 / (nu + 1.0)))
}

fn check_decreasing(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::Parameter("empty parameter grid".into()));
    }
    if alphas.iter().any(|a| !(*a > 0.0)) || alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("parameter grid must be positive and strictly decreasing".into()));
    }
    Ok(())
}

/// Discrepancy principle on a decreasing grid: the first `α` with
/// `‖A x_α − y^δ‖ ≤ τδ`. Solutions are computed lazily in grid order.
pub fn morozov<F>(a: &Matrix, y_delta: &[f64], delta: f64, tau: f64, alphas: &[f64], solver: F) -> Result<ChoiceOutcome>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    check_decreasing(alphas)?;
    check_tau(delta, tau)?;
    let bound = tau * delta;
    let mut scan = Vec::with_capacity(alphas.len());
    for (i, &alpha) in alphas.iter().enumerate() {
        let x = solver(alpha)?;
        let res = norm(&sub(&a.mul_vec(&x), y_delta));
        scan.push(res);
        if res <= bound {
            return Ok(ChoiceOutcome {
                alpha,
                index: i,
                rule: "morozov",
                residual: Some(res),
                scan,
                boundary: i == 0,
            });
        }
    }
    Err(Error::Exhausted {
        residual: *scan.last().unwrap(),
        bound,
    })
}

fn check_tau(delta: f64, tau: f64) -> Result<()> {
    if !(delta >= 0.0) || !(tau > 1.0) {
        return Err(Error::Parameter(format!(
            "discrepancy principle needs delta >= 0 and tau > 1 (got {delta}, {tau})"
        )));
    }
    Ok(())
}

/// Discrepancy principle from precomputed residuals on a decreasing grid.
pub fn morozov_from_residuals(alphas: &[f64], residuals: &[f64], delta: f64, tau: f64) -> Result<ChoiceOutcome> {
    check_decreasing(alphas)?;
    check_tau(delta, tau)?;
    check_len(alphas, residuals)?;
    let bound = tau * delta;
    match residuals.iter().position(|&r| r <= bound) {
        Some(i) => Ok(ChoiceOutcome {
            alpha: alphas[i],
            index: i,
            rule: "morozov",
            residual: Some(residuals[i]),
            scan: residuals.to_vec(),
            boundary: i == 0,
        }),
        None => Err(Error::Exhausted {
            residual: *residuals.last().unwrap(),
            bound,
        }),
    }
}

/// Tikhonov with the discrepancy principle. The full residual scan is
/// computed (in parallel) and checked to be monotone in `α` first.
pub fn morozov_tikhonov(a: &Matrix, y_delta: &[f64], delta: f64, tau: f64, alphas: &[f64]) -> Result<ChoiceOutcome> {
    check_decreasing(alphas)?;
    let residuals = tikhonov_scan(a, y_delta, alphas)?.residuals;
    for w in residuals.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-10) + 1e-300 {
            return Err(Error::Internal(format!(
                "Tikhonov residual increased as alpha decreased ({} -> {})",
                w[0], w[1]
            )));
        }
    }
    morozov_from_residuals(alphas, &residuals, delta, tau)
}

/// Tikhonov solutions over a grid with their residual and solution norms.
#[derive(Debug, Clone)]
pub struct TikhonovScan {
    pub alphas: Vec<f64>,
    pub solutions: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub norms: Vec<f64>,
}

pub fn tikhonov_scan(a: &Matrix, y_delta: &[f64], alphas: &[f64]) -> Result<TikhonovScan> {
    let solutions: Vec<Vec<f64>> = alphas
        .par_iter()
        .map(|&alpha| tikhonov_solve(a, y_delta, alpha))
        .collect::<Result<_>>()?;
    let residuals = solutions.iter().map(|x| norm(&sub(&a.mul_vec(x), y_delta))).collect();
    let norms = solutions.iter().map(|x| norm(x)).collect();
    Ok(TikhonovScan {
        alphas: alphas.to_vec(),
        solutions,
        residuals,
        norms,
    })
}

fn check_len(alphas: &[f64], values: &[f64]) -> Result<()> {
    if alphas.len() != values.len() {
        return Err(Error::Shape(format!(
            "grid has {} points but {} values were supplied",
            alphas.len(),
            values.len()
        )));
    }
    Ok(())
}

/// First index of the minimum; with the grid ordered by decreasing `α` this
/// is the tie-break toward larger `α`.
fn argmin_largest_alpha(alphas: &[f64], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let better = values[i] < values[best] || (values[i] == values[best] && alphas[i] > alphas[best]);
        if better {
            best = i;
        }
    }
    best
}

/// Picks `α_n` minimizing `‖x_{α_{n+1}} − x_{α_n}‖`.
pub fn quasi_optimality(alphas: &[f64], solutions: &[Vec<f64>]) -> Result<ChoiceOutcome> {
    if alphas.len() < 2 || solutions.len() != alphas.len() {
        return Err(Error::Parameter(
            "quasi-optimality needs at least two grid points with one solution each".into(),
        ));
    }
    let gaps: Vec<f64> = solutions.windows(2).map(|w| distance(&w[1], &w[0])).collect();
    let i = argmin_largest_alpha(&alphas[..gaps.len()], &gaps);
    Ok(ChoiceOutcome {
        alpha: alphas[i],
        index: i,
        rule: "quasi_optimality",
        residual: None,
        scan: gaps,
        boundary: false,
    })
}

/// Minimizes `Ψ(α) = ‖A x_α − y^δ‖/√α` over the grid.
pub fn hanke_raus(alphas: &[f64], residuals: &[f64]) -> Result<ChoiceOutcome> {
    if alphas.is_empty() {
        return Err(Error::Parameter("empty parameter grid".into()));
    }
    check_len(alphas, residuals)?;
    let psi: Vec<f64> = alphas.iter().zip(residuals).map(|(a, r)| r / a.sqrt()).collect();
    let i = argmin_largest_alpha(alphas, &psi);
    Ok(ChoiceOutcome {
        alpha: alphas[i],
        index: i,
        rule: "hanke_raus",
        residual: Some(residuals[i]),
        scan: psi,
        boundary: false,
    })
}

/// Minimizes `‖x_α‖ · ‖A x_α − y^δ‖` over the grid.
pub fn l_curve(alphas: &[f64], residuals: &[f64], solution_norms: &[f64]) -> Result<ChoiceOutcome> {
    if alphas.is_empty() {
        return Err(Error::Parameter("empty parameter grid".into()));
    }
    check_len(alphas, residuals)?;
    check_len(alphas, solution_norms)?;
    let product: Vec<f64> = residuals.iter().zip(solution_norms).map(|(r, x)| r * x).collect();
    let i = argmin_largest_alpha(alphas, &product);
    Ok(ChoiceOutcome {
        alpha: alphas[i],
        index: i,
        rule: "l_curve",
        residual: Some(residuals[i]),
        scan: product,
        boundary: false,
    })
}
