//! Sequence-space model `x_n^δ = x_n + (δ/σ_n) ξ_n` with linear estimators,
//! their risk, the Pinsker minimax estimator and minimax TSVD cutoffs.

use crate::error::{Error, Result};
use crate::linalg::{RandomSource, SingularSystem};
use crate::spectral::Filter;

/// Coefficients of `x†` in the right singular basis, with noise level `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModel {
    sigma: Vec<f64>,
    x: Vec<f64>,
    delta: f64,
}

impl SequenceModel {
    pub fn new(sigma: Vec<f64>, x: Vec<f64>, delta: f64) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::Size("sequence model needs at least one mode".into()));
        }
        if sigma.len() != x.len() {
            return Err(Error::Shape(format!(
                "{} singular values but {} coefficients",
                sigma.len(),
                x.len()
            )));
        }
        if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("singular values must be positive and coefficients finite".into()));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("noise level must be >= 0, got {delta}")));
        }
        Ok(Self { sigma, x, delta })
    }

    /// Model on the retained modes of a discrete operator.
    pub fn from_system(sys: &SingularSystem, x_dag: &[f64], delta: f64) -> Result<Self> {
        if x_dag.len() != sys.cols() {
            return Err(Error::Shape("solution length does not match the operator".into()));
        }
        Self::new(sys.sigma().to_vec(), sys.v_coefficients(x_dag), delta)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.x
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.sigma.clone(), self.x.clone(), delta)
    }

    pub fn with_coefficients(&self, x: Vec<f64>) -> Result<Self> {
        Self::new(self.sigma.clone(), x, self.delta)
    }
}

/// Mode weights `γ_n ≥ 0` of `x_γ^δ = Σ γ_n x_n^δ v_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimator {
    gamma: Vec<f64>,
}

impl LinearEstimator {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Input("estimator weights must be finite and nonnegative".into()));
        }
        Ok(Self { gamma })
    }

    /// `γ_n = φ_α(σ_n²) σ_n²`
    pub fn from_filter(filter: &Filter, alpha: f64, sigma: &[f64]) -> Result<Self> {
        filter.validate_alpha(alpha)?;
        Self::new(filter.gamma(alpha, sigma))
    }

    /// Keeps the first `cutoff` of `len` modes.
    pub fn cutoff(cutoff: usize, len: usize) -> Self {
        Self {
            gamma: (0..len).map(|n| if n < cutoff { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        self.gamma.iter().zip(data).map(|(g, d)| g * d).collect()
    }
}

/// `x_n^δ = x_n + (δ/σ_n) ξ_n`
pub fn simulate_sequence(model: &SequenceModel, src: &mut RandomSource) -> Vec<f64> {
    model
        .x
        .iter()
        .zip(&model.sigma)
        .map(|(x, s)| x + model.delta / s * src.standard_normal())
        .collect()
}

fn check_lengths(gamma: &LinearEstimator, model: &SequenceModel) -> Result<()> {
    if gamma.gamma.len() != model.len() {
        return Err(Error::Shape(format!(
            "estimator has {} weights, model has {} modes",
            gamma.gamma.len(),
            model.len()
        )));
    }
    Ok(())
}

/// Squared bias `Σ (1−γ_n)² x_n²`.
pub fn bias_squared(gamma: &LinearEstimator, model: &SequenceModel) -> Result<f64> {
    check_lengths(gamma, model)?;
    Ok(gamma
        .gamma
        .iter()
        .zip(&model.x)
        .map(|(g, x)| (1.0 - g).powi(2) * x * x)
        .sum())
}

/// Variance `δ² Σ γ_n²/σ_n²`.
pub fn variance(gamma: &LinearEstimator, model: &SequenceModel) -> Result<f64> {
    check_lengths(gamma, model)?;
    let d2 = model.delta * model.delta;
    Ok(gamma
        .gamma
        .iter()
        .zip(&model.sigma)
        .map(|(g, s)| d2 * g * g / (s * s))
        .sum())
}

/// `E‖x_γ^δ − x†‖² = Σ ((1−γ_n)² x_n² + δ² γ_n²/σ_n²)`
pub fn risk_closed_form(gamma: &LinearEstimator, model: &SequenceModel) -> Result<f64> {
    Ok(bias_squared(gamma, model)? + variance(gamma, model)?)
}

/// Monte Carlo estimate of the risk with its standard error.
pub fn risk_monte_carlo(
    gamma: &LinearEstimator,
    model: &SequenceModel,
    samples: usize,
    src: &mut RandomSource,
) -> Result<(f64, f64)> {
    check_lengths(gamma, model)?;
    if samples < 2 {
        return Err(Error::Parameter(format!("Monte Carlo needs at least 2 samples, got {samples}")));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let data = simulate_sequence(model, src);
        let loss: f64 = gamma
            .gamma
            .iter()
            .zip(&data)
            .zip(&model.x)
            .map(|((g, d), x)| (g * d - x).powi(2))
            .sum();
        // Welford update.
        let diff = loss - mean;
        mean += diff / (k + 1) as f64;
        m2 += diff * (loss - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok((mean, (var / samples as f64).sqrt()))
}

/// Pinsker minimax estimator over `{x : Σ σ_n^{-2ν} x_n² ≤ ρ²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinskerSolution {
    pub kappa: f64,
    pub gamma: Vec<f64>,
    pub active: usize,
    /// `δ² Σ σ_n⁻² γ̄_n`
    pub minimax_value: f64,
    /// `|κρ² − δ² Σ (a_n/σ_n²) max(0, 1 − κ a_n)|` at the returned `κ`.
    pub residual: f64,
    /// `κ` from the closed form on the active set.
    pub kappa_explicit: f64,
}

impl PinskerSolution {
    pub fn estimator(&self) -> LinearEstimator {
        LinearEstimator {
            gamma: self.gamma.clone(),
        }
    }

    /// Least favourable coefficients `x̄_n² = (δ²/κ) σ_n^{ν−2} γ̄_n`.
    pub fn least_favourable(&self, sigma: &[f64], nu: f64, delta: f64) -> Vec<f64> {
        sigma
            .iter()
            .zip(&self.gamma)
            .map(|(s, g)| (delta * delta / self.kappa * s.powf(nu - 2.0) * g).sqrt())
            .collect()
    }
}

fn pinsker_equation(kappa: f64, a: &[f64], sigma: &[f64], rho: f64, delta: f64) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(sigma)
        .map(|(an, s)| an / (s * s) * (1.0 - kappa * an).max(0.0))
        .sum();
    kappa * rho * rho - delta * delta * sum
}

/// Closed form `κ = δ² Σ_{n≤N} σ_n⁻² a_n / (ρ² + δ² Σ_{n≤N} σ_n⁻² a_n²)` with
/// `N` the largest index satisfying `δ² Σ_{n≤N} σ_n⁻² a_n (a_N − a_n) < ρ²`.
/// Modes must be ordered with `a_n` nondecreasing.
pub fn pinsker_kappa_explicit(a: &[f64], sigma: &[f64], rho: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    let mut n_active = 0;
    for n in 0..a.len() {
        let lhs: f64 = (0..=n).map(|k| d2 / (sigma[k] * sigma[k]) * a[k] * (a[n] - a[k])).sum();
        if lhs < rho * rho {
            n_active = n + 1;
        }
    }
    let num: f64 = (0..n_active).map(|k| d2 * a[k] / (sigma[k] * sigma[k])).sum();
    let den: f64 = rho * rho + (0..n_active).map(|k| d2 * a[k] * a[k] / (sigma[k] * sigma[k])).sum::<f64>();
    num / den
}

/// Solves the Pinsker equation for `κ_δ` by bisection with `a_n = σ_n^{−ν}`.
pub fn pinsker(sigma: &[f64], nu: f64, rho: f64, delta: f64) -> Result<PinskerSolution> {
    if sigma.is_empty() || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Parameter("Pinsker needs positive finite singular values".into()));
    }
    if !(nu > 0.0 && rho > 0.0 && delta > 0.0) {
        return Err(Error::Parameter(format!(
            "Pinsker needs nu, rho, delta > 0 (got {nu}, {rho}, {delta})"
        )));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Parameter("singular values must be nonincreasing".into()));
    }
    let a: Vec<f64> = sigma.iter().map(|s| s.powf(-nu)).collect();
    let f = |k: f64| pinsker_equation(k, &a, sigma, rho, delta);
    let mut lo = 0.0;
    let mut hi = 1.0 / a[0];
    let mut grow = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 200 || !hi.is_finite() {
            return Err(Error::Parameter("Pinsker equation root is not bracketed".into()));
        }
    }
    if !(f(lo) < 0.0) {
        return Err(Error::Parameter("Pinsker equation root is not bracketed".into()));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kappa = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let gamma: Vec<f64> = a.iter().map(|an| (1.0 - kappa * an).max(0.0)).collect();
    let active = gamma.iter().filter(|g| **g > 0.0).count();
    let minimax_value = delta * delta * sigma.iter().zip(&gamma).map(|(s, g)| g / (s * s)).sum::<f64>();
    Ok(PinskerSolution {
        kappa,
        residual: f(kappa).abs(),
        kappa_explicit: pinsker_kappa_explicit(&a, sigma, rho, delta),
        gamma,
        active,
        minimax_value,
    })
}

/// Worst-case risk of `γ` over the ellipsoid `Σ σ_n^{−2ν} x_n² ≤ ρ²`:
/// `ρ² max_n (1−γ_n)² σ_n^{2ν} + δ² Σ γ_n²/σ_n²`.
pub fn sup_risk(gamma: &LinearEstimator, sigma: &[f64], nu: f64, rho: f64, delta: f64) -> Result<f64> {
    if gamma.gamma.len() != sigma.len() {
        return Err(Error::Shape("estimator and singular values differ in length".into()));
    }
    let bias = gamma
        .gamma
        .iter()
        .zip(sigma)
        .map(|(g, s)| (1.0 - g).powi(2) * s.powf(2.0 * nu))
        .fold(0.0, f64::max);
    let var: f64 = gamma.gamma.iter().zip(sigma).map(|(g, s)| g * g / (s * s)).sum();
    Ok(rho * rho * bias + delta * delta * var)
}

/// `round(c_N δ^{−2/(2μ(ν+1)+1)})`, at least 1.
pub fn tsvd_minimax_dimension(delta: f64, mu: f64, nu: f64, c_n: f64) -> Result<usize> {
    if !(delta > 0.0 && mu > 0.0 && nu > 0.0 && c_n > 0.0) {
        return Err(Error::Parameter(format!(
            "TSVD dimension rule needs positive delta, mu, nu, c_N (got {delta}, {mu}, {nu}, {c_n})"
        )));
    }
    let exponent = -2.0 / (2.0 * mu * (nu + 1.0) + 1.0);
    Ok(((c_n * delta.powf(exponent)).round() as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model16(delta: f64) -> SequenceModel {
        let sigma: Vec<f64> = (1..=16).map(|k| 1.0 / k as f64).collect();
        let x: Vec<f64> = (1..=16).map(|k| 1.0 / (k * k) as f64).collect();
        SequenceModel::new(sigma, x, delta).unwrap()
    }

    #[test]
    fn simulation_without_noise_is_exact() {
        let m = model16(0.0);
        assert_eq!(simulate_sequence(&m, &mut RandomSource::new(1)), m.coefficients());
    }

    #[test]
    fn simulation_moments() {
        let m = model16(0.05);
        let mut src = RandomSource::new(17);
        let reps = 10_000;
        let mut sum = [0.0; 16];
        let mut sq = [0.0; 16];
        for _ in 0..reps {
            for (k, v) in simulate_sequence(&m, &mut src).iter().enumerate() {
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        for k in 0..16 {
            let sd = m.delta() / m.sigma()[k];
            let mean = sum[k] / reps as f64;
            let var = sq[k] / reps as f64 - mean * mean;
            assert!((mean - m.coefficients()[k]).abs() <= 4.0 * sd / 100.0, "mean of mode {k}");
            assert!((var / (sd * sd) - 1.0).abs() <= 0.1, "variance of mode {k}");
        }
        let a = simulate_sequence(&m, &mut RandomSource::new(5));
        let b = simulate_sequence(&m, &mut RandomSource::new(5));
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_examples() {
        let m = model16(0.1);
        let zero = LinearEstimator::new(vec![0.0; 16]).unwrap();
        let x2: f64 = m.coefficients().iter().map(|x| x * x).sum();
        assert_eq!(risk_closed_form(&zero, &m).unwrap(), x2);
        let one = LinearEstimator::new(vec![1.0; 16]).unwrap();
        let var: f64 = m.sigma().iter().map(|s| 0.01 / (s * s)).sum();
        assert!((risk_closed_form(&one, &m).unwrap() - var).abs() <= 1e-12 * var);
        let small = SequenceModel::new(vec![1.0, 0.5], vec![1.0, 1.0], 0.1).unwrap();
        let g = LinearEstimator::new(vec![1.0, 0.0]).unwrap();
        assert!((risk_closed_form(&g, &small).unwrap() - 1.01).abs() < 1e-15);
        let split = bias_squared(&g, &small).unwrap() + variance(&g, &small).unwrap();
        assert_eq!(split, risk_closed_form(&g, &small).unwrap());
        assert!(risk_closed_form(&LinearEstimator::new(vec![1.0]).unwrap(), &small).is_err());
        assert!(LinearEstimator::new(vec![-0.1]).is_err());
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let m = model16(0.02);
        let gamma = LinearEstimator::from_filter(&Filter::Tikhonov, 1e-2, m.sigma()).unwrap();
        let exact = risk_closed_form(&gamma, &m).unwrap();
        let (est, se) = risk_monte_carlo(&gamma, &m, 10_000, &mut RandomSource::new(3)).unwrap();
        assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact} (se {se})");
        let (_, se2) = risk_monte_carlo(&gamma, &m, 20_000, &mut RandomSource::new(4)).unwrap();
        let ratio = se / se2;
        assert!((ratio - 2f64.sqrt()).abs() < 0.15, "ratio {ratio}");
        let noiseless = model16(0.0);
        let (est, se) = risk_monte_carlo(&gamma, &noiseless, 10, &mut RandomSource::new(1)).unwrap();
        assert_eq!(se, 0.0);
        assert!((est - bias_squared(&gamma, &noiseless).unwrap()).abs() < 1e-15);
        assert!(risk_monte_carlo(&gamma, &m, 1, &mut RandomSource::new(1)).is_err());
    }

    #[test]
    fn pinsker_two_mode_case() {
        let sol = pinsker(&[1.0, 0.5], 1.0, 1.0, 0.1).unwrap();
        assert!((sol.kappa - 0.09 / 1.17).abs() <= 1e-12);
        assert!((sol.kappa - 0.076923).abs() <= 1e-6);
        assert!((sol.gamma[0] - 0.923077).abs() <= 1e-6);
        assert!((sol.gamma[1] - 0.846154).abs() <= 1e-6);
        assert_eq!(sol.active, 2);
        assert!(sol.residual <= 1e-12);
        assert!((sol.kappa - sol.kappa_explicit).abs() <= 1e-10);
    }

    #[test]
    fn pinsker_limits_and_saddle() {
        let sigma: Vec<f64> = (1..=40).map(|k| 2.0 / ((2 * k - 1) as f64 * std::f64::consts::PI)).collect();
        let mut last_kappa = f64::INFINITY;
        for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-6] {
            let sol = pinsker(&sigma, 1.0, 1.0, delta).unwrap();
            assert!(sol.kappa < last_kappa);
            last_kappa = sol.kappa;
            assert!(sol.residual <= 1e-12);
            assert!((sol.kappa - sol.kappa_explicit).abs() <= 1e-10 * sol.kappa.max(1e-300) + 1e-16);
            assert!(sol.gamma.windows(2).all(|w| w[1] <= w[0]));
            let x_bar = sol.least_favourable(&sigma, 1.0, delta);
            let model = SequenceModel::new(sigma.clone(), x_bar.clone(), delta).unwrap();
            let risk = risk_closed_form(&sol.estimator(), &model).unwrap();
            assert!((risk - sol.minimax_value).abs() <= 1e-10 * sol.minimax_value);
            let ellipsoid: f64 = sigma.iter().zip(&x_bar).map(|(s, x)| s.powf(-2.0) * x * x).sum();
            assert!((ellipsoid - 1.0).abs() <= 1e-9);
            let sup = sup_risk(&sol.estimator(), &sigma, 1.0, 1.0, delta).unwrap();
            assert!((sup - sol.minimax_value).abs() <= 1e-10 * sol.minimax_value);
        }
        let tiny = pinsker(&sigma, 1.0, 1.0, 1e-12).unwrap();
        assert!(tiny.gamma.iter().all(|g| *g > 0.99));
    }

    #[test]
    fn pinsker_dominates_random_alternatives() {
        let sigma: Vec<f64> = (1..=12).map(|k| 1.0 / k as f64).collect();
        let sol = pinsker(&sigma, 1.0, 1.0, 0.05).unwrap();
        let best = sup_risk(&sol.estimator(), &sigma, 1.0, 1.0, 0.05).unwrap();
        let mut src = RandomSource::new(8);
        for _ in 0..100 {
            let g: Vec<f64> = (0..12).map(|_| src.uniform()).collect();
            let alt = sup_risk(&LinearEstimator::new(g).unwrap(), &sigma, 1.0, 1.0, 0.05).unwrap();
            assert!(best <= alt * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pinsker_rejects_bad_input() {
        assert!(pinsker(&[], 1.0, 1.0, 0.1).is_err());
        assert!(pinsker(&[1.0], 0.0, 1.0, 0.1).is_err());
        assert!(pinsker(&[0.5, 1.0], 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn tsvd_dimension_examples() {
        assert_eq!(tsvd_minimax_dimension(1e-2, 1.0, 1.0, 1.0).unwrap(), 6);
        assert_eq!(tsvd_minimax_dimension(0.9, 1.0, 1.0, 0.1).unwrap(), 1);
        let mut last = 0;
        for k in 0..12 {
            let n = tsvd_minimax_dimension(10f64.powf(-0.5 * k as f64), 1.0, 2.0, 1.0).unwrap();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn filter_bridge_bias_is_approximation_error() {
        let sigma: Vec<f64> = (1..=10).map(|k| 1.0 / k as f64).collect();
        let x: Vec<f64> = (1..=10).map(|k| (k as f64).cos()).collect();
        let m = SequenceModel::new(sigma.clone(), x.clone(), 0.0).unwrap();
        let alpha = 1e-2;
        let gamma = LinearEstimator::from_filter(&Filter::Tikhonov, alpha, &sigma).unwrap();
        let approx: f64 = sigma
            .iter()
            .zip(&x)
            .map(|(s, xn)| (Filter::Tikhonov.residual(alpha, s * s) * xn).powi(2))
            .sum();
        assert!((risk_closed_form(&gamma, &m).unwrap() - approx).abs() <= 1e-14);
    }
}
