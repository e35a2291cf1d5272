//! Regularization of nonlinear problems `F(x) = y`: derivative and
//! nonlinearity probes, Tikhonov with a Gauss–Newton inner solver, and the
//! Landweber, Levenberg–Marquardt and iteratively regularized Gauss–Newton
//! iterations.

use crate::error::{Error, Result};
use crate::linalg::{axpy, distance, dot, fit_line, norm, solve_spd, spectral_norm_estimate, sub, svd, RandomSource};
use crate::problems::NonlinearProblem;

/// Why an iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Discrepancy,
    MaxIter,
    Stagnation,
    /// A priori index reached (IRGN).
    Apriori,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Discrepancy => "discrepancy",
            StopReason::MaxIter => "max-iter",
            StopReason::Stagnation => "stagnation",
            StopReason::Apriori => "apriori",
        }
    }
}

/// History of an iterative method.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// Final iterate `x_N`.
    pub x: Vec<f64>,
    /// `‖F(x_n) − y^δ‖` for `n = 0..=N`.
    pub residuals: Vec<f64>,
    /// `‖x_n − reference‖` for `n = 0..=N`, when a reference was given.
    pub errors: Option<Vec<f64>>,
    pub stop_index: usize,
    pub stop_reason: StopReason,
    /// Regularization parameter used in step `n → n+1` (LM, IRGN).
    pub alphas: Vec<f64>,
    /// Achieved linearized residual ratio per LM step.
    pub ratios: Vec<f64>,
    /// Factor `s` with `F/s` used internally (nonlinear Landweber), else 1.
    pub scale: f64,
    pub notes: Vec<String>,
}

impl IterationTrace {
    fn start(x0: &[f64], residual: f64, reference: Option<&[f64]>) -> Self {
        Self {
            x: x0.to_vec(),
            residuals: vec![residual],
            errors: reference.map(|r| vec![distance(x0, r)]),
            stop_index: 0,
            stop_reason: StopReason::MaxIter,
            alphas: Vec::new(),
            ratios: Vec::new(),
            scale: 1.0,
            notes: Vec::new(),
        }
    }

    fn push(&mut self, x: Vec<f64>, residual: f64, reference: Option<&[f64]>) {
        if let (Some(errs), Some(r)) = (self.errors.as_mut(), reference) {
            errs.push(distance(&x, r));
        }
        self.residuals.push(residual);
        self.x = x;
        self.stop_index += 1;
    }

    fn finish(mut self, reason: StopReason) -> Self {
        self.stop_reason = reason;
        self
    }
}

fn residual_vec<P: NonlinearProblem + ?Sized>(p: &P, x: &[f64], y: &[f64]) -> Vec<f64> {
    sub(&p.forward(x), y)
}

fn check_dims<P: NonlinearProblem + ?Sized>(p: &P, y: &[f64], x0: &[f64]) -> Result<()> {
    if y.len() != p.output_dim() || x0.len() != p.input_dim() {
        return Err(Error::Shape(format!(
            "{}: expected data of length {} and start of length {}",
            p.name(),
            p.output_dim(),
            p.input_dim()
        )));
    }
    Ok(())
}

fn require_domain<P: NonlinearProblem + ?Sized>(p: &P, x: &[f64], what: &str) -> Result<()> {
    if !p.contains(x) {
        return Err(Error::Domain(format!(
            "{what} has norm {:e}, outside the radius {:e} of {}",
            norm(x),
            p.domain_radius(),
            p.name()
        )));
    }
    Ok(())
}

/// Result of [`check_derivative`].
#[derive(Debug, Clone)]
pub struct DerivativeCheck {
    pub scales: Vec<f64>,
    /// `‖F(x+h) − F(x) − F′(x)h‖`
    pub remainders: Vec<f64>,
    /// Log-log slope; `None` when every remainder is below 1e-12 (exact
    /// linearization).
    pub slope: Option<f64>,
}

/// Linearization remainder along `direction` scaled to the norms in `scales`.
pub fn check_derivative<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
    direction: &[f64],
    scales: &[f64],
) -> Result<DerivativeCheck> {
    if x.len() != p.input_dim() || direction.len() != p.input_dim() {
        return Err(Error::Shape("point or direction has the wrong length".into()));
    }
    let dn = norm(direction);
    if !(dn > 0.0) || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Parameter("direction must be nonzero and scales positive".into()));
    }
    require_domain(p, x, "base point")?;
    let fx = p.forward(x);
    let jac = p.derivative(x);
    let mut remainders = Vec::with_capacity(scales.len());
    for &s in scales {
        let h: Vec<f64> = direction.iter().map(|d| d * s / dn).collect();
        let xh: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        require_domain(p, &xh, "perturbed point")?;
        let fxh = p.forward(&xh);
        let jh = jac.mul_vec(&h);
        let r: Vec<f64> = fxh.iter().zip(&fx).zip(&jh).map(|((a, b), c)| a - b - c).collect();
        remainders.push(norm(&r));
    }
    let slope = if remainders.iter().all(|&r| r <= 1e-12) {
        None
    } else {
        let xs: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
        let ys: Vec<f64> = remainders.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
        Some(fit_line(&xs, &ys).0)
    };
    Ok(DerivativeCheck {
        scales: scales.to_vec(),
        remainders,
        slope,
    })
}

/// Sampled nonlinearity constants around a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityProbe {
    /// `max ‖F(x+h) − F(x) − F′(x)h‖ / ‖F(x+h) − F(x)‖`
    pub eta: f64,
    /// `max 2‖F(x+h) − F(x) − F′(x)h‖ / ‖h‖²`
    pub lipschitz: f64,
    /// Samples that entered the estimates.
    pub used: usize,
}

/// Estimates the tangential-cone constant `η` and the derivative Lipschitz
/// constant from `samples` perturbations drawn uniformly in radius within the
/// ball of the given radius. Samples leaving the domain or with a
/// denominator below 1e-14 are skipped.
pub fn tangential_cone_probe<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
    radius: f64,
    samples: usize,
    src: &mut RandomSource,
) -> Result<NonlinearityProbe> {
    if x.len() != p.input_dim() {
        return Err(Error::Shape("probe point has the wrong length".into()));
    }
    if !(radius > 0.0) || radius > p.domain_radius() {
        return Err(Error::Parameter(format!(
            "probe radius must lie in (0, {:e}], got {radius}",
            p.domain_radius()
        )));
    }
    require_domain(p, x, "probe point")?;
    let fx = p.forward(x);
    let jac = p.derivative(x);
    let mut eta = 0.0_f64;
    let mut lipschitz = 0.0_f64;
    let mut used = 0;
    for _ in 0..samples {
        let d = src.gaussian_vector(x.len());
        let len = radius * src.uniform();
        let dn = norm(&d);
        if dn == 0.0 {
            continue;
        }
        let h: Vec<f64> = d.iter().map(|v| v * len / dn).collect();
        let xh: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        if !p.contains(&xh) {
            continue;
        }
        let fxh = p.forward(&xh);
        let diff = sub(&fxh, &fx);
        let jh = jac.mul_vec(&h);
        let rem = distance(&diff, &jh);
        let den = norm(&diff);
        let hn = norm(&h);
        if den < 1e-14 || hn < 1e-14 {
            continue;
        }
        eta = eta.max(rem / den);
        lipschitz = lipschitz.max(2.0 * rem / (hn * hn));
        used += 1;
    }
    Ok(NonlinearityProbe { eta, lipschitz, used })
}

/// Residual threshold factor `2(1+η)/(1−2η)` of the nonlinear Landweber
/// iteration; infinite for `η ≥ 1/2`.
pub fn landweber_tau_threshold(eta: f64) -> f64 {
    if eta >= 0.5 {
        f64::INFINITY
    } else {
        2.0 * (1.0 + eta) / (1.0 - 2.0 * eta)
    }
}

fn tikhonov_objective<P: NonlinearProblem + ?Sized>(p: &P, y: &[f64], alpha: f64, x0: &[f64], x: &[f64]) -> f64 {
    let r = residual_vec(p, x, y);
    0.5 * dot(&r, &r) + 0.5 * alpha * distance(x, x0).powi(2)
}

/// Stationary point of `½‖F(x) − y^δ‖² + (α/2)‖x − x₀‖²`, started at `x₀`.
pub fn nl_tikhonov<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    alpha: f64,
    x0: &[f64],
    budget: usize,
) -> Result<Vec<f64>> {
    nl_tikhonov_from(p, y_delta, alpha, x0, x0, budget)
}

/// As [`nl_tikhonov`], started at `start` instead of `x₀`.
///
/// Damped Gauss–Newton: the step solves `(F′ᵀF′ + αI) s = −∇J` and is
/// shortened by Armijo backtracking (and to stay in the domain). Stops when
/// `‖∇J‖ ≤ 1e-8 (1 + ‖y^δ‖)` or the Gauss–Newton step falls below
/// `1e-14 (1 + ‖x‖)`.
pub fn nl_tikhonov_from<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    alpha: f64,
    x0: &[f64],
    start: &[f64],
    budget: usize,
) -> Result<Vec<f64>> {
    check_dims(p, y_delta, x0)?;
    if start.len() != x0.len() {
        return Err(Error::Shape("start has the wrong length".into()));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Parameter(format!("Tikhonov parameter must be > 0, got {alpha}")));
    }
    require_domain(p, start, "start")?;
    let tol = 1e-8 * (1.0 + norm(y_delta));
    let mut x = start.to_vec();
    let mut value = tikhonov_objective(p, y_delta, alpha, x0, &x);
    let mut grad_norm = f64::INFINITY;
    for it in 0..=budget {
        let r = residual_vec(p, &x, y_delta);
        let jac = p.derivative(&x);
        let mut grad = jac.tr_mul_vec(&r);
        for ((g, xi), x0i) in grad.iter_mut().zip(&x).zip(x0) {
            *g += alpha * (xi - x0i);
        }
        grad_norm = norm(&grad);
        if grad_norm <= tol {
            return Ok(x);
        }
        if it == budget {
            break;
        }
        let mut normal = jac.gram();
        normal.add_diagonal(alpha);
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = solve_spd(&normal, &neg)?;
        if norm(&step) <= 1e-14 * (1.0 + norm(&x)) {
            // Stationary to working precision; the absolute gradient test is
            // unattainable when α is huge.
            return Ok(x);
        }
        let slope = dot(&grad, &step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = x.clone();
            axpy(t, &step, &mut trial);
            if p.contains(&trial) {
                let v = tikhonov_objective(p, y_delta, alpha, x0, &trial);
                if v <= value + 1e-4 * t * slope {
                    x = trial;
                    value = v;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::Convergence {
        iterations: budget,
        gradient: grad_norm,
        last: x,
    })
}

/// Result of [`nl_tikhonov_discrepancy`].
#[derive(Debug, Clone)]
pub struct NlDiscrepancyOutcome {
    /// Selected parameter; `None` when `x₀` already satisfied the bound.
    pub alpha: Option<f64>,
    pub index: Option<usize>,
    pub x: Vec<f64>,
    pub residual: f64,
    /// `δ < residual` holds as well as `residual ≤ τδ`.
    pub two_sided: bool,
    /// Residuals of the scanned minimizers.
    pub scan: Vec<f64>,
}

/// Nonlinear Tikhonov with the discrepancy principle over a decreasing grid,
/// warm-starting each minimization at the previous minimizer.
pub fn nl_tikhonov_discrepancy<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    delta: f64,
    tau: f64,
    x0: &[f64],
    alphas: &[f64],
    budget: usize,
) -> Result<NlDiscrepancyOutcome> {
    check_dims(p, y_delta, x0)?;
    if !(delta >= 0.0) || !(tau > 1.0) {
        return Err(Error::Parameter(format!("need delta >= 0 and tau > 1 (got {delta}, {tau})")));
    }
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) || alphas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Parameter("parameter grid must be positive and strictly decreasing".into()));
    }
    require_domain(p, x0, "x0")?;
    let bound = tau * delta;
    let r0 = norm(&residual_vec(p, x0, y_delta));
    if r0 <= bound {
        return Ok(NlDiscrepancyOutcome {
            alpha: None,
            index: None,
            x: x0.to_vec(),
            residual: r0,
            two_sided: r0 > delta,
            scan: Vec::new(),
        });
    }
    let mut scan = Vec::with_capacity(alphas.len());
    let mut start = x0.to_vec();
    for (i, &alpha) in alphas.iter().enumerate() {
        let x = nl_tikhonov_from(p, y_delta, alpha, x0, &start, budget)?;
        let res = norm(&residual_vec(p, &x, y_delta));
        scan.push(res);
        if res <= bound {
            return Ok(NlDiscrepancyOutcome {
                alpha: Some(alpha),
                index: Some(i),
                x,
                residual: res,
                two_sided: res > delta,
                scan,
            });
        }
        start = x;
    }
    Err(Error::Exhausted {
        residual: *scan.last().unwrap(),
        bound,
    })
}

/// Options for [`nl_landweber`].
#[derive(Debug, Clone)]
pub struct LandweberOptions {
    pub max_iter: usize,
    /// Scaling factor `s`; the iteration runs on `F/s`, `y/s`. Defaults to
    /// `1.5 ‖F′(x₀)‖`.
    pub scale: Option<f64>,
    /// Probed tangential-cone constant; when given, `τ` must exceed
    /// `2(1+η)/(1−2η)`.
    pub eta: Option<f64>,
    /// Known solution for error tracking and divergence detection.
    pub reference: Option<Vec<f64>>,
}

impl LandweberOptions {
    pub fn new(max_iter: usize) -> Self {
        Self {
            max_iter,
            scale: None,
            eta: None,
            reference: None,
        }
    }
}

/// Tracks consecutive steps where a monitored quantity exceeds twice its
/// running minimum.
struct DivergenceGuard {
    minimum: f64,
    strikes: usize,
}

impl DivergenceGuard {
    const STRIKES: usize = 10;

    fn new(initial: f64) -> Self {
        Self {
            minimum: initial,
            strikes: 0,
        }
    }

    fn observe(&mut self, step: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Divergence {
                step,
                error: value,
                minimum: self.minimum,
            });
        }
        self.minimum = self.minimum.min(value);
        if value > 2.0 * self.minimum {
            self.strikes += 1;
            if self.strikes >= Self::STRIKES {
                return Err(Error::Divergence {
                    step,
                    error: value,
                    minimum: self.minimum,
                });
            }
        } else {
            self.strikes = 0;
        }
        Ok(())
    }
}

/// Nonlinear Landweber iteration `x_{n+1} = x_n − F̃′(x_n)ᵀ(F̃(x_n) − ỹ)` on
/// the rescaled problem `F̃ = F/s`, `ỹ = y^δ/s`, stopped by the discrepancy
/// principle `‖F(x_N) − y^δ‖ ≤ τδ` in the original units.
pub fn nl_landweber<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    delta: f64,
    tau: f64,
    x0: &[f64],
    options: &LandweberOptions,
) -> Result<IterationTrace> {
    check_dims(p, y_delta, x0)?;
    if !(delta >= 0.0) || !(tau > 1.0) {
        return Err(Error::Parameter(format!("need delta >= 0 and tau > 1 (got {delta}, {tau})")));
    }
    if let Some(eta) = options.eta {
        let threshold = landweber_tau_threshold(eta);
        if !(tau > threshold) {
            return Err(Error::Parameter(format!(
                "tau = {tau} does not exceed 2(1+η)/(1−2η) = {threshold} for η = {eta}"
            )));
        }
    }
    require_domain(p, x0, "x0")?;
    let reference = options.reference.as_deref();
    let scale = match options.scale {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::Parameter(format!("scale must be > 0, got {s}"))),
        None => {
            let s = 1.5 * spectral_norm_estimate(&p.derivative(x0));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        }
    };
    let step = 1.0 / (scale * scale);
    let bound = tau * delta;
    let mut r = residual_vec(p, x0, y_delta);
    let mut trace = IterationTrace::start(x0, norm(&r), reference);
    trace.scale = scale;
    trace.notes.push(format!("forward operator scaled by 1/{scale:e}"));
    if options.eta.is_none() {
        trace.notes.push("tau not checked against a probed eta".into());
    }
    let mut guard = DivergenceGuard::new(trace.errors.as_ref().map_or(trace.residuals[0], |e| e[0]));
    let mut x = x0.to_vec();
    while trace.residuals[trace.stop_index] > bound {
        if trace.stop_index >= options.max_iter {
            return Ok(trace.finish(StopReason::MaxIter));
        }
        let g = p.derivative(&x).tr_mul_vec(&r);
        axpy(-step, &g, &mut x);
        require_domain(p, &x, "Landweber iterate")?;
        r = residual_vec(p, &x, y_delta);
        trace.push(x.clone(), norm(&r), reference);
        let n = trace.stop_index;
        let monitored = trace.errors.as_ref().map_or(trace.residuals[n], |e| e[n]);
        guard.observe(n, monitored)?;
    }
    Ok(trace.finish(StopReason::Discrepancy))
}

/// Linearized step data at one LM iterate.
struct LinearizedResidual {
    sigma: Vec<f64>,
    /// `⟨r, u_k⟩`
    coeffs: Vec<f64>,
    /// `‖r − Σ⟨r,u_k⟩u_k‖²`
    orth: f64,
}

impl LinearizedResidual {
    /// `‖F′h_α − r‖` for `h_α = (F′ᵀF′ + αI)⁻¹F′ᵀ r`.
    fn residual(&self, alpha: f64) -> f64 {
        let s: f64 = self
            .sigma
            .iter()
            .zip(&self.coeffs)
            .map(|(s, c)| (alpha / (s * s + alpha) * c).powi(2))
            .sum();
        (s + self.orth).sqrt()
    }
}

/// Options for [`levenberg_marquardt`].
#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    pub reference: Option<Vec<f64>>,
}

/// Levenberg–Marquardt with `α_n` chosen so that the linearized residual is
/// `σ` times the current residual, and discrepancy stopping.
pub fn levenberg_marquardt<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    delta: f64,
    tau: f64,
    sigma: f64,
    x0: &[f64],
    options: &LmOptions,
) -> Result<IterationTrace> {
    check_dims(p, y_delta, x0)?;
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Parameter(format!("sigma must lie in (0, 1), got {sigma}")));
    }
    if !(delta >= 0.0) || !(tau * sigma > 1.0) {
        return Err(Error::Parameter(format!(
            "need delta >= 0 and tau > 1/sigma (got delta = {delta}, tau = {tau}, sigma = {sigma})"
        )));
    }
    require_domain(p, x0, "x0")?;
    let reference = options.reference.as_deref();
    let bound = tau * delta;
    let mut x = x0.to_vec();
    let mut r = sub(y_delta, &p.forward(&x));
    let mut trace = IterationTrace::start(x0, norm(&r), reference);
    while trace.residuals[trace.stop_index] > bound {
        if trace.stop_index >= options.max_iter {
            return Ok(trace.finish(StopReason::MaxIter));
        }
        let jac = p.derivative(&x);
        let sys = svd(&jac)?;
        let coeffs = sys.u_coefficients(&r);
        let rn = norm(&r);
        let orth = (rn * rn - dot(&coeffs, &coeffs)).max(0.0);
        let lin = LinearizedResidual {
            sigma: sys.sigma().to_vec(),
            coeffs,
            orth,
        };
        let alpha = lm_alpha(&lin, sigma * rn, sys.sigma().first().copied().unwrap_or(1.0))?;
        let h_coeffs: Vec<f64> = lin
            .sigma
            .iter()
            .zip(&lin.coeffs)
            .map(|(s, c)| s / (s * s + alpha) * c)
            .collect();
        let h = sys.synthesize_v(&h_coeffs);
        let jh = jac.mul_vec(&h);
        trace.ratios.push(distance(&jh, &r) / rn);
        trace.alphas.push(alpha);
        if norm(&h) <= 1e-15 * (1.0 + norm(&x)) {
            return Ok(trace.finish(StopReason::Stagnation));
        }
        axpy(1.0, &h, &mut x);
        require_domain(p, &x, "Levenberg–Marquardt iterate")?;
        r = sub(y_delta, &p.forward(&x));
        trace.push(x.clone(), norm(&r), reference);
    }
    Ok(trace.finish(StopReason::Discrepancy))
}

/// Bisection on `log α` over `[1e-12 σ₁², 1e12 σ₁²]` for
/// `‖F′h_α − r‖ = target`.
fn lm_alpha(lin: &LinearizedResidual, target: f64, sigma1: f64) -> Result<f64> {
    let s2 = (sigma1 * sigma1).max(f64::MIN_POSITIVE);
    let mut lo = (1e-12 * s2).ln();
    let mut hi = (1e12 * s2).ln();
    let r_lo = lin.residual(lo.exp());
    let r_hi = lin.residual(hi.exp());
    if !(r_lo <= target && target <= r_hi) {
        return Err(Error::AlphaRule {
            target,
            lower: r_lo,
            upper: r_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = lin.residual(mid.exp());
        if (r - target).abs() <= 1e-13 * target {
            return Ok(mid.exp());
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Options for [`irgn`].
#[derive(Debug, Clone)]
pub struct IrgnOptions {
    pub alpha0: f64,
    /// Decay factor `q > 1` in `α_n = α₀ q⁻ⁿ`.
    pub q: f64,
    /// Source order `ν ∈ [1, 2]` in the stopping rule `α_N^{(ν+1)/2} ≤ τδ`.
    pub nu: f64,
    pub max_iter: usize,
    pub reference: Option<Vec<f64>>,
}

/// Iteratively regularized Gauss–Newton method with a priori stopping.
pub fn irgn<P: NonlinearProblem + ?Sized>(
    p: &P,
    y_delta: &[f64],
    delta: f64,
    tau: f64,
    x0: &[f64],
    options: &IrgnOptions,
) -> Result<IterationTrace> {
    check_dims(p, y_delta, x0)?;
    let IrgnOptions {
        alpha0, q, nu, max_iter, ..
    } = *options;
    if !(alpha0 > 0.0) || !(q > 1.0) || !(1.0..=2.0).contains(&nu) || !(tau > 0.0) || !(delta >= 0.0) {
        return Err(Error::Parameter(format!(
            "IRGN needs alpha0 > 0, q > 1, nu in [1, 2], tau > 0, delta >= 0 (got {alpha0}, {q}, {nu}, {tau}, {delta})"
        )));
    }
    require_domain(p, x0, "x0")?;
    let reference = options.reference.as_deref();
    let mut x = x0.to_vec();
    let mut r = sub(y_delta, &p.forward(&x));
    let mut trace = IterationTrace::start(x0, norm(&r), reference);
    loop {
        let n = trace.stop_index;
        let alpha = alpha0 * q.powi(-(n as i32));
        if alpha.powf((nu + 1.0) / 2.0) <= tau * delta {
            return Ok(trace.finish(StopReason::Apriori));
        }
        if n >= max_iter {
            return Err(Error::Budget(max_iter));
        }
        let jac = p.derivative(&x);
        let mut rhs = jac.tr_mul_vec(&r);
        for ((b, xi), x0i) in rhs.iter_mut().zip(&x).zip(x0) {
            *b += alpha * (x0i - xi);
        }
        let mut normal = jac.gram();
        normal.add_diagonal(alpha);
        let h = solve_spd(&normal, &rhs)?;
        axpy(1.0, &h, &mut x);
        require_domain(p, &x, "IRGN iterate")?;
        r = sub(y_delta, &p.forward(&x));
        trace.alphas.push(alpha);
        trace.push(x.clone(), norm(&r), reference);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::{make_autoconvolution, make_diagonal_cubic, make_integration_operator, LinearForward};
    use crate::spectral::{landweber_run, tikhonov_solve, LandweberStop};

    fn scales() -> Vec<f64> {
        (0..6).map(|i| 0.1 * 0.5f64.powi(i)).collect()
    }

    fn cubic_sigma(n: usize) -> Vec<f64> {
        (1..=n).map(|k| 1.0 / k as f64).collect()
    }

    #[test]
    fn derivative_check_linear_is_exact() {
        let p = LinearForward::new(Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap());
        let out = check_derivative(&p, &[0.3, 0.1], &[1.0, 1.0], &scales()).unwrap();
        assert!(out.slope.is_none());
        assert!(out.remainders.iter().all(|&r| r <= 1e-12));
    }

    #[test]
    fn derivative_check_quadratic_slopes() {
        let cubic = make_diagonal_cubic(&cubic_sigma(8), 1.0).unwrap();
        let x = vec![0.2; 8];
        let d: Vec<f64> = (0..8).map(|i| (i as f64 + 1.0).sin()).collect();
        let s = check_derivative(&cubic, &x, &d, &scales()).unwrap().slope.unwrap();
        assert!((1.8..=2.2).contains(&s), "cubic slope {s}");
        let conv = make_autoconvolution(16).unwrap();
        let x: Vec<f64> = (0..16).map(|i| 1.0 + 0.1 * i as f64).collect();
        let out = check_derivative(&conv, &x, &d.repeat(2), &scales()).unwrap();
        assert!((out.slope.unwrap() - 2.0).abs() < 1e-6);
        // The remainder is exactly F(h).
        let h: Vec<f64> = d.repeat(2).iter().map(|v| v * 0.1 / norm(&d.repeat(2))).collect();
        assert!((out.remainders[0] - norm(&conv.forward(&h))).abs() < 1e-14);
    }

    #[test]
    fn derivative_check_domain() {
        let cubic = make_diagonal_cubic(&[1.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            check_derivative(&cubic, &[5.0, 0.0], &[1.0, 0.0], &[0.1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn probe_linear_and_small_radius() {
        let mut src = RandomSource::new(1);
        let lin = LinearForward::new(Matrix::from_diagonal(&[1.0, 0.5, 0.1]));
        let probe = tangential_cone_probe(&lin, &[0.1, 0.2, 0.3], 1.0, 200, &mut src).unwrap();
        assert!(probe.eta <= 1e-10);
        let cubic = make_diagonal_cubic(&cubic_sigma(6), 0.1).unwrap();
        let x = vec![0.1; 6];
        let wide = tangential_cone_probe(&cubic, &x, 0.5, 500, &mut src).unwrap();
        let narrow = tangential_cone_probe(&cubic, &x, 0.05, 500, &mut src).unwrap();
        assert!(wide.eta < 0.5);
        assert!(narrow.eta < wide.eta);
        assert!(narrow.lipschitz.is_finite() && narrow.used > 0);
    }

    #[test]
    fn nl_tikhonov_linear_matches_shifted_solve() {
        let prob = make_integration_operator(24).unwrap();
        let lin = LinearForward::new(prob.matrix().clone());
        let y = RandomSource::new(3).gaussian_vector(24);
        let x0: Vec<f64> = prob.sample(|t| t);
        let alpha = 1e-3;
        let x = nl_tikhonov(&lin, &y, alpha, &x0, 50).unwrap();
        let shifted = sub(&y, &prob.apply(&x0));
        let mut oracle = tikhonov_solve(prob.matrix(), &shifted, alpha).unwrap();
        axpy(1.0, &x0, &mut oracle);
        assert!(distance(&x, &oracle) <= 1e-8 * (1.0 + norm(&oracle)));
        let big = nl_tikhonov(&lin, &y, 1e10, &x0, 50).unwrap();
        assert!(distance(&big, &x0) < 1e-8);
    }

    fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > 1e-12 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn nl_tikhonov_cubic_matches_coordinate_oracle() {
        let sigma = cubic_sigma(6);
        let c = 0.5;
        let p = make_diagonal_cubic(&sigma, c).unwrap();
        let y: Vec<f64> = sigma.iter().enumerate().map(|(k, s)| s * (0.3 + 0.05 * k as f64)).collect();
        let x0 = vec![0.0; 6];
        let alpha = 1e-2;
        let x = nl_tikhonov(&p, &y, alpha, &x0, 200).unwrap();
        for k in 0..6 {
            let f = |t: f64| 0.5 * (sigma[k] * (t + c * t * t * t) - y[k]).powi(2) + 0.5 * alpha * t * t;
            let oracle = golden_section(f, -1.0, 1.5);
            assert!((x[k] - oracle).abs() <= 1e-6, "coordinate {k}: {} vs {oracle}", x[k]);
        }
    }

    #[test]
    fn nl_tikhonov_budget_error_carries_iterate() {
        let p = make_diagonal_cubic(&cubic_sigma(4), 1.0).unwrap();
        match nl_tikhonov(&p, &[0.5, 0.4, 0.3, 0.2], 1e-6, &[0.0; 4], 0) {
            Err(Error::Convergence { last, .. }) => assert_eq!(last.len(), 4),
            other => panic!("expected convergence error, got {other:?}"),
        }
        assert!(nl_tikhonov(&p, &[0.0; 4], 0.0, &[0.0; 4], 10).is_err());
    }

    #[test]
    fn nl_discrepancy_linear_and_immediate() {
        let a = Matrix::identity(1);
        let lin = LinearForward::new(a.clone());
        let grid: Vec<f64> = (0..40).map(|i| 0.9f64.powi(i)).collect();
        let out = nl_tikhonov_discrepancy(&lin, &[1.0], 0.1, 2.0, &[0.0], &grid, 50).unwrap();
        let linear = crate::choice::morozov_tikhonov(&a, &[1.0], 0.1, 2.0, &grid).unwrap();
        assert_eq!(out.index, Some(linear.index));
        let imm = nl_tikhonov_discrepancy(&lin, &[1.0], 0.6, 2.0, &[0.0], &grid, 50).unwrap();
        assert!(imm.alpha.is_none());
        assert!(matches!(
            nl_tikhonov_discrepancy(&lin, &[1.0], 1e-9, 2.0, &[0.0], &grid[..3], 50),
            Err(Error::Exhausted { .. })
        ));
    }

    #[test]
    fn nl_landweber_linear_reduction() {
        let prob = make_integration_operator(16).unwrap();
        let lin = LinearForward::new(prob.matrix().clone());
        let y = RandomSource::new(4).gaussian_vector(16);
        let s1 = spectral_norm_estimate(prob.matrix());
        let mut opts = LandweberOptions::new(30);
        opts.scale = Some(1.2 * s1);
        let trace = nl_landweber(&lin, &y, 0.0, 2.0, &[0.0; 16], &opts).unwrap();
        assert_eq!(trace.stop_reason, StopReason::MaxIter);
        assert_eq!(trace.stop_index, 30);
        let omega = 1.0 / (1.2 * s1).powi(2);
        let run = landweber_run(prob.matrix(), &y, Some(omega), LandweberStop::Iterations(30), None).unwrap();
        assert!(distance(&trace.x, &run.x) <= 1e-12 * (1.0 + norm(&run.x)));
    }

    #[test]
    fn iterations_stop_immediately_on_exact_start() {
        let p = make_diagonal_cubic(&cubic_sigma(5), 0.2).unwrap();
        let x0 = vec![0.1; 5];
        let y = p.forward(&x0);
        let lw = nl_landweber(&p, &y, 1e-3, 3.0, &x0, &LandweberOptions::new(10)).unwrap();
        assert_eq!(lw.stop_index, 0);
        let lm = levenberg_marquardt(
            &p,
            &y,
            1e-3,
            3.0,
            0.5,
            &x0,
            &LmOptions {
                max_iter: 10,
                reference: None,
            },
        )
        .unwrap();
        assert_eq!(lm.stop_index, 0);
    }

    #[test]
    fn nl_landweber_fejer_monotone_on_cubic() {
        let sigma = cubic_sigma(16);
        let p = make_diagonal_cubic(&sigma, 0.1).unwrap();
        let x_true: Vec<f64> = sigma.iter().map(|s| 0.5 * s).collect();
        let y = p.forward(&x_true);
        let delta = 1e-3;
        let yd = crate::problems::add_noise_exact(&y, delta, &mut RandomSource::new(9)).unwrap();
        let x0 = vec![0.0; 16];
        let probe = tangential_cone_probe(&p, &x_true, norm(&x_true) * 1.01, 400, &mut RandomSource::new(2)).unwrap();
        let threshold = landweber_tau_threshold(probe.eta);
        let tau = threshold * 1.05;
        let mut opts = LandweberOptions::new(100_000);
        opts.eta = Some(probe.eta);
        opts.reference = Some(x_true.clone());
        let trace = nl_landweber(&p, &yd, delta, tau, &x0, &opts).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Discrepancy);
        let errs = trace.errors.unwrap();
        for n in 0..trace.stop_index {
            if trace.residuals[n] > threshold * delta {
                assert!(errs[n + 1] <= errs[n] * (1.0 + 1e-12), "step {n}");
            }
        }
        assert!(trace.residuals.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nl_landweber_tau_precondition() {
        let p = make_diagonal_cubic(&[1.0], 0.1).unwrap();
        let mut opts = LandweberOptions::new(10);
        opts.eta = Some(0.1);
        assert!(matches!(nl_landweber(&p, &[0.5], 0.01, 2.0, &[0.0], &opts), Err(Error::Parameter(_))));
    }

    #[test]
    fn divergence_guard_fires() {
        let mut g = DivergenceGuard::new(1.0);
        for step in 0..9 {
            g.observe(step, 3.0).unwrap();
        }
        assert!(matches!(g.observe(9, 3.0), Err(Error::Divergence { .. })));
    }

    #[test]
    fn lm_scalar_alpha_rule() {
        let lin = LinearForward::new(Matrix::identity(1));
        for sigma in [0.2, 0.5, 0.9] {
            let trace = levenberg_marquardt(
                &lin,
                &[1.0],
                1e-3,
                1.5 / sigma,
                sigma,
                &[0.0],
                &LmOptions {
                    max_iter: 1,
                    reference: None,
                },
            )
            .unwrap();
            let alpha = trace.alphas[0];
            assert!((alpha - sigma / (1.0 - sigma)).abs() <= 1e-8 * alpha, "sigma {sigma}");
        }
    }

    #[test]
    fn lm_ratio_and_bracket_failure() {
        let conv = make_autoconvolution(24).unwrap();
        let x_true: Vec<f64> = (0..24).map(|i| 1.0 + 0.5 * ((i as f64 + 0.5) / 24.0)).collect();
        let y = conv.forward(&x_true);
        let yd = crate::problems::add_noise_exact(&y, 1e-3, &mut RandomSource::new(3)).unwrap();
        let x0 = vec![1.2; 24];
        let opts = LmOptions {
            max_iter: 200,
            reference: Some(x_true.clone()),
        };
        let trace = levenberg_marquardt(&conv, &yd, 1e-3, 2.5, 0.5, &x0, &opts).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Discrepancy);
        assert!(trace.ratios.iter().all(|r| (r - 0.5).abs() <= 1e-8));
        // Rank-deficient derivative: the linearized residual cannot drop
        // below the component outside its range.
        let flat = LinearForward::new(Matrix::from_diagonal(&[1.0, 0.0]));
        let err = levenberg_marquardt(&flat, &[0.1, 1.0], 1e-3, 4.0, 0.5, &[0.0, 0.0], &opts_none());
        assert!(matches!(err, Err(Error::AlphaRule { .. })));
        assert!(levenberg_marquardt(&flat, &[0.1, 1.0], 1e-3, 1.5, 0.5, &[0.0, 0.0], &opts_none()).is_err());
    }

    fn opts_none() -> LmOptions {
        LmOptions {
            max_iter: 10,
            reference: None,
        }
    }

    #[test]
    fn irgn_linear_steps_are_shifted_tikhonov() {
        let prob = make_integration_operator(20).unwrap();
        let lin = LinearForward::new(prob.matrix().clone());
        let y = RandomSource::new(12).gaussian_vector(20);
        let x0 = prob.sample(|t| 1.0 - t);
        let opts = IrgnOptions {
            alpha0: 1.0,
            q: 2.0,
            nu: 1.0,
            max_iter: 10,
            reference: None,
        };
        let trace = irgn(&lin, &y, 1e-2, 1.0, &x0, &opts).unwrap();
        assert!(trace.stop_index >= 1);
        let alpha = *trace.alphas.last().unwrap();
        let mut oracle = tikhonov_solve(prob.matrix(), &sub(&y, &prob.apply(&x0)), alpha).unwrap();
        axpy(1.0, &x0, &mut oracle);
        assert!(distance(&trace.x, &oracle) <= 1e-10 * (1.0 + norm(&oracle)));
    }

    #[test]
    fn irgn_immediate_stop_and_budget() {
        let lin = LinearForward::new(Matrix::identity(2));
        let opts = IrgnOptions {
            alpha0: 0.01,
            q: 2.0,
            nu: 1.0,
            max_iter: 5,
            reference: None,
        };
        let t = irgn(&lin, &[1.0, 1.0], 0.1, 1.0, &[0.0, 0.0], &opts).unwrap();
        assert_eq!(t.stop_index, 0);
        assert_eq!(t.x, vec![0.0, 0.0]);
        let opts = IrgnOptions { alpha0: 1.0, ..opts };
        assert!(matches!(irgn(&lin, &[1.0, 1.0], 1e-12, 1.0, &[0.0, 0.0], &opts), Err(Error::Budget(5))));
        let bad = IrgnOptions { nu: 3.0, ..opts };
        assert!(irgn(&lin, &[1.0, 1.0], 0.1, 1.0, &[0.0, 0.0], &bad).is_err());
    }

    #[test]
    fn landweber_summed_residuals_bounded_for_exact_data() {
        let sigma = cubic_sigma(8);
        let p = make_diagonal_cubic(&sigma, 0.1).unwrap();
        let x_true: Vec<f64> = sigma.iter().map(|s| 0.4 * s).collect();
        let y = p.forward(&x_true);
        let x0 = vec![0.0; 8];
        let probe = tangential_cone_probe(&p, &x_true, norm(&x_true) * 1.01, 400, &mut RandomSource::new(6)).unwrap();
        let mut opts = LandweberOptions::new(1000);
        opts.scale = Some(1.0);
        let trace = nl_landweber(&p, &y, 0.0, 2.0, &x0, &opts).unwrap();
        let mut partial = 0.0;
        let bound = distance(&x0, &x_true).powi(2) / (1.0 - 2.0 * probe.eta);
        for r in &trace.residuals {
            let next = partial + r * r;
            assert!(next >= partial);
            partial = next;
        }
        assert!(partial <= bound, "{partial} > {bound}");
    }
}
