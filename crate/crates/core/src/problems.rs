//! Built-in test problems.
//!
//! Linear problems are discretized on the midpoint grid `t_i = (i − ½)/n` of
//! `(0, 1)` with the quadrature weight `h = 1/n` folded into the matrix, so
//! Euclidean inner products stand in for `L²` ones and the discrete singular
//! values approximate the continuous ones directly. Sampled analytic singular
//! functions are multiplied by `√h` to give unit Euclidean norm.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, svd, Matrix, RandomSource, SingularSystem};

/// Closed-form singular system of a built-in operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticSystem {
    /// `(Kx)(t) = ∫₀ᵗ x(s) ds` on `L²(0, 1)`.
    Integration,
}

impl AnalyticSystem {
    /// `σ_k`, with `k` starting at 1.
    pub fn sigma(&self, k: usize) -> f64 {
        match self {
            AnalyticSystem::Integration => 2.0 / ((2 * k - 1) as f64 * PI),
        }
    }

    /// Right singular function `v_k(t)`.
    pub fn v(&self, k: usize, t: f64) -> f64 {
        match self {
            AnalyticSystem::Integration => 2f64.sqrt() * ((k as f64 - 0.5) * PI * t).cos(),
        }
    }

    /// Left singular function `u_k(t)`.
    pub fn u(&self, k: usize, t: f64) -> f64 {
        match self {
            AnalyticSystem::Integration => 2f64.sqrt() * ((k as f64 - 0.5) * PI * t).sin(),
        }
    }
}

/// A discretized linear forward operator with its grid.
#[derive(Debug)]
pub struct LinearProblem {
    name: String,
    a: Matrix,
    grid: Vec<f64>,
    analytic: Option<AnalyticSystem>,
    system: OnceLock<SingularSystem>,
}

impl Clone for LinearProblem {
    fn clone(&self) -> Self {
        let system = OnceLock::new();
        if let Some(s) = self.system.get() {
            let _ = system.set(s.clone());
        }
        Self {
            name: self.name.clone(),
            a: self.a.clone(),
            grid: self.grid.clone(),
            analytic: self.analytic,
            system,
        }
    }
}

impl LinearProblem {
    /// Wraps an arbitrary finite matrix; the grid is the midpoint grid of
    /// its column count.
    pub fn from_matrix(name: impl Into<String>, a: Matrix) -> Result<Self> {
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Size("operator must be nonempty".into()));
        }
        if !a.is_finite() {
            return Err(Error::Input("operator entries must be finite".into()));
        }
        let grid = midpoint_grid(a.cols());
        Ok(Self {
            name: name.into(),
            a,
            grid,
            analytic: None,
            system: OnceLock::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn analytic_system(&self) -> Option<AnalyticSystem> {
        self.analytic
    }

    /// Singular system of the discrete operator, computed on first use.
    pub fn system(&self) -> &SingularSystem {
        self.system
            .get_or_init(|| svd(&self.a).expect("operator entries are finite by construction"))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }

    /// `√h`-scaled samples of the analytic right singular function `v_k`.
    pub fn sampled_v(&self, k: usize) -> Option<Vec<f64>> {
        let sys = self.analytic?;
        let sh = self.step().sqrt();
        Some(self.grid.iter().map(|&t| sh * sys.v(k, t)).collect())
    }

    /// `√h`-scaled samples of the analytic left singular function `u_k`.
    pub fn sampled_u(&self, k: usize) -> Option<Vec<f64>> {
        let sys = self.analytic?;
        let sh = self.step().sqrt();
        Some(self.grid.iter().map(|&t| sh * sys.u(k, t)).collect())
    }

    /// Samples a function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.grid.iter().map(|&t| f(t)).collect()
    }
}

pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// Discretized integration operator `(Kx)(t) = ∫₀ᵗ x(s) ds`.
///
/// Row `i` integrates up to the cell midpoint `t_i`: weight `h` for every
/// earlier cell and `h/2` for the cell itself.
pub fn make_integration_operator(n: usize) -> Result<LinearProblem> {
    if n < 4 {
        return Err(Error::Size(format!("integration operator needs n >= 4, got {n}")));
    }
    let h = 1.0 / n as f64;
    let a = Matrix::from_fn(n, n, |i, j| match j.cmp(&i) {
        std::cmp::Ordering::Less => h,
        std::cmp::Ordering::Equal => h / 2.0,
        std::cmp::Ordering::Greater => 0.0,
    });
    let mut p = LinearProblem::from_matrix("integration", a)?;
    p.analytic = Some(AnalyticSystem::Integration);
    Ok(p)
}

/// Integration operator observed at `factor·n` midpoints of a finer data
/// grid. Row `i` integrates `x` exactly up to `s_i`, scaled by
/// `√(1/factor)` so that data-space sums approximate `L²` norms. The range
/// has dimension `n` inside `ℝ^{factor·n}`, so generic noise has a
/// component outside it.
pub fn make_oversampled_integration(n: usize, factor: usize) -> Result<LinearProblem> {
    if n < 4 || factor == 0 {
        return Err(Error::Size(format!(
            "oversampled integration needs n >= 4 and factor >= 1, got {n}, {factor}"
        )));
    }
    let m = n * factor;
    let h = 1.0 / n as f64;
    let w = (1.0 / factor as f64).sqrt();
    let a = Matrix::from_fn(m, n, |i, j| {
        let s = (i as f64 + 0.5) / m as f64;
        let lo = j as f64 * h;
        w * (s - lo).clamp(0.0, h)
    });
    LinearProblem::from_matrix("oversampled_integration", a)
}

/// Discretized integral operator `(Kx)(t) = ∫₀¹ k(s, t) x(s) ds` with the
/// midpoint rule: `A_ij = h·kernel(t_j, t_i)`.
pub fn make_kernel_operator(n: usize, kernel: impl Fn(f64, f64) -> f64) -> Result<LinearProblem> {
    if n == 0 {
        return Err(Error::Size("kernel operator needs n >= 1".into()));
    }
    let grid = midpoint_grid(n);
    let h = 1.0 / n as f64;
    let a = Matrix::from_fn(n, n, |i, j| h * kernel(grid[j], grid[i]));
    LinearProblem::from_matrix("kernel", a)
}

/// A solution satisfying the source condition `x† = |K|^ν w`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub x_dag: Vec<f64>,
    pub nu: f64,
    pub rho: f64,
    pub w: Vec<f64>,
}

/// Builds `x† = |K|^ν w = Σ σ_k^ν ⟨w, v_k⟩ v_k` and records `ρ = ‖w‖`.
///
/// For `ν = 0` the result is the projection of `w` onto `N(K)^⊥`.
pub fn make_ground_truth(problem: &LinearProblem, nu: f64, w: &[f64]) -> Result<GroundTruth> {
    ground_truth_from_system(problem.system(), nu, w)
}

pub fn ground_truth_from_system(sys: &SingularSystem, nu: f64, w: &[f64]) -> Result<GroundTruth> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Parameter(format!("source order must be >= 0, got {nu}")));
    }
    if w.len() != sys.cols() {
        return Err(Error::Shape(format!(
            "representer has length {}, operator has {} columns",
            w.len(),
            sys.cols()
        )));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("source representer must be finite".into()));
    }
    let coeffs: Vec<f64> = sys
        .v_coefficients(w)
        .iter()
        .zip(sys.sigma())
        .map(|(c, s)| s.powf(nu) * c)
        .collect();
    Ok(GroundTruth {
        x_dag: sys.synthesize_v(&coeffs),
        nu,
        rho: norm(w),
        w: w.to_vec(),
    })
}

/// Returns `y + δ ξ/‖ξ‖` for a Gaussian draw `ξ`, so that `‖y^δ − y‖ = δ`.
pub fn add_noise_exact(y: &[f64], delta: f64, src: &mut RandomSource) -> Result<Vec<f64>> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Parameter(format!("noise level must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(y.to_vec());
    }
    let xi = loop {
        let xi = src.gaussian_vector(y.len());
        if norm(&xi) > 0.0 {
            break xi;
        }
    };
    let s = delta / norm(&xi);
    Ok(y.iter().zip(&xi).map(|(a, b)| a + s * b).collect())
}

/// A differentiable nonlinear forward operator.
///
/// Evaluations are admitted inside the Euclidean ball of radius
/// [`domain_radius`](NonlinearProblem::domain_radius) around the origin.
pub trait NonlinearProblem: Send + Sync {
    fn name(&self) -> &str;

    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn forward(&self, x: &[f64]) -> Vec<f64>;

    /// Fréchet derivative `F′(x)` as an `output_dim × input_dim` matrix.
    fn derivative(&self, x: &[f64]) -> Matrix;

    fn domain_radius(&self) -> f64;

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.input_dim() && norm(x) <= self.domain_radius()
    }

    /// Closed-form solution of `F(x) = y` when the problem has one.
    fn exact_inverse(&self, _y: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Discrete autoconvolution `F(x)(t) = ∫₀ᵗ x(s) x(t − s) ds`:
/// `F(x)_i = h Σ_{j ≤ i} x_j x_{i−j+1}` (one-based).
#[derive(Debug, Clone)]
pub struct Autoconvolution {
    n: usize,
    radius: f64,
}

/// Autoconvolution on `n` grid cells. The admissible domain is the ball of
/// radius `10·√n` (grid functions bounded by 10 in root-mean-square).
pub fn make_autoconvolution(n: usize) -> Result<Autoconvolution> {
    if n < 4 {
        return Err(Error::Size(format!("autoconvolution needs n >= 4, got {n}")));
    }
    Ok(Autoconvolution {
        n,
        radius: 10.0 * (n as f64).sqrt(),
    })
}

impl Autoconvolution {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }
}

impl NonlinearProblem for Autoconvolution {
    fn name(&self) -> &str {
        "autoconvolution"
    }

    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.n
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let h = self.step();
        (0..self.n)
            .map(|i| h * (0..=i).map(|j| x[j] * x[i - j]).sum::<f64>())
            .collect()
    }

    fn derivative(&self, x: &[f64]) -> Matrix {
        assert_eq!(x.len(), self.n);
        let h = self.step();
        Matrix::from_fn(self.n, self.n, |i, k| if k <= i { 2.0 * h * x[i - k] } else { 0.0 })
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }
}

/// Diagonal operator with cubic nonlinearity `F(x)_k = σ_k (x_k + c x_k³)`.
#[derive(Debug, Clone)]
pub struct DiagonalCubic {
    sigma: Vec<f64>,
    c: f64,
    radius: f64,
}

/// Diagonal cubic problem; the admissible domain is the ball of radius
/// `√dim`, or `1/√(3|c|)`-limited per coordinate when `c < 0` so that the
/// derivative stays positive.
pub fn make_diagonal_cubic(sigma: &[f64], c: f64) -> Result<DiagonalCubic> {
    if sigma.is_empty() {
        return Err(Error::Size("diagonal cubic needs at least one mode".into()));
    }
    if sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Parameter("diagonal cubic needs positive finite σ_k".into()));
    }
    if !c.is_finite() {
        return Err(Error::Parameter("nonlinearity coefficient must be finite".into()));
    }
    let mut radius = (sigma.len() as f64).sqrt();
    if c < 0.0 {
        radius = radius.min(0.99 / (3.0 * c.abs()).sqrt());
    }
    Ok(DiagonalCubic {
        sigma: sigma.to_vec(),
        c,
        radius,
    })
}

impl DiagonalCubic {
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn coefficient(&self) -> f64 {
        self.c
    }
}

impl NonlinearProblem for DiagonalCubic {
    fn name(&self) -> &str {
        "diagonal_cubic"
    }

    fn input_dim(&self) -> usize {
        self.sigma.len()
    }

    fn output_dim(&self) -> usize {
        self.sigma.len()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.sigma.len());
        x.iter()
            .zip(&self.sigma)
            .map(|(&xk, &s)| s * (xk + self.c * xk * xk * xk))
            .collect()
    }

    fn derivative(&self, x: &[f64]) -> Matrix {
        assert_eq!(x.len(), self.sigma.len());
        let d: Vec<f64> = x
            .iter()
            .zip(&self.sigma)
            .map(|(&xk, &s)| s * (1.0 + 3.0 * self.c * xk * xk))
            .collect();
        Matrix::from_diagonal(&d)
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }

    /// Coordinatewise Newton solve of `σ_k (x + c x³) = y_k`, valid for `c ≥ 0`
    /// where each scalar map is strictly increasing.
    fn exact_inverse(&self, y: &[f64]) -> Option<Vec<f64>> {
        if self.c < 0.0 || y.len() != self.sigma.len() {
            return None;
        }
        Some(
            y.iter()
                .zip(&self.sigma)
                .map(|(&yk, &s)| {
                    let target = yk / s;
                    let mut x = target;
                    for _ in 0..100 {
                        let f = x + self.c * x * x * x - target;
                        let step = f / (1.0 + 3.0 * self.c * x * x);
                        x -= step;
                        if step.abs() <= 1e-16 * (1.0 + x.abs()) {
                            break;
                        }
                    }
                    x
                })
                .collect(),
        )
    }
}

/// A linear operator viewed as a nonlinear problem with constant derivative.
#[derive(Debug, Clone)]
pub struct LinearForward {
    a: Matrix,
    radius: f64,
}

impl LinearForward {
    pub fn new(a: Matrix) -> Self {
        Self {
            a,
            radius: f64::INFINITY,
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }
}

impl NonlinearProblem for LinearForward {
    fn name(&self) -> &str {
        "linear"
    }

    fn input_dim(&self) -> usize {
        self.a.cols()
    }

    fn output_dim(&self) -> usize {
        self.a.rows()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x)
    }

    fn derivative(&self, _x: &[f64]) -> Matrix {
        self.a.clone()
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }
}

/// Angle in radians between the lines spanned by `a` and `b` (sign-blind).
pub fn subspace_angle(a: &[f64], b: &[f64]) -> f64 {
    let c = (dot(a, b).abs() / (norm(a) * norm(b))).min(1.0);
    c.acos()
}
