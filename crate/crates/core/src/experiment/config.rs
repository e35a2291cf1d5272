use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Integration,
    Autoconvolution,
    DiagonalCubic,
}

impl ProblemName {
    pub fn is_linear(&self) -> bool {
        matches!(self, ProblemName::Integration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tsvd,
    Tikhonov,
    Landweber,
    LsqProj,
    DualLsqProj,
    NlLandweber,
    Lm,
    Irgn,
    Pinsker,
    Map,
    Cm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tsvd => "tsvd",
            Method::Tikhonov => "tikhonov",
            Method::Landweber => "landweber",
            Method::LsqProj => "lsq_proj",
            Method::DualLsqProj => "dual_lsq_proj",
            Method::NlLandweber => "nl_landweber",
            Method::Lm => "lm",
            Method::Irgn => "irgn",
            Method::Pinsker => "pinsker",
            Method::Map => "map",
            Method::Cm => "cm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    fn is_nonlinear(&self) -> bool {
        matches!(self, Method::NlLandweber | Method::Lm | Method::Irgn)
    }

    fn rules(&self) -> &'static [Rule] {
        use Rule::*;
        match self {
            Method::Tsvd | Method::Tikhonov => &[Apriori, Morozov, Quasiopt, HankeRaus, LCurve, None],
            Method::Landweber | Method::LsqProj | Method::DualLsqProj => &[Apriori, Morozov, None],
            Method::NlLandweber | Method::Lm => &[Morozov, None],
            Method::Irgn => &[Apriori],
            Method::Pinsker => &[Apriori, None],
            Method::Map | Method::Cm => &[None],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Apriori,
    Morozov,
    Quasiopt,
    HankeRaus,
    LCurve,
    None,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::Apriori => "apriori",
            Rule::Morozov => "morozov",
            Rule::Quasiopt => "quasiopt",
            Rule::HankeRaus => "hanke_raus",
            Rule::LCurve => "l_curve",
            Rule::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    pub fn is_discrepancy(&self) -> bool {
        matches!(self, Rule::Morozov)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: ProblemName,
    pub n: usize,
    /// Cubic coefficient of the diagonal-cubic problem.
    #[serde(default = "default_cubic")]
    pub c: f64,
}

/// Source representer `w` in `x† − x₀ = |F′(x₀)|^ν w`, scaled to `‖w‖ = ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Representer {
    /// Singular-basis coefficients `w_k ∝ k^{−exponent}`.
    Power { exponent: f64 },
    /// Gaussian coefficients drawn from the given seed.
    Seed { seed: u64 },
    /// Grid samples of `1 + t − t²`.
    Smooth,
}

impl Default for Representer {
    fn default() -> Self {
        Representer::Power { exponent: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub nu: f64,
    pub rho: f64,
    #[serde(default)]
    pub w: Representer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.start * self.factor.powi(i as i32)).collect()
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.start > 0.0 && self.start.is_finite()) {
            return Err(invalid(format!("{field}.start"), "must be positive and finite"));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(invalid(
                format!("{field}.factor"),
                "must lie in (0, 1) so the grid is strictly decreasing",
            ));
        }
        if self.count == 0 {
            return Err(invalid(format!("{field}.count"), "must be at least 1"));
        }
        if self.values().iter().any(|v| !(*v > 0.0)) {
            return Err(invalid(format!("{field}.count"), "grid underflows to zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    pub master: u64,
    pub realizations: usize,
}

/// Method-specific knobs. Everything has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodOptions {
    /// Constant `c` in `α = c (δ/ρ)^{2/(ν+1)}`.
    pub apriori_c: f64,
    /// Fixed `α` for rule `none`.
    pub alpha: Option<f64>,
    /// Candidate grid for grid-based rules; defaults to `σ₁² · 0.5^k`, 60 points.
    pub alpha_grid: Option<GridConfig>,
    /// Fixed dimension for projection methods under rule `none`.
    pub dimension: Option<usize>,
    pub max_iter: usize,
    /// Prior standard deviation for `map` and `cm`; defaults to `ρ`.
    pub sigma_prior: Option<f64>,
    pub mc_samples: usize,
    pub irgn_alpha0: f64,
    pub irgn_q: f64,
    /// Tangential-cone constant passed to nonlinear Landweber.
    pub eta: Option<f64>,
    /// Record wall-clock milliseconds; off by default so output is byte-stable.
    pub timing: bool,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            apriori_c: 1.0,
            alpha: None,
            alpha_grid: None,
            dimension: None,
            max_iter: 100_000,
            sigma_prior: None,
            mc_samples: 10_000,
            irgn_alpha0: 1.0,
            irgn_q: 2.0,
            eta: None,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub truth: TruthConfig,
    pub method: Method,
    pub rule: Rule,
    pub delta_grid: GridConfig,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_sigma_lm")]
    pub sigma_lm: f64,
    pub seeds: SeedConfig,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub options: MethodOptions,
}

fn default_cubic() -> f64 {
    0.1
}

fn default_tau() -> f64 {
    1.5
}

fn default_sigma_lm() -> f64 {
    0.8
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split_once("field `")
                .and_then(|(_, rest)| rest.split_once('`'))
                .map(|(f, _)| f.to_string())
                .unwrap_or_else(|| "config".to_string());
            invalid(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.problem.n;
        if n < 4 {
            return Err(invalid("problem.n", format!("must be at least 4, got {n}")));
        }
        if !self.problem.c.is_finite() {
            return Err(invalid("problem.c", "must be finite"));
        }
        if !(self.truth.nu >= 0.0 && self.truth.nu.is_finite()) {
            return Err(invalid("truth.nu", "must be nonnegative and finite"));
        }
        if !(self.truth.rho > 0.0 && self.truth.rho.is_finite()) {
            return Err(invalid("truth.rho", "must be positive and finite"));
        }
        if let Representer::Power { exponent } = self.truth.w {
            if !exponent.is_finite() {
                return Err(invalid("truth.w.exponent", "must be finite"));
            }
        }
        self.delta_grid.validate("delta_grid")?;
        if self.seeds.realizations == 0 {
            return Err(invalid("seeds.realizations", "must be at least 1"));
        }
        if !self.problem.name.is_linear() && !self.method.is_nonlinear() {
            return Err(invalid(
                "method",
                format!("{} needs a linear problem", self.method.as_str()),
            ));
        }
        if !self.method.rules().contains(&self.rule) {
            return Err(invalid(
                "rule",
                format!("{} does not support rule {}", self.method.as_str(), self.rule.as_str()),
            ));
        }
        if self.rule == Rule::Apriori && !(self.truth.nu > 0.0) {
            return Err(invalid("truth.nu", "rule apriori needs nu > 0"));
        }
        let needs_tau = self.rule.is_discrepancy() || self.method == Method::Irgn;
        if needs_tau && !(self.tau > 1.0 && self.tau.is_finite()) {
            return Err(invalid("tau", format!("must exceed 1, got {}", self.tau)));
        }
        if self.method == Method::Lm {
            if !(self.sigma_lm > 0.0 && self.sigma_lm < 1.0) {
                return Err(invalid("sigma_lm", "must lie in (0, 1)"));
            }
            if !(self.tau * self.sigma_lm > 1.0) {
                return Err(invalid("sigma_lm", "tau * sigma_lm must exceed 1"));
            }
        }
        if self.method == Method::Irgn && !(1.0..=2.0).contains(&self.truth.nu) {
            return Err(invalid("truth.nu", "irgn needs nu in [1, 2]"));
        }
        let o = &self.options;
        if !(o.apriori_c > 0.0 && o.apriori_c.is_finite()) {
            return Err(invalid("options.apriori_c", "must be positive and finite"));
        }
        if self.rule == Rule::None {
            match self.method {
                Method::Tsvd | Method::Tikhonov | Method::Landweber => match o.alpha {
                    Some(a) if a > 0.0 && a.is_finite() => {}
                    _ => return Err(invalid("options.alpha", "rule none needs a positive alpha")),
                },
                Method::LsqProj | Method::DualLsqProj => match o.dimension {
                    Some(d) if d >= 1 && d <= n => {}
                    _ => return Err(invalid("options.dimension", format!("rule none needs 1 <= dimension <= {n}"))),
                },
                _ => {}
            }
        }
        if let Some(g) = &o.alpha_grid {
            g.validate("options.alpha_grid")?;
        }
        if o.max_iter == 0 {
            return Err(invalid("options.max_iter", "must be at least 1"));
        }
        if let Some(s) = o.sigma_prior {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("options.sigma_prior", "must be positive and finite"));
            }
        }
        if o.mc_samples < 2 {
            return Err(invalid("options.mc_samples", "must be at least 2"));
        }
        if !(o.irgn_alpha0 > 0.0) {
            return Err(invalid("options.irgn_alpha0", "must be positive"));
        }
        if !(o.irgn_q > 1.0) {
            return Err(invalid("options.irgn_q", "must exceed 1"));
        }
        if let Some(eta) = o.eta {
            if !(0.0..0.5).contains(&eta) {
                return Err(invalid("options.eta", "must lie in [0, 1/2)"));
            }
        }
        Ok(())
    }
}
