use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, ProblemName, Representer, Rule};
use crate::bayes::{cm_monte_carlo, map_estimate};
use crate::choice::{apriori_alpha, hanke_raus, l_curve, morozov_from_residuals, quasi_optimality, ChoiceOutcome};
use crate::error::{Error, Result};
use crate::linalg::{distance, norm, scale, splitmix64, sub, svd, Matrix, RandomSource, SingularSystem};
use crate::nonlinear::{irgn, levenberg_marquardt, nl_landweber, IrgnOptions, LandweberOptions, LmOptions, StopReason};
use crate::problems::{
    add_noise_exact, ground_truth_from_system, make_autoconvolution, make_diagonal_cubic,
    make_integration_operator, midpoint_grid, AnalyticSystem, LinearForward, NonlinearProblem,
};
use crate::projection::{apriori_dimension, dual_lsq_projection, lsq_projection, smallest_projected_singular, Subspace};
use crate::spectral::{default_omega, filter_apply, landweber_run, Filter, LandweberStop};
use crate::statistics::{pinsker, simulate_sequence, SequenceModel};

/// One regularized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub delta: f64,
    /// Regularization parameter, stopping index or dimension, by method.
    pub alpha_or_n: f64,
    /// `‖x_out − x†‖`
    pub error: f64,
    pub residual: f64,
    pub rule: Rule,
    pub method: Method,
    pub seed: u64,
    pub realization: usize,
    pub wall_ms: f64,
}

/// Seed of realization `i`: `master ⊕ splitmix64(i)`.
pub fn realization_seed(master: u64, i: usize) -> u64 {
    master ^ splitmix64(i as u64)
}

enum Forward {
    Linear(Matrix),
    Nonlinear(Box<dyn NonlinearProblem>),
}

struct Setup {
    forward: Forward,
    /// Singular system of `A`, or of `F′(x₀)` for nonlinear problems.
    sys: SingularSystem,
    x_dag: Vec<f64>,
    x0: Vec<f64>,
    y: Vec<f64>,
    /// Haar family for the projection methods.
    haar: Vec<Vec<f64>>,
}

fn representer(kind: &Representer, sys: &SingularSystem, rho: f64) -> Result<Vec<f64>> {
    let n = sys.cols();
    let w = match kind {
        Representer::Power { exponent } => {
            let c: Vec<f64> = (1..=sys.rank()).map(|k| (k as f64).powf(-exponent)).collect();
            sys.synthesize_v(&c)
        }
        Representer::Seed { seed } => RandomSource::new(*seed).gaussian_vector(n),
        Representer::Smooth => midpoint_grid(n).iter().map(|t| 1.0 + t - t * t).collect(),
    };
    let s = norm(&w);
    if !(s > 0.0) {
        return Err(Error::Internal("source representer vanished".into()));
    }
    Ok(scale(rho / s, &w))
}

/// Orthonormal discrete Haar vectors on `n` points: the constant, then
/// `+/−` splits of ever finer index blocks, breadth first.
pub fn haar_vectors(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mut blocks = std::collections::VecDeque::from([(0usize, n)]);
    while let Some((lo, hi)) = blocks.pop_front() {
        let len = hi - lo;
        if len < 2 {
            continue;
        }
        let mid = lo + len / 2;
        let (a, b) = ((mid - lo) as f64, (hi - mid) as f64);
        let mut v = vec![0.0; n];
        let (pa, pb) = ((b / (a * (a + b))).sqrt(), (a / (b * (a + b))).sqrt());
        v[lo..mid].iter_mut().for_each(|x| *x = pa);
        v[mid..hi].iter_mut().for_each(|x| *x = -pb);
        out.push(v);
        blocks.push_back((lo, mid));
        blocks.push_back((mid, hi));
    }
    out
}

fn build(cfg: &ExperimentConfig) -> Result<Setup> {
    let n = cfg.problem.n;
    let nonlinear = matches!(cfg.method, Method::NlLandweber | Method::Lm | Method::Irgn);
    let (forward, x0): (Forward, Vec<f64>) = match cfg.problem.name {
        ProblemName::Integration => {
            let a = make_integration_operator(n)?.matrix().clone();
            if nonlinear {
                (Forward::Nonlinear(Box::new(LinearForward::new(a))), vec![0.0; n])
            } else {
                (Forward::Linear(a), vec![0.0; n])
            }
        }
        ProblemName::Autoconvolution => (Forward::Nonlinear(Box::new(make_autoconvolution(n)?)), vec![1.0; n]),
        ProblemName::DiagonalCubic => {
            let sigma: Vec<f64> = (1..=n).map(|k| AnalyticSystem::Integration.sigma(k)).collect();
            (Forward::Nonlinear(Box::new(make_diagonal_cubic(&sigma, cfg.problem.c)?)), vec![0.0; n])
        }
    };
    let sys = match &forward {
        Forward::Linear(a) => svd(a)?,
        Forward::Nonlinear(p) => svd(&p.derivative(&x0))?,
    };
    let w = representer(&cfg.truth.w, &sys, cfg.truth.rho)?;
    let truth = ground_truth_from_system(&sys, cfg.truth.nu, &w)?;
    let x_dag: Vec<f64> = truth.x_dag.iter().zip(&x0).map(|(a, b)| a + b).collect();
    let y = match &forward {
        Forward::Linear(a) => a.mul_vec(&x_dag),
        Forward::Nonlinear(p) => {
            if !p.contains(&x_dag) {
                return Err(Error::Validation {
                    field: "truth.rho".into(),
                    message: "true solution leaves the admissible domain".into(),
                });
            }
            p.forward(&x_dag)
        }
    };
    let haar = if matches!(cfg.method, Method::LsqProj | Method::DualLsqProj) {
        haar_vectors(n)
    } else {
        Vec::new()
    };
    Ok(Setup {
        forward,
        sys,
        x_dag,
        x0,
        y,
        haar,
    })
}

struct Solve {
    x: Vec<f64>,
    alpha_or_n: f64,
    residual: f64,
}

fn alpha_grid(cfg: &ExperimentConfig, sys: &SingularSystem) -> Vec<f64> {
    match &cfg.options.alpha_grid {
        Some(g) => g.values(),
        None => {
            let s1 = sys.sigma()[0];
            (0..60).map(|k| s1 * s1 * 0.5f64.powi(k)).collect()
        }
    }
}

fn spectral(cfg: &ExperimentConfig, s: &Setup, a: &Matrix, y: &[f64], delta: f64) -> Result<Solve> {
    let filter = if cfg.method == Method::Tsvd {
        Filter::Tsvd
    } else {
        Filter::Tikhonov
    };
    let alpha = match cfg.rule {
        Rule::Apriori => apriori_alpha(delta, cfg.truth.rho, cfg.truth.nu, cfg.options.apriori_c)?,
        Rule::None => cfg.options.alpha.expect("validated"),
        rule => {
            let alphas = alpha_grid(cfg, &s.sys);
            let solutions = alphas
                .iter()
                .map(|&al| filter_apply(&filter, al, &s.sys, y))
                .collect::<Result<Vec<_>>>()?;
            let residuals: Vec<f64> = solutions.iter().map(|x| distance(&a.mul_vec(x), y)).collect();
            let outcome: ChoiceOutcome = match rule {
                Rule::Morozov => {
                    let slack = 1e-12 * residuals.iter().cloned().fold(0.0, f64::max);
                    if residuals.windows(2).any(|w| w[1] > w[0] + slack) {
                        return Err(Error::Internal("residual is not monotone along the grid".into()));
                    }
                    morozov_from_residuals(&alphas, &residuals, delta, cfg.tau)?
                }
                Rule::Quasiopt => quasi_optimality(&alphas, &solutions)?,
                Rule::HankeRaus => hanke_raus(&alphas, &residuals)?,
                _ => {
                    let norms: Vec<f64> = solutions.iter().map(|x| norm(x)).collect();
                    l_curve(&alphas, &residuals, &norms)?
                }
            };
            outcome.alpha
        }
    };
    let x = filter_apply(&filter, alpha, &s.sys, y)?;
    let residual = distance(&a.mul_vec(&x), y);
    Ok(Solve {
        x,
        alpha_or_n: alpha,
        residual,
    })
}

fn landweber(cfg: &ExperimentConfig, a: &Matrix, y: &[f64], delta: f64) -> Result<Solve> {
    let omega = default_omega(a);
    let max_iter = cfg.options.max_iter;
    let steps = |alpha: f64| ((1.0 / (omega * alpha)).ceil() as usize).clamp(1, max_iter);
    let stop = match cfg.rule {
        Rule::Apriori => LandweberStop::Iterations(steps(apriori_alpha(
            delta,
            cfg.truth.rho,
            cfg.truth.nu,
            cfg.options.apriori_c,
        )?)),
        Rule::Morozov => LandweberStop::Discrepancy {
            delta,
            tau: cfg.tau,
            max_iter,
        },
        _ => LandweberStop::Iterations(steps(cfg.options.alpha.expect("validated"))),
    };
    let run = landweber_run(a, y, Some(omega), stop, None)?;
    if cfg.rule == Rule::Morozov && !run.discrepancy_reached {
        return Err(Error::Budget(max_iter));
    }
    Ok(Solve {
        residual: *run.residuals.last().expect("nonempty"),
        alpha_or_n: run.iterations as f64,
        x: run.x,
    })
}

fn projection(cfg: &ExperimentConfig, s: &Setup, a: &Matrix, y: &[f64], delta: f64) -> Result<Solve> {
    let n_max = s.haar.len();
    let subspace = |k: usize| Subspace::new(a.cols(), &s.haar[..k]);
    let solve = |k: usize| -> Result<Vec<f64>> {
        let sub = subspace(k)?;
        if cfg.method == Method::LsqProj {
            Ok(lsq_projection(a, y, &sub)?.x)
        } else {
            dual_lsq_projection(a, y, &sub)
        }
    };
    let dim = match cfg.rule {
        Rule::None => cfg.options.dimension.expect("validated"),
        Rule::Apriori => {
            let threshold = cfg.options.apriori_c * delta;
            let mut mu = Vec::new();
            for k in 1..=n_max {
                let sub = subspace(k)?;
                let m = if cfg.method == Method::LsqProj {
                    let b = a.matmul(&sub.matrix());
                    *svd(&b)?.sigma().last().unwrap_or(&0.0)
                } else {
                    smallest_projected_singular(a, &sub)?
                };
                // interlacing makes μ_n nonincreasing up to rounding
                let m = mu.last().map_or(m, |&prev: &f64| m.min(prev));
                mu.push(m);
                if m <= threshold {
                    break;
                }
            }
            let choice = apriori_dimension(threshold, &mu)?;
            if choice.no_reliable_mode() {
                return Err(Error::Parameter(format!(
                    "no projected singular value exceeds {threshold:e}"
                )));
            }
            choice.n
        }
        _ => {
            let bound = cfg.tau * delta;
            let mut found = None;
            let mut last = f64::INFINITY;
            for k in 1..=n_max {
                let x = solve(k)?;
                last = distance(&a.mul_vec(&x), y);
                if last <= bound {
                    found = Some(k);
                    break;
                }
            }
            found.ok_or(Error::Exhausted { residual: last, bound })?
        }
    };
    let x = solve(dim)?;
    let residual = distance(&a.mul_vec(&x), y);
    Ok(Solve {
        x,
        alpha_or_n: dim as f64,
        residual,
    })
}

fn nonlinear(cfg: &ExperimentConfig, s: &Setup, p: &dyn NonlinearProblem, y: &[f64], delta: f64) -> Result<Solve> {
    let reference = Some(s.x_dag.clone());
    let max_iter = cfg.options.max_iter;
    let delta_rule = if cfg.rule == Rule::None { 0.0 } else { delta };
    let trace = match cfg.method {
        Method::NlLandweber => {
            let mut opts = LandweberOptions::new(max_iter);
            opts.eta = cfg.options.eta;
            opts.reference = reference;
            nl_landweber(p, y, delta_rule, cfg.tau, &s.x0, &opts)?
        }
        Method::Lm => levenberg_marquardt(
            p,
            y,
            delta_rule,
            cfg.tau,
            cfg.sigma_lm,
            &s.x0,
            &LmOptions { max_iter, reference },
        )?,
        _ => irgn(
            p,
            y,
            delta,
            cfg.tau,
            &s.x0,
            &IrgnOptions {
                alpha0: cfg.options.irgn_alpha0,
                q: cfg.options.irgn_q,
                nu: cfg.truth.nu,
                max_iter,
                reference,
            },
        )?,
    };
    if cfg.rule == Rule::Morozov && trace.stop_reason != StopReason::Discrepancy {
        return Err(Error::Budget(max_iter));
    }
    Ok(Solve {
        residual: *trace.residuals.last().expect("nonempty"),
        alpha_or_n: trace.stop_index as f64,
        x: trace.x,
    })
}

fn statistical(cfg: &ExperimentConfig, s: &Setup, a: &Matrix, delta: f64, src: &mut RandomSource) -> Result<Solve> {
    if cfg.method == Method::Pinsker {
        let coeffs = s.sys.v_coefficients(&s.x_dag);
        let model = SequenceModel::new(s.sys.sigma().to_vec(), coeffs, delta)?;
        let data = simulate_sequence(&model, src);
        let sol = pinsker(s.sys.sigma(), cfg.truth.nu, cfg.truth.rho, delta)?;
        let est = sol.estimator().apply(&data);
        let x = s.sys.synthesize_v(&est);
        let residual = norm(
            &s.sys
                .sigma()
                .iter()
                .zip(est.iter().zip(&data))
                .map(|(sg, (e, d))| sg * (e - d))
                .collect::<Vec<_>>(),
        );
        return Ok(Solve {
            x,
            alpha_or_n: sol.active as f64,
            residual,
        });
    }
    let noise = scale(delta, &src.gaussian_vector(s.y.len()));
    let y: Vec<f64> = s.y.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let sigma = cfg.options.sigma_prior.unwrap_or(cfg.truth.rho);
    let x = if cfg.method == Method::Map {
        map_estimate(a, &y, delta, sigma)?
    } else {
        cm_monte_carlo(a, &y, delta, sigma, cfg.options.mc_samples, src)?.estimate
    };
    let residual = distance(&a.mul_vec(&x), &y);
    Ok(Solve {
        x,
        alpha_or_n: delta * delta / (sigma * sigma),
        residual,
    })
}

fn one(cfg: &ExperimentConfig, s: &Setup, delta: f64, realization: usize) -> Result<RunRecord> {
    let seed = realization_seed(cfg.seeds.master, realization);
    let mut src = RandomSource::new(seed);
    let start = Instant::now();
    let solve = match &s.forward {
        Forward::Nonlinear(p) => {
            let y = add_noise_exact(&s.y, delta, &mut src)?;
            nonlinear(cfg, s, p.as_ref(), &y, delta)?
        }
        Forward::Linear(a) => match cfg.method {
            Method::Pinsker | Method::Map | Method::Cm => statistical(cfg, s, a, delta, &mut src)?,
            method => {
                let y = add_noise_exact(&s.y, delta, &mut src)?;
                match method {
                    Method::Tsvd | Method::Tikhonov => spectral(cfg, s, a, &y, delta)?,
                    Method::Landweber => landweber(cfg, a, &y, delta)?,
                    _ => projection(cfg, s, a, &y, delta)?,
                }
            }
        },
    };
    let wall_ms = if cfg.options.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(RunRecord {
        delta,
        alpha_or_n: solve.alpha_or_n,
        error: norm(&sub(&solve.x, &s.x_dag)),
        residual: solve.residual,
        rule: cfg.rule,
        method: cfg.method,
        seed,
        realization,
        wall_ms,
    })
}

/// Checks finiteness, nonnegativity and, for discrepancy rules, `residual ≤ τδ`.
pub fn check_records(records: &[RunRecord], tau: f64) -> Result<()> {
    for r in records {
        let fields = [r.delta, r.alpha_or_n, r.error, r.residual, r.wall_ms];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Internal(format!("record has a negative or non-finite field: {r:?}")));
        }
        if r.rule.is_discrepancy() && r.residual > tau * r.delta * (1.0 + 1e-12) {
            return Err(Error::Internal(format!(
                "discrepancy record violates residual <= tau*delta: {} > {}",
                r.residual,
                tau * r.delta
            )));
        }
    }
    Ok(())
}

/// Runs every `(δ, realization)` pair. Records come back ordered by
/// decreasing `δ`, then realization, whatever the execution order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let setup = build(cfg).map_err(|e| match e {
        Error::Validation { .. } => e,
        e => e.context(format!("building problem {:?}", cfg.problem.name)),
    })?;
    let deltas = cfg.delta_grid.values();
    let jobs: Vec<(f64, usize)> = deltas
        .iter()
        .flat_map(|&d| (0..cfg.seeds.realizations).map(move |r| (d, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(d, r)| {
            one(cfg, &setup, d, r).map_err(|e| {
                e.context(format!(
                    "{} + {} at delta {d:e}, realization {r}",
                    cfg.method.as_str(),
                    cfg.rule.as_str()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    check_records(&records, cfg.tau)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    fn config(method: &str, rule: &str, count: usize, realizations: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
            "problem": {{"name": "integration", "n": 64}},
            "truth": {{"nu": 1.0, "rho": 1.0}},
            "method": "{method}",
            "rule": "{rule}",
            "delta_grid": {{"start": 0.01, "factor": 0.3, "count": {count}}},
            "seeds": {{"master": 2024, "realizations": {realizations}}},
            "options": {{"alpha": 1e-3, "dimension": 8, "mc_samples": 2000, "max_iter": 20000}}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn single_record() {
        let recs = run_experiment(&config("tikhonov", "apriori", 1, 1)).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert!(r.error.is_finite() && r.residual.is_finite() && r.alpha_or_n > 0.0);
        assert_eq!(r.seed, realization_seed(2024, 0));
    }

    #[test]
    fn ordering_and_cardinality() {
        let recs = run_experiment(&config("tsvd", "morozov", 5, 3)).unwrap();
        assert_eq!(recs.len(), 15);
        for w in recs.windows(2) {
            assert!(w[0].delta > w[1].delta || (w[0].delta == w[1].delta && w[0].realization < w[1].realization));
        }
        for r in &recs {
            assert!(r.residual <= 1.5 * r.delta);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = config("landweber", "morozov", 2, 2);
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    }

    #[test]
    fn every_linear_method_runs() {
        for (m, r) in [
            ("tikhonov", "quasiopt"),
            ("tikhonov", "hanke_raus"),
            ("tsvd", "l_curve"),
            ("tikhonov", "none"),
            ("landweber", "apriori"),
            ("lsq_proj", "morozov"),
            ("dual_lsq_proj", "apriori"),
            ("lsq_proj", "none"),
            ("pinsker", "apriori"),
            ("map", "none"),
        ] {
            let recs = run_experiment(&config(m, r, 2, 1)).unwrap_or_else(|e| panic!("{m}+{r}: {e}"));
            assert_eq!(recs.len(), 2, "{m}+{r}");
        }
    }

    #[test]
    fn nonlinear_methods_run() {
        let text = r#"{
            "problem": {"name": "diagonal_cubic", "n": 16},
            "truth": {"nu": 1.0, "rho": 1.0},
            "method": "METHOD",
            "rule": "RULE",
            "delta_grid": {"start": 0.01, "factor": 0.5, "count": 2},
            "tau": 2.0,
            "sigma_lm": 0.7,
            "seeds": {"master": 5, "realizations": 1}
        }"#;
        for (m, r) in [("nl_landweber", "morozov"), ("lm", "morozov"), ("irgn", "apriori")] {
            let cfg = ExperimentConfig::from_json(&text.replace("METHOD", m).replace("RULE", r)).unwrap();
            let recs = run_experiment(&cfg).unwrap_or_else(|e| panic!("{m}: {e}"));
            assert_eq!(recs.len(), 2);
        }
    }

    #[test]
    fn haar_vectors_are_orthonormal() {
        for n in [7, 16] {
            let h = haar_vectors(n);
            assert_eq!(h.len(), n);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&h[i], &h[j]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn seeds_mix_with_realization_index() {
        assert_eq!(realization_seed(0, 3), splitmix64(3));
        assert_ne!(realization_seed(1, 0), realization_seed(1, 1));
    }

    #[test]
    fn method_errors_carry_context() {
        let mut cfg = config("tikhonov", "morozov", 1, 1);
        cfg.options.alpha_grid = Some(super::super::config::GridConfig {
            start: 1.0,
            factor: 0.9,
            count: 2,
        });
        let err = run_experiment(&cfg).unwrap_err();
        assert!(matches!(err.root(), Error::Exhausted { .. }));
        assert!(err.to_string().contains("tikhonov + morozov"));
    }
}
