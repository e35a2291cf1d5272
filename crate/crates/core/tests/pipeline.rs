use illposed_core::choice::{geometric_grid, morozov_tikhonov};
use illposed_core::experiment::{csv_string, fit_rate, parse_csv, run_experiment, Aggregate, ExperimentConfig};
use illposed_core::linalg::{distance, norm, Matrix, RandomSource};
use illposed_core::pinv::{min_norm_solution, picard_diagnostic, PicardVerdict};
use illposed_core::problems::make_integration_operator;
use illposed_core::spectral::{filter_apply, Filter};
use proptest::prelude::*;

fn noisy(y: &[f64], delta: f64, seed: u64) -> Vec<f64> {
    let mut src = RandomSource::new(seed);
    let e = src.gaussian_vector(y.len());
    let s = delta / norm(&e);
    y.iter().zip(&e).map(|(a, b)| a + s * b).collect()
}

#[test]
fn discrepancy_tikhonov_error_shrinks_with_noise() {
    let p = make_integration_operator(128).unwrap();
    let x: Vec<f64> = p.grid().iter().map(|t| t * (1.0 - t)).collect();
    let y = p.matrix().mul_vec(&x);
    let alphas = geometric_grid(1.0, 0.7, 80).unwrap();
    let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&delta| {
            let yd = noisy(&y, delta, 5);
            let pick = morozov_tikhonov(p.matrix(), &yd, delta, 1.5, &alphas).unwrap();
            assert!(pick.residual.unwrap() <= 1.5 * delta * (1.0 + 1e-12));
            let xa = filter_apply(&Filter::Tikhonov, pick.alpha, p.system(), &yd).unwrap();
            distance(&xa, &x)
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn picard_separates_exact_from_noisy_data() {
    let p = make_integration_operator(128).unwrap();
    let x: Vec<f64> = p.grid().iter().map(|t| 1.0 + t - t * t).collect();
    let y = p.matrix().mul_vec(&x);
    let clean = picard_diagnostic(p.system(), &y);
    assert_ne!(clean.verdict, PicardVerdict::Diverging);
    let dirty = picard_diagnostic(p.system(), &noisy(&y, 1e-2, 9));
    assert_eq!(dirty.verdict, PicardVerdict::Diverging);
}

#[test]
fn experiment_round_trips_through_csv() {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "problem": {"name": "integration", "n": 64},
            "truth": {"nu": 1.0, "rho": 1.0},
            "method": "tsvd",
            "rule": "morozov",
            "delta_grid": {"start": 0.01, "factor": 0.2, "count": 4},
            "seeds": {"master": 3, "realizations": 3}
        }"#,
    )
    .unwrap();
    let records = run_experiment(&cfg).unwrap();
    let text = csv_string(&records, cfg.tau).unwrap();
    let back = parse_csv(&text).unwrap();
    assert_eq!(back, records);
    let a = fit_rate(&records, Aggregate::Median).unwrap();
    let b = fit_rate(&back, Aggregate::Median).unwrap();
    assert_eq!(a, b);
    assert!(a.slope > 0.0);
}

proptest! {
    #[test]
    fn min_norm_solution_satisfies_normal_equations(
        rows in 2usize..8,
        cols in 2usize..8,
        seed in any::<u64>(),
    ) {
        let mut src = RandomSource::new(seed);
        let a = Matrix::from_fn(rows, cols, |_, _| src.standard_normal());
        let y = src.gaussian_vector(rows);
        let x = min_norm_solution(&a, &y).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&y).map(|(p, q)| p - q).collect();
        let g = a.tr_mul_vec(&r);
        prop_assert!(norm(&g) <= 1e-9 * (1.0 + norm(&y)) * a.frobenius_norm().powi(2));
    }
}
