use posterior_lab::contraction::{
    error_identity, fit_loglog_slope, geometric_grid, operator_bound_probe, run_rate_experiment, spc_terms,
    tau_schedule, weighted_inverse_norm, weighted_mean_error, BoundQuery, RateExperiment, RateParams, RateTarget,
    Regime, TauRule, TruncationGuard,
};
use posterior_lab::error::LabError;
use posterior_lab::models::{build_diagonal, build_perturbed_laplacian_colored_noise, MultiplierSpec, ProblemSetup};
use posterior_lab::spectral::{CoefVector, Spectrum};
use posterior_lab::synthetic::{make_truth, standard_normal, RngSeed, StreamPurpose, TruthSpec};
use proptest::prelude::*;

fn diagonal(n_trunc: usize, tau: f64, n: f64) -> ProblemSetup<f64> {
    build_diagonal(&Spectrum::algebraic(n_trunc).unwrap(), 1.0, 0.5, 0.5, tau, n).unwrap()
}

fn dense(n_trunc: usize, tau: f64, n: f64) -> ProblemSetup<f64> {
    let rc = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    build_perturbed_laplacian_colored_noise(n_trunc, &rc, &rc, tau, n).unwrap()
}

fn diagonal_params(gamma: f64) -> RateParams {
    RateParams::new(gamma, 1.5, 0.5, 0.0, 0.5, 0.5).unwrap()
}

#[test]
fn error_identity_holds_per_realization() {
    for setup in [dense(64, 0.3, 500.0), diagonal(64, 0.3, 500.0)] {
        let truth = make_truth(&TruthSpec::with_gamma(1.0).unwrap(), &setup);
        for r in 0..10 {
            let xi = CoefVector::from_vector(standard_normal(&mut RngSeed(21).stream(r, StreamPurpose::Noise), 64));
            let (direct, formula) = error_identity(&setup, &truth, &xi).unwrap();
            assert!(direct.sub(&formula).norm() <= 1e-10 * formula.norm());
        }
    }
}

#[test]
fn weighted_error_at_zero_is_mise() {
    let setup = dense(32, 0.7, 80.0);
    let truth = make_truth(&TruthSpec::with_gamma(1.3).unwrap(), &setup);
    let t = spc_terms(&setup, &truth).unwrap();
    let w = weighted_mean_error(&setup, &truth, 0.0).unwrap();
    assert!((w - (t.spc - t.trace_term)).abs() <= 1e-12 * w);
    assert!(t.bias_sq >= 0.0 && t.variance >= 0.0 && t.trace_term >= 0.0);
    assert_eq!(t.spc, t.bias_sq + t.variance + t.trace_term);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn contraction_decreases_with_information(
        tau in 0.05f64..3.0,
        n in 1.0f64..1e6,
        factor in 1.01f64..100.0,
        gamma in 1.0f64..3.0,
    ) {
        let lo = diagonal(64, tau, n);
        let hi = diagonal(64, tau, n * factor);
        let spec = TruthSpec::with_gamma(gamma).unwrap();
        let a = spc_terms(&lo, &make_truth(&spec, &lo)).unwrap();
        let b = spc_terms(&hi, &make_truth(&spec, &hi)).unwrap();
        prop_assert!(b.spc <= a.spc * (1.0 + 1e-12));
    }

    #[test]
    fn bound_probe_depends_on_lambda_only(lambda in 1e-6f64..1.0, n in 1.0f64..1e4, theta in 0.0f64..1.0) {
        let a = diagonal(48, (1.0 / (n * lambda)).sqrt(), n);
        let b = diagonal(48, lambda.powf(-0.5), 1.0);
        let q = BoundQuery::into_energy_space(theta, a.params());
        let na = weighted_inverse_norm(&a, &q).unwrap();
        let nb = weighted_inverse_norm(&b, &q).unwrap();
        prop_assert!((na / nb - 1.0).abs() <= 1e-12);
        let da = weighted_inverse_norm(&dense(16, (1.0 / (n * lambda)).sqrt(), n), &q).unwrap();
        let db = weighted_inverse_norm(&dense(16, lambda.powf(-0.5), 1.0), &q).unwrap();
        prop_assert!((da / db - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn schedules_send_lambda_to_zero(gamma in 1.0f64..6.0, eps in 0.0f64..0.5) {
        let params = RateParams::new(gamma, 1.5, 0.5, eps, 0.5, 0.5).unwrap();
        for rule in [
            TauRule::Contraction(Regime::Moderate),
            TauRule::Contraction(Regime::Saturated),
            TauRule::MeanError(Regime::Minimal),
        ] {
            let s = tau_schedule(rule, params).unwrap();
            prop_assert!(s.exponent < 0.0 && s.exponent > -0.5);
            prop_assert!(s.lambda(1e8) < s.lambda(1e4));
        }
    }
}

#[test]
fn trace_term_stays_dominated_along_schedule() {
    let params = diagonal_params(1.0);
    let schedule = tau_schedule(TauRule::Contraction(Regime::Moderate), params).unwrap();
    let base = diagonal(512, 1.0, 1.0);
    let spec = TruthSpec::with_gamma(1.0).unwrap();
    let ratios: Vec<f64> = geometric_grid(1e3, 1e7, 5)
        .iter()
        .map(|&n| {
            let s = base.with_scaling(schedule.tau(n), n).unwrap();
            let t = spc_terms(&s, &make_truth(&spec, &s)).unwrap();
            t.trace_term / t.variance
        })
        .collect();
    for r in &ratios {
        assert!(*r <= 1.5 * ratios[0], "{ratios:?}");
    }
}

fn mean_error_slope(margin: f64, n_trunc: usize, eta: f64) -> f64 {
    let params = diagonal_params(1.0);
    let schedule = tau_schedule(TauRule::MeanError(Regime::Minimal), params).unwrap();
    let base = diagonal(n_trunc, 1.0, 1.0);
    let spec = TruthSpec::new(1.0, margin, 1.0).unwrap();
    let ns = geometric_grid(1e3, 1e9, 7);
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let s = base.with_scaling(schedule.tau(n), n).unwrap();
            weighted_mean_error(&s, &make_truth(&spec, &s), eta).unwrap()
        })
        .collect();
    fit_loglog_slope(&ns, &errs).unwrap().slope
}

#[test]
fn minimal_schedule_does_not_converge_in_energy_norm() {
    let theory = posterior_lab::contraction::theoretical_exponent(
        RateTarget::MeanError { theta: 1.0 },
        &diagonal_params(1.0),
    )
    .unwrap();
    assert_eq!(theory, 0.0);
    // The residual decay is a truncation effect: the energy-norm bias is a
    // tail sum between the filter cutoff and N, and it flattens as N grows.
    let slopes: Vec<f64> = [2048, 8192, 32768].iter().map(|&nt| mean_error_slope(0.01, nt, 1.0)).collect();
    assert!(slopes[0] > -0.1, "{slopes:?}");
    assert!(slopes.windows(2).all(|w| w[1] > w[0]), "{slopes:?}");
    let ambient = mean_error_slope(0.01, 2048, 0.0);
    assert!(ambient < 5.0 * slopes[0], "{ambient} vs {slopes:?}");
}

#[test]
fn energy_space_bound_on_diagonal_model() {
    let setup = diagonal(1024, 1.0, 1.0);
    let lambdas = geometric_grid(1.0, 1e-6, 8);
    let q = BoundQuery::into_energy_space(1.0, setup.params());
    let curve = operator_bound_probe(&setup, q, &lambdas).unwrap();
    for (l, v) in curve.lambdas.iter().zip(&curve.norms) {
        assert!(*v <= 1.0 / l * (1.0 + 1e-12));
    }
    assert!((-1.05..=-0.95).contains(&curve.fit.slope), "{}", curve.fit.slope);
}

#[test]
fn weak_space_bound_is_flat_at_theta_zero() {
    let setup = diagonal(1024, 1.0, 1.0);
    let q = BoundQuery::into_weak_space(0.0, setup.params());
    let curve = operator_bound_probe(&setup, q, &geometric_grid(1.0, 1e-6, 8)).unwrap();
    assert!(curve.fit.slope.abs() <= 0.05, "{}", curve.fit.slope);
}

#[test]
fn spread_bound_slope() {
    let setup = diagonal(2048, 1.0, 1.0);
    let s = 0.6;
    let q = BoundQuery::spread(s, setup.params());
    let curve = operator_bound_probe(&setup, q, &geometric_grid(1.0, 1e-6, 8)).unwrap();
    let reference = q.reference_slope.unwrap();
    assert!((reference + 1.1 / 1.5).abs() < 1e-15);
    assert!(curve.fit.slope >= reference - 0.05, "{} vs {}", curve.fit.slope, reference);
}

#[test]
fn exact_power_law_fit() {
    let xs = geometric_grid(1e3, 1e9, 7);
    let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x.powf(-0.5)).collect();
    let fit = fit_loglog_slope(&xs, &ys).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    assert!(fit.stderr.unwrap() < 1e-12);
}

fn experiment(n_trunc: usize, grid: Vec<f64>) -> RateExperiment<f64> {
    let params = diagonal_params(1.0);
    RateExperiment::new(
        diagonal(n_trunc, 1.0, 1.0),
        TruthSpec::with_gamma(1.0).unwrap(),
        tau_schedule(TauRule::Contraction(Regime::Moderate), params).unwrap(),
        grid,
        RateTarget::Contraction,
    )
}

#[test]
fn rate_grid_is_validated() {
    assert!(matches!(
        run_rate_experiment(&experiment(64, vec![1e3, 1e4, 1e5])),
        Err(LabError::TooFewPoints { needed: 4, got: 3 })
    ));
    assert!(run_rate_experiment(&experiment(64, vec![1e3, 1e4, 1e6, 1e7])).is_err());
    assert!(run_rate_experiment(&experiment(64, vec![1e4, 1e3, 1e2, 1e1])).is_err());
}

#[test]
fn coarse_truncation_trips_the_guard() {
    let err = run_rate_experiment(&experiment(32, geometric_grid(1e3, 1e9, 7))).unwrap_err();
    assert!(matches!(err, LabError::TruncationSensitivity { n_trunc: 32, .. }), "{err}");
}

#[test]
fn moderate_rate_experiment_reports_target() {
    let mut exp = experiment(1024, geometric_grid(1e2, 1e5, 4));
    exp.thetas = vec![0.0, 1.0];
    exp.guard = Some(TruncationGuard { n_check: 2048, tolerance: 0.01 });
    let result = run_rate_experiment(&exp).unwrap();
    assert_eq!(result.theoretical_exponent, 0.25);
    assert_eq!(result.target_slope, -0.5);
    assert_eq!(result.points.len(), 4);
    assert_eq!(result.mean_error_fits.len(), 2);
    assert!(result.guard.unwrap().relative_change < 0.01);
    assert!(result.truth_norm_drift.unwrap() > 0.0);
    assert!((result.fitted_slope() + 0.5).abs() < 0.1);
}
