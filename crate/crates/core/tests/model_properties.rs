use posterior_lab::assumptions::{verify_assumptions, AssumptionItem};
use posterior_lab::models::{
    build_diagonal, build_general, build_perturbed_laplacian, build_perturbed_laplacian_colored_noise,
    conjugated_multiplier_norm, dirichlet_spectrum, MultiplierSpec, ProblemSetup,
};
use posterior_lab::spectral::{OperatorRep, Spectrum};
use posterior_lab::synthetic::RngSeed;
use proptest::prelude::*;

fn entrywise_close(a: &OperatorRep<f64>, b: &OperatorRep<f64>, tol: f64) -> bool {
    let (a, b) = (a.to_dense(), b.to_dense());
    (a - &b).iter().zip(b.iter()).all(|(d, v)| d.abs() <= tol * v.abs().max(1e-300))
}

fn same_operators(a: &ProblemSetup<f64>, b: &ProblemSetup<f64>, tol: f64) -> bool {
    entrywise_close(a.a_inv(), b.a_inv(), tol)
        && entrywise_close(a.c0(), b.c0(), tol)
        && entrywise_close(a.c1(), b.c1(), tol)
}

#[test]
fn unperturbed_laplacian_matches_diagonal_builder() {
    let zero = MultiplierSpec::zero();
    let spectrum = dirichlet_spectrum(40).unwrap();
    let ex = build_perturbed_laplacian(40, &zero, 0.8, 3.0).unwrap();
    let diag = build_diagonal(&spectrum, 2.0, 1.0, 0.0, 0.8, 3.0).unwrap();
    assert!(same_operators(&ex, &diag, 1e-12));
    assert_eq!(ex.params(), diag.params());
}

#[test]
fn unperturbed_colored_noise_model_matches_diagonal_builder() {
    let zero = MultiplierSpec::zero();
    let spectrum = dirichlet_spectrum(40).unwrap();
    let ex = build_perturbed_laplacian_colored_noise(40, &zero, &zero, 1.3, 7.0).unwrap();
    let diag = build_diagonal(&spectrum, 2.0, 1.0, 0.5, 1.3, 7.0).unwrap();
    assert!(same_operators(&ex, &diag, 1e-12));
    assert!((ex.params().delta - 1.75).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unperturbed_general_matches_diagonal_builder(
        alpha in 0.6f64..3.0,
        ell in 0.05f64..1.5,
        beta in 0.05f64..1.5,
    ) {
        let zero = MultiplierSpec::zero();
        let spectrum = dirichlet_spectrum(24).unwrap();
        let general = build_general(24, alpha, ell, beta, &zero, &zero, 1.0, 1.0).unwrap();
        let diag = build_diagonal(&spectrum, alpha, ell * alpha, beta * alpha, 1.0, 1.0).unwrap();
        prop_assert!(same_operators(&general, &diag, 1e-12));
    }

    #[test]
    fn lambda_is_stored_consistently(tau in 1e-3f64..1e3, n in 1.0f64..1e9) {
        let s = build_diagonal(&Spectrum::algebraic(4).unwrap(), 1.0, 0.5, 0.5, tau, n).unwrap();
        prop_assert_eq!(s.lambda(), 1.0 / (n * tau * tau));
        prop_assert_eq!(s.tau(), tau);
        prop_assert_eq!(s.n(), n);
    }
}

#[test]
fn general_builder_approaches_white_noise_model() {
    let q = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    let zero = MultiplierSpec::zero();
    let base = build_perturbed_laplacian(32, &q, 1.0, 1.0).unwrap();
    let near = build_general(32, 2.0, 0.5, 1e-9, &q, &zero, 1.0, 1.0).unwrap();
    assert!(same_operators(&base, &near, 1e-7));
    let nearer = build_general(32, 2.0, 0.5, 1e-12, &q, &zero, 1.0, 1.0).unwrap();
    let gap = |s: &ProblemSetup<f64>| (s.c1().to_dense() - base.c1().to_dense()).amax();
    assert!(gap(&nearer) < gap(&near));
}

#[test]
fn general_builder_records_ill_posedness() {
    let zero = MultiplierSpec::zero();
    let s: ProblemSetup<f64> = build_general(16, 1.5, 1.0, 0.5, &zero, &zero, 1.0, 1.0).unwrap();
    assert!((s.params().delta - 2.5).abs() < 1e-15);
}

#[test]
fn conjugated_multiplier_norm_is_bounded_in_truncation() {
    let w = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    for t in [-1.0, 0.0, 1.0] {
        let norms: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| conjugated_multiplier_norm(&w, &dirichlet_spectrum(n).unwrap(), t).unwrap())
            .collect();
        let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(hi.is_finite() && hi / lo < 1.05, "t = {t}: {norms:?}");
    }
}

#[test]
fn forward_equivalence_is_exact_on_matched_diagonal_model() {
    let setup = build_diagonal(&Spectrum::algebraic(64).unwrap(), 1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
    let report = verify_assumptions(&setup, 20, 128, RngSeed(5)).unwrap();
    let forward = report
        .entries
        .iter()
        .find(|e| e.item == AssumptionItem::ForwardEquivalence)
        .unwrap();
    for r in &forward.ratios {
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }
    assert!(report.all_pass());
}

#[test]
fn unperturbed_laplacian_ratios_are_constant_on_basis_vectors() {
    let zero = MultiplierSpec::zero();
    let setup = build_perturbed_laplacian(64, &zero, 1.0, 1.0).unwrap();
    let report = verify_assumptions(&setup, 10, 128, RngSeed(6)).unwrap();
    for e in &report.entries {
        let basis = &e.ratios[..64];
        let first = basis[0];
        for r in basis {
            assert!((r / first - 1.0).abs() < 1e-10, "{:?} {:?}", e.item, e.exponent);
        }
        assert!(e.pass);
    }
}

#[test]
fn perturbed_laplacian_ratios_are_stable_under_refinement() {
    let q = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    let setup = build_perturbed_laplacian(64, &q, 1.0, 1.0).unwrap();
    let report = verify_assumptions(&setup, 25, 128, RngSeed(7)).unwrap();
    assert_eq!(report.probes, 25);
    for e in &report.entries {
        assert!(e.ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!(e.drift < 0.10, "{:?} {:?} drift {}", e.item, e.exponent, e.drift);
    }
    assert!(report.all_pass());
}

#[test]
fn colored_noise_assumptions_hold() {
    let q = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    let setup = build_perturbed_laplacian_colored_noise(48, &q, &q, 1.0, 1.0).unwrap();
    let report = verify_assumptions(&setup, 10, 96, RngSeed(8)).unwrap();
    assert!(report.all_pass(), "max drift {}", report.max_drift());
}

#[test]
fn assumption_check_requires_finer_level() {
    let setup = build_diagonal(&Spectrum::algebraic(8).unwrap(), 1.0, 0.5, 0.5, 1.0, 1.0).unwrap();
    assert!(verify_assumptions(&setup, 4, 8, RngSeed(0)).is_err());
}
