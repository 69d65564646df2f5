use nalgebra::{DMatrix, DVector};
use posterior_lab::models::{
    build_diagonal, build_perturbed_laplacian, build_perturbed_laplacian_colored_noise, MultiplierSpec,
    ProblemSetup,
};
use posterior_lab::posterior::{
    assemble_precision, hellinger_distance, likelihood_potential, posterior, posterior_covariance_covform,
    posterior_mean, posterior_mean_covform, relative_vec, tikhonov_objective,
};
use posterior_lab::spectral::{scale_norm, BasisKind, CoefVector, Spectrum};
use posterior_lab::synthetic::{standard_normal, RngSeed, StreamPurpose};
use proptest::prelude::*;

fn random_coefs(seed: u64, replicate: u64, n: usize) -> CoefVector<f64> {
    CoefVector::from_vector(standard_normal(&mut RngSeed(seed).stream(replicate, StreamPurpose::Data), n))
}

fn diagonal_setup(n_trunc: usize, tau: f64, n: f64) -> ProblemSetup<f64> {
    build_diagonal(&Spectrum::algebraic(n_trunc).unwrap(), 1.0, 0.5, 0.5, tau, n).unwrap()
}

fn dense_setup(n_trunc: usize, tau: f64, n: f64) -> ProblemSetup<f64> {
    let rc = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    build_perturbed_laplacian_colored_noise(n_trunc, &rc, &rc, tau, n).unwrap()
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

#[test]
fn dual_forms_agree_on_diagonal_model() {
    let setup = diagonal_setup(16, 0.7, 30.0);
    let y = random_coefs(1, 0, 16);
    let a = posterior_mean(&setup, &y).unwrap();
    let b = posterior_mean_covform(&setup, &y).unwrap();
    assert!(relative_vec(&a, &b) <= 1e-10);
}

#[test]
fn dual_forms_agree_on_dense_models() {
    for n_trunc in [16, 64, 128] {
        let setup = dense_setup(n_trunc, 0.4, 200.0);
        let post = posterior(&setup, &random_coefs(2, n_trunc as u64, n_trunc)).unwrap();
        let check = post.dual_check().expect("cross-check runs for N <= 128");
        assert!(check.max_relative() <= 1e-8, "N = {n_trunc}: {check:?}");
        let cov = posterior_covariance_covform(&setup).unwrap().to_dense();
        let prod = post.precision().to_dense() * cov * setup.n();
        assert!((prod - DMatrix::identity(n_trunc, n_trunc)).amax() <= 1e-8);
    }
}

#[test]
fn zero_data_gives_zero_mean() {
    let setup = dense_setup(32, 1.0, 1.0);
    let m = posterior_mean(&setup, &CoefVector::zeros(32)).unwrap();
    assert!(m.as_slice().iter().all(|v| *v == 0.0));
}

#[test]
fn precision_depends_on_lambda_only() {
    let a = assemble_precision(&dense_setup(24, 0.5, 4.0)).unwrap();
    let b = assemble_precision(&dense_setup(24, 1.0, 1.0)).unwrap();
    assert_eq!(a.to_dense(), b.to_dense());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mean_depends_on_lambda_only(k in 0u32..12, seed in 0u64..1000) {
        // (n, tau) = (4^k, 2^-k) and (1, 1) share lambda = 1 exactly.
        let n = 4f64.powi(k as i32);
        let tau = 0.5f64.powi(k as i32);
        let y = random_coefs(seed, 0, 20);
        let a = posterior_mean(&dense_setup(20, tau, n), &y).unwrap();
        let b = posterior_mean(&dense_setup(20, 1.0, 1.0), &y).unwrap();
        prop_assert!(relative_vec(&a, &b) <= 1e-14);
    }

    #[test]
    fn posterior_covariance_is_below_prior(tau in 0.05f64..5.0, n in 1.0f64..1e6) {
        for setup in [diagonal_setup(24, tau, n), dense_setup(24, tau, n)] {
            let post = posterior(&setup, &CoefVector::zeros(24)).unwrap();
            let gap = setup.c0().to_dense() * (tau * tau) - post.covariance().to_dense();
            prop_assert!(min_eig(gap) >= -1e-10);
            prop_assert!(post.trace_cov() > 0.0);
        }
    }

    #[test]
    fn precision_dominates_prior_precision(tau in 0.05f64..5.0, n in 1.0f64..1e6) {
        for setup in [diagonal_setup(24, tau, n), dense_setup(24, tau, n)] {
            let b = assemble_precision(&setup).unwrap().to_dense();
            let prior = setup.c0().inverse().unwrap().to_dense() * setup.lambda();
            let scale = b.amax();
            prop_assert!(min_eig(b - prior) >= -1e-10 * scale);
        }
    }
}

#[test]
fn mean_minimizes_the_tikhonov_functional() {
    let q = MultiplierSpec::raised_cosine(1.0, 1).unwrap();
    let setups = [diagonal_setup(32, 0.6, 40.0), build_perturbed_laplacian(32, &q, 0.6, 40.0).unwrap()];
    for (i, setup) in setups.iter().enumerate() {
        let y = random_coefs(3, i as u64, 32);
        let m = posterior_mean(setup, &y).unwrap();
        let jm = tikhonov_objective(setup, &y, &m).unwrap();
        let mut rng = RngSeed(4).stream(i as u64, StreamPurpose::Direction);
        for _ in 0..100 {
            let v: DVector<f64> = standard_normal(&mut rng, 32);
            let v = CoefVector::from_vector(&v / v.norm());
            for t in [1e-3, -1e-3] {
                let moved = tikhonov_objective(setup, &y, &m.add(&v.scaled(t))).unwrap();
                assert!(jm <= moved, "{jm} > {moved}");
            }
        }
    }
}

#[test]
fn objective_splits_into_potential_and_prior_penalty() {
    let setup = dense_setup(24, 0.8, 12.0);
    let y = random_coefs(5, 0, 24);
    let c1_inv_sqrt = setup.c1_inv_sqrt().unwrap();
    let data_term = 0.5 * setup.n() * c1_inv_sqrt.apply(&y).unwrap().vector().norm_squared();
    let mut rng = RngSeed(5).stream(1, StreamPurpose::Probe);
    for _ in 0..50 {
        let u = CoefVector::from_vector(standard_normal(&mut rng, 24));
        let j = tikhonov_objective(&setup, &y, &u).unwrap();
        let phi = likelihood_potential(&setup, &u, &y).unwrap();
        let penalty = scale_norm(&u, 1.0, setup.c0()).unwrap().powi(2) / (2.0 * setup.tau() * setup.tau());
        let constant = j - phi - penalty;
        assert!((constant - data_term).abs() <= 1e-9 * j.abs().max(data_term));
    }
}

#[test]
fn potential_vanishes_at_zero() {
    let setup = dense_setup(16, 1.0, 3.0);
    let phi = likelihood_potential(&setup, &CoefVector::zeros(16), &random_coefs(6, 0, 16)).unwrap();
    assert_eq!(phi, 0.0);
}

#[test]
fn hellinger_closed_form() {
    // Scalar model with n = 1/2 and tau^2 = 2: lambda = 1, C = 1, m = y/2.
    let s = Spectrum::new(vec![1.0], BasisKind::Algebraic).unwrap();
    let setup = build_diagonal(&s, 1.0, 0.0, 0.0, 2f64.sqrt(), 0.5).unwrap();
    let p1 = posterior(&setup, &CoefVector::new(vec![4.0])).unwrap();
    let p2 = posterior(&setup, &CoefVector::new(vec![0.0])).unwrap();
    assert!((p1.covariance().to_dense()[(0, 0)] - 1.0).abs() < 1e-15);
    let d = hellinger_distance(&p1, &p2).unwrap();
    assert!((d - (1.0 - (-0.5f64).exp()).sqrt()).abs() < 1e-15);
    assert!((d - 0.6273).abs() < 1e-4);
    assert_eq!(hellinger_distance(&p1, &p1).unwrap(), 0.0);
}

#[test]
fn hellinger_rejects_different_covariances() {
    let a = posterior(&dense_setup(8, 1.0, 1.0), &CoefVector::zeros(8)).unwrap();
    let b = posterior(&dense_setup(8, 1.0, 2.0), &CoefVector::zeros(8)).unwrap();
    assert!(hellinger_distance(&a, &b).is_err());
}

#[test]
fn f32_posterior_tracks_f64() {
    let s64 = diagonal_setup(16, 0.7, 30.0);
    let s32 = build_diagonal(&Spectrum::<f32>::algebraic(16).unwrap(), 1.0, 0.5, 0.5, 0.7, 30.0).unwrap();
    let y = random_coefs(9, 0, 16);
    let y32 = CoefVector::from_vector(y.vector().map(|v| v as f32));
    let m64 = posterior_mean(&s64, &y).unwrap();
    let m32 = posterior_mean(&s32, &y32).unwrap();
    let diff = DVector::from_fn(16, |k, _| m64.vector()[k] - m32.vector()[k] as f64);
    assert!(diff.norm() <= 1e-5 * m64.norm());
}
