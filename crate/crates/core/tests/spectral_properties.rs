use nalgebra::{DMatrix, DVector};
use posterior_lab::models::{dirichlet_spectrum, multiplication_gram, MultiplierSpec};
use posterior_lab::spectral::{scale_norm, CoefVector, OperatorRep};
use proptest::prelude::*;

fn spd_from(entries: &[f64], n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_iterator(n, n, entries.iter().copied());
    &g * g.transpose() + DMatrix::identity(n, n) * 0.5
}

fn decaying_c0(n: usize, alpha: f64) -> OperatorRep<f64> {
    OperatorRep::diagonal(DVector::from_fn(n, |k, _| ((k + 1) as f64).powf(-2.0 * alpha))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_increase_with_order(
        coefs in prop::collection::vec(-10.0f64..10.0, 1..40),
        alpha in 0.6f64..2.0,
        s in -2.0f64..2.0,
        gap in 0.0f64..2.0,
    ) {
        let c0 = decaying_c0(coefs.len(), alpha);
        let u = CoefVector::new(coefs);
        let lo = scale_norm(&u, s, &c0).unwrap();
        let hi = scale_norm(&u, s + gap, &c0).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn interpolation_inequality(
        coefs in prop::collection::vec(-10.0f64..10.0, 1..40),
        alpha in 0.6f64..2.0,
        a in -2.0f64..1.0,
        width in 0.1f64..2.0,
    ) {
        let c0 = decaying_c0(coefs.len(), alpha);
        let u = CoefVector::new(coefs);
        let b = a + width;
        let na = scale_norm(&u, a, &c0).unwrap();
        let nb = scale_norm(&u, b, &c0).unwrap();
        for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let eta = (1.0 - theta) * a + theta * b;
            let mid = scale_norm(&u, eta, &c0).unwrap();
            prop_assert!(mid <= na.powf(1.0 - theta) * nb.powf(theta) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn fractional_powers_compose(
        entries in prop::collection::vec(-1.0f64..1.0, 256),
        p in -1.5f64..1.5,
        q in -1.5f64..1.5,
    ) {
        let op = OperatorRep::dense_spd(spd_from(&entries, 16)).unwrap();
        let lhs = op.fractional_power(p).unwrap().to_dense() * op.fractional_power(q).unwrap().to_dense();
        let rhs = op.fractional_power(p + q).unwrap().to_dense();
        prop_assert!((&lhs - &rhs).norm() <= 1e-9 * rhs.norm());
    }

    #[test]
    fn solve_inverts_apply(
        entries in prop::collection::vec(-1.0f64..1.0, 64),
        rhs in prop::collection::vec(-5.0f64..5.0, 8),
    ) {
        let op = OperatorRep::dense_spd(spd_from(&entries, 8)).unwrap();
        let r = CoefVector::new(rhs);
        let w = op.solve_spd(&r).unwrap();
        let back = op.apply(&w).unwrap();
        prop_assert!(back.sub(&r).norm() <= 1e-10 * r.norm().max(1e-300));
    }

    #[test]
    fn diagonal_solve_inverts_apply(
        diag in prop::collection::vec(0.01f64..100.0, 1..30),
        seed in -5.0f64..5.0,
    ) {
        let n = diag.len();
        let op = OperatorRep::diagonal(DVector::from_vec(diag)).unwrap();
        let r = CoefVector::from_vector(DVector::from_fn(n, |k, _| seed + k as f64));
        let back = op.apply(&op.solve_spd(&r).unwrap()).unwrap();
        prop_assert!(back.sub(&r).norm() <= 1e-12 * r.norm().max(1e-300));
    }

    #[test]
    fn tabulated_gram_is_psd(samples in prop::collection::vec(0.0f64..3.0, 2..9)) {
        let w = MultiplierSpec::tabulated(samples, 0).unwrap();
        let g = multiplication_gram(&w, &dirichlet_spectrum(24).unwrap()).unwrap();
        prop_assert!(g.min_eigenvalue().unwrap() >= -1e-10);
    }
}

#[test]
fn closed_form_grams_are_psd_up_to_256() {
    let spectrum = dirichlet_spectrum::<f64>(256).unwrap();
    let families = [
        MultiplierSpec::constant(0.7).unwrap(),
        MultiplierSpec::raised_cosine(1.0, 1).unwrap(),
        MultiplierSpec::raised_cosine(2.5, 3).unwrap(),
        MultiplierSpec::raised_cosine(0.2, 40).unwrap(),
    ];
    for w in &families {
        let g = multiplication_gram(w, &spectrum).unwrap();
        assert!(g.min_eigenvalue().unwrap() >= -1e-10, "{w:?}");
    }
}

#[test]
fn tabulated_gram_matches_closed_form() {
    // Piecewise-linear interpolation of a fine sampling of 1 + cos(2 pi x).
    let m = 2048;
    let samples: Vec<f64> = (0..=m)
        .map(|i| 1.0 + (2.0 * std::f64::consts::PI * i as f64 / m as f64).cos())
        .collect();
    let spectrum = dirichlet_spectrum::<f64>(12).unwrap();
    let tab = multiplication_gram(&MultiplierSpec::tabulated(samples, 2).unwrap(), &spectrum)
        .unwrap()
        .to_dense();
    let exact = multiplication_gram(&MultiplierSpec::raised_cosine(1.0, 1).unwrap(), &spectrum)
        .unwrap()
        .to_dense();
    // Interpolation error of a smooth function is O(h^2).
    assert!((tab - exact).amax() < 1e-5);
}

#[test]
fn f32_norms_track_f64() {
    let c0_64 = decaying_c0(50, 1.0);
    let c0_32 = OperatorRep::<f32>::diagonal(c0_64.diagonal_values().unwrap().map(|v| v as f32)).unwrap();
    let u64v = CoefVector::from_vector(DVector::from_fn(50, |k, _| 1.0 / (k as f64 + 1.0)));
    let u32v = CoefVector::from_vector(u64v.vector().map(|v| v as f32));
    for t in [-1.0, 0.0, 0.5, 1.0] {
        let a = scale_norm(&u64v, t, &c0_64).unwrap();
        let b = scale_norm(&u32v, t as f32, &c0_32).unwrap() as f64;
        assert!((a - b).abs() <= 1e-5 * a);
    }
}
