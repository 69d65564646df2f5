//! Gaussian posterior through the precision operator `B_lambda`, with the
//! covariance form as an independent cross-check.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::models::ProblemSetup;
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::{CoefVector, OperatorRep, SpdFactor};

/// Largest truncation at which a posterior is automatically cross-checked.
pub const CROSS_CHECK_MAX_DIM: usize = 128;
/// Relative tolerance of the automatic dual-formula check.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Relative tolerance for two covariances to count as shared.
pub const SHARED_COVARIANCE_TOL: f64 = 1e-8;

/// `B_lambda = A^{-1} C1^{-1} A^{-1} + lambda C0^{-1}`.
pub fn assemble_precision<T: Scalar>(setup: &ProblemSetup<T>) -> Result<OperatorRep<T>> {
    let prior_precision = setup.c0().inverse()?.scaled(setup.lambda());
    let b = setup.data_precision().add(&prior_precision)?;
    if !b.is_spd() {
        return Err(LabError::NotSpd {
            min_eigenvalue: b.min_eigenvalue().map(to_f64).unwrap_or(f64::NAN),
        });
    }
    Ok(b)
}

/// `A^{-1} C1^{-1} y`.
pub fn data_rhs<T: Scalar>(setup: &ProblemSetup<T>, y: &CoefVector<T>) -> Result<CoefVector<T>> {
    check_len(setup, y)?;
    let w = setup.c1_factor().solve(y);
    setup.a_inv().apply(&w)
}

/// Solves `B_lambda m = A^{-1} C1^{-1} y`.
pub fn posterior_mean<T: Scalar>(setup: &ProblemSetup<T>, y: &CoefVector<T>) -> Result<CoefVector<T>> {
    let b = assemble_precision(setup)?;
    b.solve_spd(&data_rhs(setup, y)?)
}

/// `S = A^{-1} C0 A^{-1} + lambda C1`, the inner operator of the covariance form.
fn covform_inner<T: Scalar>(setup: &ProblemSetup<T>) -> Result<OperatorRep<T>> {
    let s = setup
        .a_inv()
        .sandwich(setup.c0())?
        .add(&setup.c1().scaled(setup.lambda()))?;
    if !s.is_spd() {
        return Err(LabError::NotSpd {
            min_eigenvalue: s.min_eigenvalue().map(to_f64).unwrap_or(f64::NAN),
        });
    }
    Ok(s)
}

/// `m = C0 A^{-1} (A^{-1} C0 A^{-1} + lambda C1)^{-1} y`.
pub fn posterior_mean_covform<T: Scalar>(
    setup: &ProblemSetup<T>,
    y: &CoefVector<T>,
) -> Result<CoefVector<T>> {
    check_len(setup, y)?;
    let w = covform_inner(setup)?.solve_spd(y)?;
    setup.c0().apply(&setup.a_inv().apply(&w)?)
}

/// `C = tau^2 C0 - tau^2 C0 A^{-1} (A^{-1} C0 A^{-1} + lambda C1)^{-1} A^{-1} C0`.
pub fn posterior_covariance_covform<T: Scalar>(setup: &ProblemSetup<T>) -> Result<OperatorRep<T>> {
    let s = covform_inner(setup)?;
    let tau2 = setup.tau() * setup.tau();
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    match (setup.a_inv().diagonal_values(), s.diagonal_values()) {
        (Some(a), Some(sd)) => {
            let c = c0.zip_zip_map(a, sd, |c, a, s| tau2 * (c - c * a * a * c / s));
            OperatorRep::diagonal(c)
        }
        _ => {
            // G = A^{-1} C0, so the correction is G^T S^{-1} G.
            let g = setup.a_inv().apply_matrix(&setup.c0().to_dense());
            let sg = s.factor()?.solve_matrix(&g);
            let correction = g.tr_mul(&sg);
            let c = (setup.c0().to_dense() - correction) * tau2;
            OperatorRep::dense_symmetric(c)
        }
    }
}

/// Agreement between the precision form and the covariance form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualFormulaCheck {
    pub mean_relative: f64,
    pub covariance_relative: f64,
}

impl DualFormulaCheck {
    pub fn max_relative(&self) -> f64 {
        self.mean_relative.max(self.covariance_relative)
    }
}

/// Posterior `N(m, C)` with `C = (1/n) B_lambda^{-1}`.
#[derive(Debug, Clone)]
pub struct GaussianPosterior<T: Scalar> {
    mean: CoefVector<T>,
    precision: OperatorRep<T>,
    n: T,
    covariance: OperatorRep<T>,
    trace_cov: T,
    dual_check: Option<DualFormulaCheck>,
}

impl<T: Scalar> GaussianPosterior<T> {
    pub fn mean(&self) -> &CoefVector<T> {
        &self.mean
    }

    /// `B_lambda`; for diagonal models it stays diagonal.
    pub fn precision(&self) -> &OperatorRep<T> {
        &self.precision
    }

    pub fn n(&self) -> T {
        self.n
    }

    pub fn covariance(&self) -> &OperatorRep<T> {
        &self.covariance
    }

    pub fn trace_cov(&self) -> T {
        self.trace_cov
    }

    /// Present when the posterior was small enough to be cross-checked.
    pub fn dual_check(&self) -> Option<DualFormulaCheck> {
        self.dual_check
    }

    /// Diagonal of the covariance.
    pub fn covariance_diagonal(&self) -> Vec<T> {
        match self.covariance.diagonal_values() {
            Some(d) => d.iter().copied().collect(),
            None => self.covariance.to_dense().diagonal().iter().copied().collect(),
        }
    }
}

/// Builds the posterior for data `y`. Up to [`CROSS_CHECK_MAX_DIM`] the mean
/// and covariance are recomputed through the covariance form and must agree to
/// [`CROSS_CHECK_TOL`].
pub fn posterior<T: Scalar>(setup: &ProblemSetup<T>, y: &CoefVector<T>) -> Result<GaussianPosterior<T>> {
    let b = assemble_precision(setup)?;
    let factor = b.factor()?;
    let mean = factor.solve(&data_rhs(setup, y)?);
    let inv_n = T::one() / setup.n();
    let covariance = match &factor {
        SpdFactor::Diagonal(d) => OperatorRep::diagonal(d.map(|v| inv_n / v))?,
        SpdFactor::Cholesky(_) => OperatorRep::dense_symmetric(factor.inverse() * inv_n)?,
    };
    let trace_cov = covariance.trace();
    let dual_check = if setup.dim() <= CROSS_CHECK_MAX_DIM {
        let check = DualFormulaCheck {
            mean_relative: relative_vec(&mean, &posterior_mean_covform(setup, y)?),
            covariance_relative: relative_dense(
                &covariance.to_dense(),
                &posterior_covariance_covform(setup)?.to_dense(),
            ),
        };
        debug!("dual-formula check {:?}", check);
        if check.mean_relative > CROSS_CHECK_TOL {
            return Err(LabError::CrossCheck {
                what: "posterior means",
                relative: check.mean_relative,
            });
        }
        if check.covariance_relative > CROSS_CHECK_TOL {
            return Err(LabError::CrossCheck {
                what: "posterior covariances",
                relative: check.covariance_relative,
            });
        }
        Some(check)
    } else {
        None
    };
    Ok(GaussianPosterior {
        mean,
        precision: b,
        n: setup.n(),
        covariance,
        trace_cov,
        dual_check,
    })
}

/// `Phi(u, y) = (n/2) ||C1^{-1/2} A^{-1} u||^2 - n <C1^{-1/2} y, C1^{-1/2} A^{-1} u>`.
pub fn likelihood_potential<T: Scalar>(
    setup: &ProblemSetup<T>,
    u: &CoefVector<T>,
    y: &CoefVector<T>,
) -> Result<T> {
    check_len(setup, u)?;
    check_len(setup, y)?;
    let w = setup.c1_inv_sqrt()?;
    let au = w.apply(&setup.a_inv().apply(u)?)?;
    let wy = w.apply(y)?;
    let n = setup.n();
    Ok(n * cast::<T>(0.5) * au.dot(&au) - n * wy.dot(&au))
}

/// `J(u) = (n/2) ||C1^{-1/2}(y - A^{-1} u)||^2 + (1/(2 tau^2)) ||C0^{-1/2} u||^2`.
pub fn tikhonov_objective<T: Scalar>(
    setup: &ProblemSetup<T>,
    y: &CoefVector<T>,
    u: &CoefVector<T>,
) -> Result<T> {
    check_len(setup, u)?;
    check_len(setup, y)?;
    let resid = y.sub(&setup.a_inv().apply(u)?);
    let misfit = setup.c1_factor().inverse_quadratic_form(resid.vector());
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    let penalty = u
        .as_slice()
        .iter()
        .zip(c0.iter())
        .fold(T::zero(), |acc, (x, c)| acc + *x * *x / *c);
    let half = cast::<T>(0.5);
    let tau2 = setup.tau() * setup.tau();
    Ok(half * setup.n() * misfit + half * penalty / tau2)
}

/// Hellinger distance `sqrt(1 - exp(-||C^{-1/2}(m1 - m2)||^2 / 8))` between
/// posteriors sharing one covariance.
pub fn hellinger_distance<T: Scalar>(p1: &GaussianPosterior<T>, p2: &GaussianPosterior<T>) -> Result<T> {
    if p1.mean.len() != p2.mean.len() {
        return Err(LabError::DimensionMismatch {
            expected: p1.mean.len(),
            found: p2.mean.len(),
        });
    }
    let c1 = p1.covariance.to_dense();
    let relative = relative_dense(&p2.covariance.to_dense(), &c1);
    if relative > SHARED_COVARIANCE_TOL {
        return Err(LabError::CovarianceMismatch {
            relative,
            tolerance: SHARED_COVARIANCE_TOL,
        });
    }
    let diff = p1.mean.sub(&p2.mean);
    let q = p1.covariance.factor()?.inverse_quadratic_form(diff.vector());
    let arg = -q / cast::<T>(8.0);
    Ok((T::one() - arg.exp()).max(T::zero()).sqrt())
}

fn check_len<T: Scalar>(setup: &ProblemSetup<T>, v: &CoefVector<T>) -> Result<()> {
    if v.len() != setup.dim() {
        return Err(LabError::DimensionMismatch {
            expected: setup.dim(),
            found: v.len(),
        });
    }
    Ok(())
}

/// `||a - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_vec<T: Scalar>(a: &CoefVector<T>, b: &CoefVector<T>) -> f64 {
    let num = to_f64(a.sub(b).norm());
    let den = to_f64(b.norm());
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Relative Frobenius distance `||a - b||_F / ||b||_F`.
pub fn relative_dense<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    let num = to_f64((a - b).norm());
    let den = to_f64(b.norm());
    if den > 0.0 {
        num / den
    } else {
        num
    }
}
