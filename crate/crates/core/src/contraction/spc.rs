use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::models::ProblemSetup;
use crate::posterior::{assemble_precision, posterior_mean};
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::{CoefVector, SpdFactor};
use crate::synthetic::data_from_noise;

/// Exact square posterior contraction `E ||m - u||^2 + tr(C)` split into parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpcTerms<T> {
    /// `||lambda B^{-1} C0^{-1} u||^2`.
    pub bias_sq: T,
    /// `(1/n) tr(B^{-1} A^{-1} C1^{-1} A^{-1} B^{-1})`.
    pub variance: T,
    /// `(1/n) tr(B^{-1})`, the posterior spread.
    pub trace_term: T,
    pub spc: T,
}

impl<T: Scalar> SpcTerms<T> {
    fn new(bias_sq: T, variance: T, trace_term: T) -> Self {
        Self {
            bias_sq,
            variance,
            trace_term,
            spc: bias_sq + variance + trace_term,
        }
    }

    /// Mean integrated squared error of the posterior mean.
    pub fn mise(&self) -> T {
        self.bias_sq + self.variance
    }

    pub fn to_f64(&self) -> SpcTerms<f64> {
        SpcTerms {
            bias_sq: to_f64(self.bias_sq),
            variance: to_f64(self.variance),
            trace_term: to_f64(self.trace_term),
            spc: to_f64(self.spc),
        }
    }
}

/// Per-coordinate ingredients shared by all error functionals.
struct ErrorParts<T: Scalar> {
    bias: DVector<T>,
    /// Diagonal of `B^{-1} K B^{-1}` with `K = A^{-1} C1^{-1} A^{-1}`.
    noise_diag: DVector<T>,
    trace_inv: T,
}

fn error_parts<T: Scalar>(setup: &ProblemSetup<T>, u_truth: &CoefVector<T>) -> Result<ErrorParts<T>> {
    if u_truth.len() != setup.dim() {
        return Err(crate::error::LabError::DimensionMismatch {
            expected: setup.dim(),
            found: u_truth.len(),
        });
    }
    let b = assemble_precision(setup)?;
    let factor = b.factor()?;
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    let lam = setup.lambda();
    let src = DVector::from_fn(setup.dim(), |k, _| lam * u_truth.vector()[k] / c0[k]);
    let bias = factor.solve_vec(&src);
    let k_op = setup.data_precision();
    match (&factor, k_op.diagonal_values()) {
        (SpdFactor::Diagonal(d), Some(kd)) => Ok(ErrorParts {
            bias,
            noise_diag: kd.zip_map(d, |k, b| k / (b * b)),
            trace_inv: d.iter().fold(T::zero(), |acc, v| acc + T::one() / *v),
        }),
        _ => {
            let x: DMatrix<T> = factor.inverse();
            let xk = k_op.apply_matrix_right(&x);
            let noise_diag = DVector::from_fn(x.nrows(), |i, _| xk.row(i).dot(&x.row(i)));
            Ok(ErrorParts {
                bias,
                noise_diag,
                trace_inv: x.trace(),
            })
        }
    }
}

/// Exact SPC terms for truth `u_truth`; the noise expectation is a trace.
pub fn spc_terms<T: Scalar>(setup: &ProblemSetup<T>, u_truth: &CoefVector<T>) -> Result<SpcTerms<T>> {
    Ok(spc_and_weighted(setup, u_truth, &[])?.0)
}

/// Exact `E ||m - u||_eta^2` for `eta` in `[beta - 2 ell, 1]`.
pub fn weighted_mean_error<T: Scalar>(setup: &ProblemSetup<T>, u_truth: &CoefVector<T>, eta: T) -> Result<T> {
    Ok(spc_and_weighted(setup, u_truth, &[eta])?.1[0])
}

/// SPC terms together with weighted mean errors for several `eta`, sharing one factorization.
pub fn spc_and_weighted<T: Scalar>(
    setup: &ProblemSetup<T>,
    u_truth: &CoefVector<T>,
    etas: &[T],
) -> Result<(SpcTerms<T>, Vec<T>)> {
    let lower = setup.params().weak_exponent();
    let tol = cast::<T>(1e-12);
    for &eta in etas {
        if eta < lower - tol || eta > T::one() + tol {
            return Err(invalid("eta", format!("must lie in [{lower}, 1], got {eta}")));
        }
    }
    let parts = error_parts(setup, u_truth)?;
    let inv_n = T::one() / setup.n();
    let terms = SpcTerms::new(
        parts.bias.norm_squared(),
        parts.noise_diag.sum() * inv_n,
        parts.trace_inv * inv_n,
    );
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    let weighted = etas
        .iter()
        .map(|&eta| {
            let mut acc = T::zero();
            for k in 0..c0.len() {
                let w = c0[k].powf(-eta);
                acc += w * (parts.bias[k] * parts.bias[k] + parts.noise_diag[k] * inv_n);
            }
            acc
        })
        .collect();
    Ok((terms, weighted))
}

/// Posterior-mean error for one noise realization, computed twice: by
/// subtracting the truth from the posterior mean, and as
/// `B^{-1}(n^{-1/2} A^{-1} C1^{-1} xi - lambda C0^{-1} u)`.
pub fn error_identity<T: Scalar>(
    setup: &ProblemSetup<T>,
    u_truth: &CoefVector<T>,
    xi: &CoefVector<T>,
) -> Result<(CoefVector<T>, CoefVector<T>)> {
    let y = data_from_noise(setup, u_truth, xi)?;
    let direct = posterior_mean(setup, &y)?.sub(u_truth);
    let b = assemble_precision(setup)?;
    let noise = setup
        .a_inv()
        .apply(&setup.c1_factor().solve(xi))?
        .scaled(T::one() / setup.n().sqrt());
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    let lam = setup.lambda();
    let shrink = CoefVector::from_vector(DVector::from_fn(setup.dim(), |k, _| {
        lam * u_truth.vector()[k] / c0[k]
    }));
    let formula = b.solve_spd(&noise.sub(&shrink))?;
    Ok((direct, formula))
}
