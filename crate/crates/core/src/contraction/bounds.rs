use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::fit::{fit_loglog_slope, SlopeFit};
use crate::error::{invalid, LabError, Result};
use crate::models::ProblemSetup;
use crate::posterior::assemble_precision;
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::{ScaleParams, SpdFactor};

/// Relative convergence threshold of the power iteration.
pub const POWER_ITERATION_TOL: f64 = 1e-8;
const POWER_ITERATION_MAX: usize = 20_000;

/// Norm of `B_lambda^{-1}` from `X^source` to `X^target`, i.e. the largest
/// singular value of `C0^{-target/2} B^{-1} C0^{source/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub source: f64,
    pub target: f64,
    /// Predicted log-log slope in `lambda`, when known.
    pub reference_slope: Option<f64>,
}

impl BoundQuery {
    pub fn new(source: f64, target: f64) -> Self {
        Self {
            source,
            target,
            reference_slope: None,
        }
    }

    /// From `X^{-eta}` into `X^1`; bound `lambda^{-(theta + 1)/2}`.
    pub fn into_energy_space<T: Scalar>(theta: f64, params: &ScaleParams<T>) -> Self {
        let eta = to_f64(params.eta(cast(theta)));
        Self {
            source: -eta,
            target: 1.0,
            reference_slope: Some(-(theta + 1.0) / 2.0),
        }
    }

    /// From `X^{-eta}` into `X^{beta - 2 ell}`; bound `lambda^{-theta/2}`.
    pub fn into_weak_space<T: Scalar>(theta: f64, params: &ScaleParams<T>) -> Self {
        let eta = to_f64(params.eta(cast(theta)));
        Self {
            source: -eta,
            target: to_f64(params.weak_exponent()),
            reference_slope: Some(-theta / 2.0),
        }
    }

    /// From `X^{-eta}` into the ambient space; bound `lambda^{-(theta + theta0)/2}`
    /// with `theta0 = (2 ell - beta) / delta`, valid when `beta - 2 ell <= 0`.
    pub fn into_ambient_space<T: Scalar>(theta: f64, params: &ScaleParams<T>) -> Self {
        let eta = to_f64(params.eta(cast(theta)));
        let theta0 = -to_f64(params.weak_exponent()) / to_f64(params.delta);
        Self {
            source: -eta,
            target: 0.0,
            reference_slope: (theta0 >= 0.0).then(|| -(theta + theta0) / 2.0),
        }
    }

    /// `||C0^{-s/2} B^{-1} C0^{-s/2}||`; bound `lambda^{-(2 ell - beta + s)/delta}`.
    pub fn spread<T: Scalar>(s: f64, params: &ScaleParams<T>) -> Self {
        let two_ell_minus_beta = -to_f64(params.weak_exponent());
        Self {
            source: -s,
            target: s,
            reference_slope: Some(-(two_ell_minus_beta + s) / to_f64(params.delta)),
        }
    }
}

/// Measured norms over a `lambda` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub query: BoundQuery,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: SlopeFit,
}

/// Weighted norm of `B_lambda^{-1}` at the `lambda` stored in `setup`.
pub fn weighted_inverse_norm<T: Scalar>(setup: &ProblemSetup<T>, query: &BoundQuery) -> Result<T> {
    let b = assemble_precision(setup)?;
    let factor = b.factor()?;
    let c0 = setup.c0().diagonal_values().expect("prior covariance is diagonal");
    let half = cast::<T>(0.5);
    let left = c0.map(|v| v.powf(-cast::<T>(query.target) * half));
    let right = c0.map(|v| v.powf(cast::<T>(query.source) * half));
    match &factor {
        SpdFactor::Diagonal(d) => {
            let mut best = T::zero();
            for k in 0..d.len() {
                let v = (left[k] * right[k] / d[k]).abs();
                if v > best {
                    best = v;
                }
            }
            Ok(best)
        }
        SpdFactor::Cholesky(_) => {
            let mut m: DMatrix<T> = factor.inverse();
            for (i, mut row) in m.row_iter_mut().enumerate() {
                row *= left[i];
            }
            for (j, mut col) in m.column_iter_mut().enumerate() {
                col *= right[j];
            }
            largest_singular_value(&m)
        }
    }
}

/// Power iteration on `M^T M`, stopped at relative change [`POWER_ITERATION_TOL`].
pub fn largest_singular_value<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    let n = m.ncols();
    if n == 0 {
        return Ok(T::zero());
    }
    // Deterministic start with weight on every coordinate.
    let mut v = DVector::from_fn(n, |i, _| T::one() + cast::<T>(1.0 / (i as f64 + 2.0)));
    v /= v.norm();
    let tol = cast::<T>(POWER_ITERATION_TOL);
    let mut sigma_sq = T::zero();
    for _ in 0..POWER_ITERATION_MAX {
        let w = m.tr_mul(&(m * &v));
        let next = w.norm();
        if next == T::zero() {
            return Ok(T::zero());
        }
        v = w / next;
        if (next - sigma_sq).abs() <= tol * next {
            return Ok(next.sqrt());
        }
        sigma_sq = next;
    }
    Err(LabError::CrossCheck {
        what: "power iteration iterates",
        relative: f64::NAN,
    })
}

/// Measures the weighted norm at each `lambda` of a geometric grid (at least 5
/// points) and fits its log-log slope.
pub fn operator_bound_probe<T: Scalar>(
    setup: &ProblemSetup<T>,
    query: BoundQuery,
    lambda_grid: &[f64],
) -> Result<BoundCurve> {
    if lambda_grid.len() < 5 {
        return Err(LabError::TooFewPoints {
            needed: 5,
            got: lambda_grid.len(),
        });
    }
    if lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(invalid("lambda_grid", "values must be finite and positive"));
    }
    let norms: Vec<f64> = lambda_grid
        .par_iter()
        .map(|&lam| {
            let scaled = setup.with_scaling(cast::<T>(lam.powf(-0.5)), T::one())?;
            weighted_inverse_norm(&scaled, &query).map(to_f64)
        })
        .collect::<Result<_>>()?;
    let fit = fit_loglog_slope(lambda_grid, &norms)?;
    Ok(BoundCurve {
        query,
        lambdas: lambda_grid.to_vec(),
        norms,
        fit,
    })
}
