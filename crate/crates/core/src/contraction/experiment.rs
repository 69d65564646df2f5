use log::info;
use rayon::prelude::*;

use super::fit::{fit_loglog_slope, SlopeFit};
use super::schedule::{theoretical_exponent, RateTarget, TauSchedule};
use super::spc::{spc_and_weighted, SpcTerms};
use crate::error::{invalid, LabError, Result};
use crate::models::ProblemSetup;
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::scale_norm;
use crate::synthetic::{make_truth, TruthSpec};

/// Default relative SPC change allowed when the truncation is doubled.
pub const DEFAULT_GUARD_TOLERANCE: f64 = 0.01;

/// Refinement check run at the largest `n` of a rate experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationGuard {
    pub n_check: usize,
    pub tolerance: f64,
}

/// Inputs of a rate experiment.
#[derive(Debug, Clone)]
pub struct RateExperiment<T: Scalar> {
    /// Operators at the working truncation; `tau` and `n` are overwritten per grid point.
    pub setup: ProblemSetup<T>,
    pub truth: TruthSpec<T>,
    pub schedule: TauSchedule,
    pub n_grid: Vec<f64>,
    /// `theta` values for weighted mean errors, `eta = (1 - theta)(beta - 2 ell) + theta`.
    pub thetas: Vec<f64>,
    pub target: RateTarget,
    /// `None` disables the refinement check.
    pub guard: Option<TruncationGuard>,
}

impl<T: Scalar> RateExperiment<T> {
    /// Experiment with the default guard at twice the working truncation.
    pub fn new(
        setup: ProblemSetup<T>,
        truth: TruthSpec<T>,
        schedule: TauSchedule,
        n_grid: Vec<f64>,
        target: RateTarget,
    ) -> Self {
        let n_check = 2 * setup.dim();
        Self {
            setup,
            truth,
            schedule,
            n_grid,
            thetas: Vec::new(),
            target,
            guard: Some(TruncationGuard {
                n_check,
                tolerance: DEFAULT_GUARD_TOLERANCE,
            }),
        }
    }
}

/// One grid point of a rate experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub n: f64,
    pub tau: f64,
    pub lambda: f64,
    pub terms: SpcTerms<f64>,
    /// `E ||m - u||_eta^2` for each requested `theta`.
    pub mean_errors: Vec<f64>,
}

/// Outcome of the refinement check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardReport {
    pub n_trunc: usize,
    pub n_check: usize,
    pub n: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub points: Vec<RatePoint>,
    pub fit: SlopeFit,
    /// Fits of each weighted mean-error column.
    pub mean_error_fits: Vec<SlopeFit>,
    pub theoretical_exponent: f64,
    /// Expected log-log slope of the fitted quantity.
    pub target_slope: f64,
    pub guard: Option<GuardReport>,
    /// Relative change of `||u||_gamma` between the working and check truncations.
    pub truth_norm_drift: Option<f64>,
}

impl RateResult {
    pub fn fitted_slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn slope_stderr(&self) -> Option<f64> {
        self.fit.stderr
    }

    pub fn n_grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n).collect()
    }
}

fn check_grid(n_grid: &[f64]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(LabError::TooFewPoints {
            needed: 4,
            got: n_grid.len(),
        });
    }
    if n_grid.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(invalid("n_grid", "values must be finite and positive"));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_grid", "must be strictly increasing"));
    }
    let ratio = n_grid[1] / n_grid[0];
    if n_grid
        .windows(2)
        .any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-6)
    {
        return Err(invalid("n_grid", "must be geometric"));
    }
    Ok(())
}

/// Geometric grid of `points` values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

fn point_terms<T: Scalar>(
    setup: &ProblemSetup<T>,
    truth: &TruthSpec<T>,
    schedule: &TauSchedule,
    thetas: &[f64],
    n: f64,
) -> Result<RatePoint> {
    let tau = schedule.tau(n);
    let scaled = setup.with_scaling(cast(tau), cast(n))?;
    let u = make_truth(truth, &scaled);
    let params = scaled.params();
    let etas: Vec<T> = thetas.iter().map(|&th| params.eta(cast(th))).collect();
    let (terms, weighted) = spc_and_weighted(&scaled, &u, &etas)?;
    Ok(RatePoint {
        n,
        tau,
        lambda: to_f64(scaled.lambda()),
        terms: terms.to_f64(),
        mean_errors: weighted.into_iter().map(to_f64).collect(),
    })
}

/// Evaluates the exact SPC along the schedule, fits the log-log slope and
/// checks the truncation at the largest `n`.
pub fn run_rate_experiment<T: Scalar>(exp: &RateExperiment<T>) -> Result<RateResult> {
    check_grid(&exp.n_grid)?;
    let points: Vec<RatePoint> = exp
        .n_grid
        .par_iter()
        .map(|&n| point_terms(&exp.setup, &exp.truth, &exp.schedule, &exp.thetas, n))
        .collect::<Result<_>>()?;

    let mut guard_report = None;
    let mut truth_norm_drift = None;
    if let Some(guard) = exp.guard {
        if guard.n_check <= exp.setup.dim() {
            return Err(invalid("n_check", "must exceed the working truncation"));
        }
        let fine = exp.setup.rebuild(guard.n_check)?;
        let last = points.last().expect("grid checked");
        let fine_point = point_terms(&fine, &exp.truth, &exp.schedule, &[], last.n)?;
        let relative_change = (fine_point.terms.spc / last.terms.spc - 1.0).abs();
        info!(
            "truncation guard: N = {} -> {}, SPC change {:.3e} at n = {:e}",
            exp.setup.dim(),
            guard.n_check,
            relative_change,
            last.n
        );
        let gamma = exp.truth.gamma;
        let coarse_norm = to_f64(scale_norm(&make_truth(&exp.truth, &exp.setup), gamma, exp.setup.c0())?);
        let fine_norm = to_f64(scale_norm(&make_truth(&exp.truth, &fine), gamma, fine.c0())?);
        truth_norm_drift = Some((fine_norm / coarse_norm - 1.0).abs());
        if !(relative_change < guard.tolerance) {
            return Err(LabError::TruncationSensitivity {
                n_trunc: exp.setup.dim(),
                n: last.n,
                relative_change,
                tolerance: guard.tolerance,
            });
        }
        guard_report = Some(GuardReport {
            n_trunc: exp.setup.dim(),
            n_check: guard.n_check,
            n: last.n,
            relative_change,
        });
    }

    let ns: Vec<f64> = points.iter().map(|p| p.n).collect();
    let spc: Vec<f64> = points.iter().map(|p| p.terms.spc).collect();
    let fit = fit_loglog_slope(&ns, &spc)?;
    let mean_error_fits = (0..exp.thetas.len())
        .map(|j| {
            let ys: Vec<f64> = points.iter().map(|p| p.mean_errors[j]).collect();
            fit_loglog_slope(&ns, &ys)
        })
        .collect::<Result<_>>()?;
    let exponent = theoretical_exponent(exp.target, &exp.schedule.params)?;
    Ok(RateResult {
        points,
        fit,
        mean_error_fits,
        theoretical_exponent: exponent,
        target_slope: exp.target.squared_slope(exponent),
        guard: guard_report,
        truth_norm_drift,
    })
}
