//! Square posterior contraction, prior scaling schedules, rate exponents,
//! operator-norm probes and log-log fits.
//!
//! All expectations over the noise are evaluated through exact trace
//! identities; nothing in this module samples.

mod bounds;
mod experiment;
mod fit;
mod schedule;
mod spc;

pub use bounds::{
    largest_singular_value, operator_bound_probe, weighted_inverse_norm, BoundCurve, BoundQuery,
    POWER_ITERATION_TOL,
};
pub use experiment::{
    geometric_grid, run_rate_experiment, GuardReport, RateExperiment, RatePoint, RateResult,
    TruncationGuard, DEFAULT_GUARD_TOLERANCE,
};
pub use fit::{fit_loglog_slope, SlopeFit};
pub use schedule::{
    exponent_curve, tau_schedule, theoretical_exponent, RateParams, RateTarget, Regime, TauRule,
    TauSchedule,
};
pub use spc::{error_identity, spc_and_weighted, spc_terms, weighted_mean_error, SpcTerms};
