//! Gaussian posteriors for linear inverse problems with correlated noise,
//! diagonalized in the eigenbasis of the prior covariance.
//!
//! The core types are generic over a [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix the scalar for everyday use.

// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assumptions;
pub mod contraction;
pub mod error;
pub mod models;
pub mod posterior;
pub mod scalar;
pub mod spectral;
pub mod synthetic;

pub use assumptions::{verify_assumptions, AssumptionItem, AssumptionReport, RatioStats};
pub use contraction::{
    exponent_curve, fit_loglog_slope, geometric_grid, operator_bound_probe, run_rate_experiment,
    spc_terms, tau_schedule, theoretical_exponent, BoundCurve, BoundQuery, RateExperiment,
    RateParams, RateResult, RateTarget, Regime, SlopeFit, SpcTerms, TauRule, TauSchedule,
};
pub use error::{LabError, Result};
pub use models::{
    build_diagonal, build_general, build_perturbed_laplacian,
    build_perturbed_laplacian_colored_noise, conjugated_multiplier_norm, dirichlet_spectrum,
    multiplication_gram, ModelSpec, MultiplierFamily, MultiplierSpec, ProblemSetup,
};
pub use posterior::{posterior, GaussianPosterior};
pub use scalar::Scalar;
pub use spectral::{
    scale_norm, BasisKind, CoefVector, OperatorKind, OperatorRep, ScaleParams, SpdFactor, Spectrum,
};
pub use synthetic::{
    generate_data, make_truth, regularity_dichotomy, sample_noise, sample_prior, DrawSource,
    Regularity, RngSeed, StreamPurpose, TruthSpec,
};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Setup = ProblemSetup<f64>;
pub type Coefs = CoefVector<f64>;
pub type Operator = OperatorRep<f64>;
pub type Posterior = GaussianPosterior<f64>;
pub type Params = ScaleParams<f64>;
pub type Truth = TruthSpec<f64>;

pub type Setup32 = ProblemSetup<f32>;
pub type Coefs32 = CoefVector<f32>;
pub type Operator32 = OperatorRep<f32>;
pub type Posterior32 = GaussianPosterior<f32>;
pub type Params32 = ScaleParams<f32>;
pub type Truth32 = TruthSpec<f32>;
