//! Truths of prescribed regularity and seeded prior, noise and data draws.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, LabError, Result};
use crate::models::ProblemSetup;
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::{scale_norm, CoefVector, OperatorRep};

/// Growth of the mean squared norm below which a truncation sweep counts as converged.
pub const STABLE_GROWTH: f64 = 0.10;
/// Growth above which a truncation sweep counts as divergent.
pub const DIVERGENT_GROWTH: f64 = 0.50;

/// Deterministic truth `u_k = amplitude * lambda_k^gamma * k^{-1/2 - margin}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSpec<T> {
    pub gamma: T,
    pub margin_delta: T,
    pub amplitude: T,
}

impl<T: Scalar> TruthSpec<T> {
    pub fn new(gamma: T, margin_delta: T, amplitude: T) -> Result<Self> {
        if !(gamma >= T::one()) {
            return Err(invalid("gamma", "truth regularity must be at least 1"));
        }
        if !(margin_delta > T::zero()) {
            return Err(invalid("margin_delta", "must be positive"));
        }
        if !amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        Ok(Self {
            gamma,
            margin_delta,
            amplitude,
        })
    }

    /// Margin 0.1 and unit amplitude.
    pub fn with_gamma(gamma: T) -> Result<Self> {
        Self::new(gamma, cast(0.1), T::one())
    }
}

/// Builds the truth in the prior eigenbasis of `setup`. It lies in `X^gamma`
/// but in no `X^{gamma + t}` with `t >= 2 margin / decay`, where `decay` is the
/// exponent of `lambda_k^{-1}`.
pub fn make_truth<T: Scalar>(spec: &TruthSpec<T>, setup: &ProblemSetup<T>) -> CoefVector<T> {
    let std = setup.prior_std();
    let tail = -(cast::<T>(0.5) + spec.margin_delta);
    CoefVector::from_vector(DVector::from_fn(std.len(), |k, _| {
        let kk = cast::<T>((k + 1) as f64);
        spec.amplitude * std[k].powf(spec.gamma) * kk.powf(tail)
    }))
}

/// Seed of every random stream in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

/// What a random stream is used for; distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Prior,
    Noise,
    Probe,
    Direction,
    Data,
    Other(u8),
}

impl StreamPurpose {
    fn code(self) -> u64 {
        match self {
            StreamPurpose::Prior => 1,
            StreamPurpose::Noise => 2,
            StreamPurpose::Probe => 3,
            StreamPurpose::Direction => 4,
            StreamPurpose::Data => 5,
            StreamPurpose::Other(c) => 16 + u64::from(c),
        }
    }
}

impl RngSeed {
    /// ChaCha20 stream keyed by `(seed, replicate, purpose)`. Replicates must
    /// stay below `2^56`.
    pub fn stream(self, replicate: u64, purpose: StreamPurpose) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.0);
        rng.set_stream((replicate << 8) | purpose.code());
        rng
    }
}

/// Vector of independent standard normals, drawn in `f64` and cast.
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<T> {
    DVector::from_fn(n, |_, _| cast::<T>(rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from the prior `N(0, tau^2 C0)`.
pub fn sample_prior<T: Scalar, R: Rng + ?Sized>(setup: &ProblemSetup<T>, rng: &mut R) -> CoefVector<T> {
    let z = standard_normal::<T, _>(rng, setup.dim());
    let std = setup.prior_std();
    CoefVector::from_vector(z.component_mul(&std) * setup.tau())
}

/// Draw from the noise law `N(0, C1)`.
pub fn sample_noise<T: Scalar, R: Rng + ?Sized>(
    setup: &ProblemSetup<T>,
    rng: &mut R,
) -> Result<CoefVector<T>> {
    let z = CoefVector::from_vector(standard_normal::<T, _>(rng, setup.dim()));
    setup.c1_sqrt()?.apply(&z)
}

/// `y = A^{-1} u + n^{-1/2} xi` with a fresh noise draw.
pub fn generate_data<T: Scalar, R: Rng + ?Sized>(
    setup: &ProblemSetup<T>,
    u_truth: &CoefVector<T>,
    rng: &mut R,
) -> Result<CoefVector<T>> {
    let xi = sample_noise(setup, rng)?;
    data_from_noise(setup, u_truth, &xi)
}

/// `y = A^{-1} u + n^{-1/2} xi` for a given noise realization.
pub fn data_from_noise<T: Scalar>(
    setup: &ProblemSetup<T>,
    u_truth: &CoefVector<T>,
    xi: &CoefVector<T>,
) -> Result<CoefVector<T>> {
    if xi.len() != u_truth.len() {
        return Err(LabError::DimensionMismatch {
            expected: u_truth.len(),
            found: xi.len(),
        });
    }
    let clean = setup.a_inv().apply(u_truth)?;
    Ok(clean.add(&xi.scaled(T::one() / setup.n().sqrt())))
}

/// Outcome of a truncation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    Stable,
    Divergent,
    Inconclusive,
}

/// Mean squared `t`-norm of a draw ensemble truncated to increasing prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationSweep {
    pub order: f64,
    pub levels: Vec<usize>,
    pub mean_sq_norms: Vec<f64>,
    /// Relative growth from the first to the last level.
    pub growth: f64,
    pub verdict: Regularity,
}

/// Evaluates `mean_i ||draw_i[..N]||_t^2` for each `N` in `levels`.
pub fn truncation_sweep<T: Scalar>(
    draws: &[CoefVector<T>],
    c0: &OperatorRep<T>,
    t: T,
    levels: &[usize],
) -> Result<TruncationSweep> {
    if levels.len() < 2 {
        return Err(LabError::TooFewPoints {
            needed: 2,
            got: levels.len(),
        });
    }
    if draws.is_empty() {
        return Err(invalid("draws", "need at least one draw"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("levels", "must be strictly increasing"));
    }
    let top = *levels.last().expect("nonempty");
    let c0_diag = c0.diagonal_values().ok_or(LabError::WrongKind {
        expected: "diagonal prior covariance",
    })?;
    if c0_diag.len() < top || draws.iter().any(|d| d.len() < top) {
        return Err(LabError::DimensionMismatch {
            expected: top,
            found: c0_diag.len().min(draws.iter().map(|d| d.len()).min().unwrap_or(0)),
        });
    }
    let mut mean_sq_norms = Vec::with_capacity(levels.len());
    for &level in levels {
        let c0_level = OperatorRep::diagonal(c0_diag.rows(0, level).into_owned())?;
        let mut acc = 0.0;
        for d in draws {
            let v = to_f64(scale_norm(&d.truncated(level), t, &c0_level)?);
            acc += v * v;
        }
        mean_sq_norms.push(acc / draws.len() as f64);
    }
    let growth = mean_sq_norms[mean_sq_norms.len() - 1] / mean_sq_norms[0] - 1.0;
    let verdict = if growth < STABLE_GROWTH {
        Regularity::Stable
    } else if growth > DIVERGENT_GROWTH {
        Regularity::Divergent
    } else {
        Regularity::Inconclusive
    };
    Ok(TruncationSweep {
        order: to_f64(t),
        levels: levels.to_vec(),
        mean_sq_norms,
        growth,
        verdict,
    })
}

/// Which random element a regularity check is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawSource {
    /// Prior draws, threshold `1 - s0`.
    Prior,
    /// Noise draws, threshold `beta - s0`.
    Noise,
}

/// Pair of sweeps just below and just above a regularity threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyReport {
    pub source: DrawSource,
    pub threshold: f64,
    pub below: TruncationSweep,
    pub above: TruncationSweep,
}

impl DichotomyReport {
    pub fn passed(&self) -> bool {
        self.below.verdict == Regularity::Stable && self.above.verdict == Regularity::Divergent
    }
}

/// Draws `count` samples at the finest level (`setup` must be built there) and
/// sweeps the norms at `threshold - 0.1` and at the divergent probe order:
/// `1 + 0.1` for prior draws, `beta + 0.1` for noise draws.
pub fn regularity_dichotomy<T: Scalar>(
    setup: &ProblemSetup<T>,
    source: DrawSource,
    count: usize,
    levels: &[usize],
    seed: RngSeed,
) -> Result<DichotomyReport> {
    let p = setup.params();
    let offset = cast::<T>(0.1);
    let (threshold, above_order) = match source {
        DrawSource::Prior => (T::one() - p.s0, T::one() + offset),
        DrawSource::Noise => (p.beta - p.s0, p.beta + offset),
    };
    if levels.last().copied() != Some(setup.dim()) {
        return Err(invalid("levels", "the last level must equal the setup truncation"));
    }
    if matches!(source, DrawSource::Noise) {
        setup.c1_sqrt()?;
    }
    let draws: Vec<CoefVector<T>> = (0..count as u64)
        .into_par_iter()
        .map(|i| match source {
            DrawSource::Prior => Ok(sample_prior(setup, &mut seed.stream(i, StreamPurpose::Prior))),
            DrawSource::Noise => sample_noise(setup, &mut seed.stream(i, StreamPurpose::Noise)),
        })
        .collect::<Result<_>>()?;
    let below = truncation_sweep(&draws, setup.c0(), threshold - offset, levels)?;
    let above = truncation_sweep(&draws, setup.c0(), above_order, levels)?;
    Ok(DichotomyReport {
        source,
        threshold: to_f64(threshold),
        below,
        above,
    })
}
