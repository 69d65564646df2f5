//! Numerical diagnostics for the norm equivalences linking `A^{-1}`, `C0` and `C1`.
//!
//! Each inequality `||L u|| <= c ||D u||` (with diagonal `D`, a power of `C0`)
//! is sampled on every basis vector and on random directions drawn in the
//! coordinates where the right-hand side is Euclidean. A finite ratio that is
//! stable when the truncation is refined is taken as evidence for the bound.
//! This is a heuristic; it proves nothing.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::models::ProblemSetup;
use crate::scalar::{cast, to_f64, Scalar};
use crate::synthetic::{standard_normal, RngSeed, StreamPurpose};

/// Drift of the maximal ratio between truncations below which a check passes.
pub const DRIFT_TOLERANCE: f64 = 0.10;

/// The sampled inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssumptionItem {
    /// `||C1^{-1/2} A^{-1} u|| ~ ||C0^{ell - beta/2} u||` (two-sided).
    ForwardEquivalence,
    /// `||C0^{-rho/2} C1^{1/2} u|| <= c ||C0^{(beta - rho)/2} u||`.
    NoiseSmoothing,
    /// `||C0^{s/2} C1^{-1/2} u|| <= c ||C0^{(s - beta)/2} u||`.
    NoisePrecision,
    /// `||C0^{-s/2} C1^{-1/2} A^{-1} u|| <= c ||C0^{(2 ell - beta - s)/2} u||`.
    WhitenedForward,
    /// `||C0^{eta/2} A^{-1} C1^{-1} u|| <= c ||C0^{eta/2 + ell - beta} u||`.
    AdjointData,
}

impl AssumptionItem {
    pub const ALL: [AssumptionItem; 5] = [
        AssumptionItem::ForwardEquivalence,
        AssumptionItem::NoiseSmoothing,
        AssumptionItem::NoisePrecision,
        AssumptionItem::WhitenedForward,
        AssumptionItem::AdjointData,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AssumptionItem::ForwardEquivalence => "forward_equivalence",
            AssumptionItem::NoiseSmoothing => "noise_smoothing",
            AssumptionItem::NoisePrecision => "noise_precision",
            AssumptionItem::WhitenedForward => "whitened_forward",
            AssumptionItem::AdjointData => "adjoint_data",
        }
    }

    pub fn is_two_sided(self) -> bool {
        matches!(self, AssumptionItem::ForwardEquivalence)
    }

    /// Exponent grid (`rho`, `s` or `eta`) over the admissible range.
    pub fn exponents(self, s0: f64, beta: f64, ell: f64) -> Vec<Option<f64>> {
        let dedup = |mut v: Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            v.into_iter().map(Some).collect()
        };
        match self {
            AssumptionItem::ForwardEquivalence => vec![None],
            AssumptionItem::NoiseSmoothing => {
                let hi = beta - s0;
                let lo = (hi - 1.0).ceil();
                let top = hi - 0.05;
                if top <= lo {
                    dedup(vec![lo])
                } else {
                    dedup(vec![lo, 0.5 * (lo + top), top])
                }
            }
            AssumptionItem::NoisePrecision | AssumptionItem::WhitenedForward => {
                let first = s0 + 0.05;
                let mut v = vec![first.min(1.0), 1.0];
                if first < 0.5 {
                    v.push(0.5);
                }
                dedup(v)
            }
            AssumptionItem::AdjointData => {
                let lo = beta - 2.0 * ell;
                dedup(vec![lo, 0.5 * (lo + 1.0), 1.0])
            }
        }
    }
}

/// Ratio statistics for one item at one exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    pub item: AssumptionItem,
    pub exponent: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub min_fine: f64,
    pub max_fine: f64,
    /// `|max_fine / max - 1|`.
    pub drift: f64,
    pub pass: bool,
    /// Ratios at the working truncation: basis vectors first, then random probes.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub n_coarse: usize,
    pub n_fine: usize,
    pub probes: usize,
    pub entries: Vec<RatioStats>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_drift(&self) -> f64 {
        self.entries.iter().map(|e| e.drift).fold(0.0, f64::max)
    }
}

/// Precomputed operator pieces of one truncation level.
struct Pieces<T: Scalar> {
    c0: DVector<T>,
    a_inv: DMatrix<T>,
    c1_sqrt: DMatrix<T>,
    c1_inv_sqrt: DMatrix<T>,
    /// `A^{-1} C1^{-1}`.
    a_inv_c1_inv: DMatrix<T>,
}

impl<T: Scalar> Pieces<T> {
    fn new(setup: &ProblemSetup<T>) -> Result<Self> {
        let a_inv = setup.a_inv().to_dense();
        let c1_inv = setup.c1_factor().inverse();
        Ok(Self {
            c0: setup.c0().diagonal_values().expect("prior covariance is diagonal").clone(),
            c1_sqrt: setup.c1_sqrt()?.to_dense(),
            c1_inv_sqrt: setup.c1_inv_sqrt()?.to_dense(),
            a_inv_c1_inv: &a_inv * c1_inv,
            a_inv,
        })
    }

    fn c0_pow(&self, p: f64) -> DVector<T> {
        let p = cast::<T>(p);
        self.c0.map(|v| v.powf(p))
    }

    /// `L D^{-1}` for the given item.
    fn scaled_operator(&self, item: AssumptionItem, x: Option<f64>, s0_beta_ell: (f64, f64, f64)) -> DMatrix<T> {
        let (_, beta, ell) = s0_beta_ell;
        let x = x.unwrap_or(0.0);
        let (left, core, right): (DVector<T>, &DMatrix<T>, DVector<T>) = match item {
            AssumptionItem::ForwardEquivalence => {
                let core = &self.c1_inv_sqrt * &self.a_inv;
                return scale(&DVector::from_element(self.c0.len(), T::one()), &core, &self.c0_pow(-(ell - beta / 2.0)));
            }
            AssumptionItem::NoiseSmoothing => (self.c0_pow(-x / 2.0), &self.c1_sqrt, self.c0_pow(-(beta - x) / 2.0)),
            AssumptionItem::NoisePrecision => (self.c0_pow(x / 2.0), &self.c1_inv_sqrt, self.c0_pow(-(x - beta) / 2.0)),
            AssumptionItem::WhitenedForward => {
                let core = &self.c1_inv_sqrt * &self.a_inv;
                return scale(&self.c0_pow(-x / 2.0), &core, &self.c0_pow(-(2.0 * ell - beta - x) / 2.0));
            }
            AssumptionItem::AdjointData => (
                self.c0_pow(x / 2.0),
                &self.a_inv_c1_inv,
                self.c0_pow(-(x / 2.0 + ell - beta)),
            ),
        };
        scale(&left, core, &right)
    }
}

fn scale<T: Scalar>(left: &DVector<T>, core: &DMatrix<T>, right: &DVector<T>) -> DMatrix<T> {
    DMatrix::from_fn(core.nrows(), core.ncols(), |i, j| left[i] * core[(i, j)] * right[j])
}

fn ratios<T: Scalar>(m: &DMatrix<T>, probes: &[DVector<T>]) -> Vec<f64> {
    let mut out: Vec<f64> = m.column_iter().map(|c| to_f64(c.norm())).collect();
    out.extend(probes.iter().map(|v| to_f64((m * v).norm() / v.norm())));
    out
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Samples every inequality at truncation `setup.dim()` and at the finer `n_fine`.
pub fn verify_assumptions<T: Scalar>(
    setup: &ProblemSetup<T>,
    probes: usize,
    n_fine: usize,
    seed: RngSeed,
) -> Result<AssumptionReport> {
    if n_fine <= setup.dim() {
        return Err(invalid("N2", "must exceed the working truncation"));
    }
    let fine = setup.rebuild(n_fine)?;
    let coarse_pieces = Pieces::new(setup)?;
    let fine_pieces = Pieces::new(&fine)?;
    let draw = |n: usize, level: u64| -> Vec<DVector<T>> {
        let mut rng = seed.stream(level, StreamPurpose::Probe);
        (0..probes).map(|_| standard_normal(&mut rng, n)).collect()
    };
    let coarse_probes = draw(setup.dim(), 0);
    let fine_probes = draw(n_fine, 1);

    let p = setup.params();
    let sbe = (to_f64(p.s0), to_f64(p.beta), to_f64(p.ell));
    let tasks: Vec<(AssumptionItem, Option<f64>)> = AssumptionItem::ALL
        .iter()
        .flat_map(|&item| item.exponents(sbe.0, sbe.1, sbe.2).into_iter().map(move |x| (item, x)))
        .collect();

    let entries = tasks
        .par_iter()
        .map(|&(item, x)| {
            let coarse = ratios(&coarse_pieces.scaled_operator(item, x, sbe), &coarse_probes);
            let finer = ratios(&fine_pieces.scaled_operator(item, x, sbe), &fine_probes);
            let (min, max) = min_max(&coarse);
            let (min_fine, max_fine) = min_max(&finer);
            let drift = (max_fine / max - 1.0).abs();
            let finite = coarse.iter().chain(&finer).all(|r| r.is_finite() && *r > 0.0);
            RatioStats {
                item,
                exponent: x,
                min,
                max,
                min_fine,
                max_fine,
                drift,
                pass: finite && drift < DRIFT_TOLERANCE,
                ratios: coarse,
            }
        })
        .collect();
    Ok(AssumptionReport {
        n_coarse: setup.dim(),
        n_fine,
        probes,
        entries,
    })
}
