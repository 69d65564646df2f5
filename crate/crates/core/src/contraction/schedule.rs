//! Prior scalings `tau(n) = n^p` and the rate exponents they achieve.

use log::warn;

use crate::error::{invalid, Result};

/// Regularity regime of the truth relative to the saturation level `1 + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `gamma <= 1 + delta`.
    Moderate,
    /// `gamma > 1 + delta`; extra smoothness no longer helps.
    Saturated,
    /// `gamma = 1`, the weakest admissible truth.
    Minimal,
}

/// How `tau` is tied to `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// Optimised for the posterior-mean error in weighted norms.
    MeanError(Regime),
    /// Optimised for posterior contraction (`Minimal` is not a separate case here).
    Contraction(Regime),
    /// Contraction schedule of the Laplacian-plus-potential model in dimension `d`.
    PerturbedLaplacian { d: u32 },
    /// Contraction schedule of the model with additionally colored noise.
    PerturbedLaplacianColoredNoise { d: u32 },
    /// `tau = n^p` with `p` given.
    Manual(f64),
}

impl TauRule {
    /// Contraction rule matching the regime of `gamma`.
    pub fn contraction_for(gamma: f64, delta: f64) -> Self {
        if gamma > 1.0 + delta {
            TauRule::Contraction(Regime::Saturated)
        } else {
            TauRule::Contraction(Regime::Moderate)
        }
    }
}

/// Exponent inputs shared by schedules and rate formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub gamma: f64,
    pub delta: f64,
    pub s0: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub ell: f64,
}

impl RateParams {
    pub fn new(gamma: f64, delta: f64, s0: f64, epsilon: f64, beta: f64, ell: f64) -> Result<Self> {
        if !(gamma >= 1.0) {
            return Err(invalid("gamma", "the rates require gamma >= 1"));
        }
        if !(epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&s0) {
            return Err(invalid("s0", "must lie in [0, 1)"));
        }
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        Ok(Self {
            gamma,
            delta,
            s0,
            epsilon,
            beta,
            ell,
        })
    }

    fn weak_exponent(&self) -> f64 {
        self.beta - 2.0 * self.ell
    }
}

/// A resolved schedule `tau(n) = n^p`, `lambda(n) = n^{-1-2p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauSchedule {
    pub rule: TauRule,
    pub params: RateParams,
    pub exponent: f64,
}

impl TauSchedule {
    pub fn tau(&self, n: f64) -> f64 {
        n.powf(self.exponent)
    }

    pub fn lambda(&self, n: f64) -> f64 {
        let tau = self.tau(n);
        1.0 / (n * tau * tau)
    }
}

/// Resolves the exponent `p` of `tau(n) = n^p`.
pub fn tau_schedule(rule: TauRule, params: RateParams) -> Result<TauSchedule> {
    let RateParams {
        gamma,
        delta,
        s0,
        epsilon: eps,
        ..
    } = params;
    let theory = !matches!(rule, TauRule::Manual(_));
    if theory && !(delta > 2.0 * s0) {
        return Err(invalid("delta", "rate schedules need delta > 2 s0"));
    }
    let saturation = 1.0 + delta;
    let exponent = match rule {
        TauRule::Manual(p) => p,
        TauRule::MeanError(Regime::Moderate) | TauRule::Contraction(Regime::Moderate) => {
            if gamma > saturation {
                warn!("gamma = {gamma} exceeds the saturation level {saturation}");
            }
            let g = gamma - 1.0 + s0 + eps;
            -g / (2.0 * (delta + g))
        }
        TauRule::MeanError(Regime::Saturated) | TauRule::Contraction(Regime::Saturated) => {
            if gamma <= saturation {
                warn!("gamma = {gamma} does not exceed the saturation level {saturation}");
            }
            let g = delta + s0 + eps;
            -g / (2.0 * (delta + g))
        }
        TauRule::MeanError(Regime::Minimal) => {
            if gamma != 1.0 {
                warn!("minimal-regularity schedule used with gamma = {gamma}");
            }
            -(s0 + eps) / (2.0 * (delta + s0 + eps))
        }
        TauRule::Contraction(Regime::Minimal) => {
            return Err(invalid("rule", "contraction has no separate minimal-regularity case"));
        }
        TauRule::PerturbedLaplacian { d } => {
            let d = check_dimension(d)?;
            let g = gamma.min(3.0);
            (4.0 - d - 4.0 * g - eps) / (8.0 * g + 8.0 + 2.0 * d + 2.0 * eps)
        }
        TauRule::PerturbedLaplacianColoredNoise { d } => {
            let d = check_dimension(d)?;
            (4.0 - d - (4.0 * gamma).min(11.0) - eps)
                / ((8.0 * gamma).min(22.0) + 6.0 + 2.0 * d + 2.0 * eps)
        }
    };
    if !(exponent < 0.0 && exponent > -0.5) {
        return Err(invalid(
            "tau exponent",
            format!("p = {exponent} must satisfy -1/2 < p < 0 so that tau -> 0 and lambda -> 0"),
        ));
    }
    Ok(TauSchedule {
        rule,
        params,
        exponent,
    })
}

fn check_dimension(d: u32) -> Result<f64> {
    if !(1..=3).contains(&d) {
        return Err(invalid("d", "dimension must be 1, 2 or 3"));
    }
    Ok(f64::from(d))
}

/// Which rate a theoretical exponent refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateTarget {
    /// `e` in `eps_n = n^{-e}`.
    Contraction,
    /// `h` in `E ||m - u||_eta^2 <= c n^{-h}`, `eta = (1 - theta)(beta - 2 ell) + theta`.
    MeanError { theta: f64 },
    /// `e` for the Laplacian-plus-potential model.
    PerturbedLaplacian { d: u32 },
    /// `h` in `E ||m - u||_t^2` for the Laplacian-plus-potential model.
    PerturbedLaplacianMeanError { d: u32, t: f64 },
    /// `e` for the model with colored noise.
    PerturbedLaplacianColoredNoise { d: u32 },
    /// `h` in `E ||m - u||_t^2` for the model with colored noise.
    PerturbedLaplacianColoredNoiseMeanError { d: u32, t: f64 },
}

impl RateTarget {
    /// Slope of the squared quantity against `n` on log-log axes.
    pub fn squared_slope(&self, exponent: f64) -> f64 {
        match self {
            RateTarget::Contraction
            | RateTarget::PerturbedLaplacian { .. }
            | RateTarget::PerturbedLaplacianColoredNoise { .. } => -2.0 * exponent,
            _ => -exponent,
        }
    }
}

/// Theoretical rate exponent. A zero mean-error exponent means no convergence
/// is guaranteed.
pub fn theoretical_exponent(target: RateTarget, p: &RateParams) -> Result<f64> {
    let RateParams {
        gamma,
        delta,
        s0,
        epsilon: eps,
        ..
    } = *p;
    let saturated = gamma > 1.0 + delta;
    let weak_nonpositive = p.weak_exponent() <= 0.0;
    Ok(match target {
        RateTarget::Contraction => {
            if !saturated {
                let den = 2.0 * (delta + gamma - 1.0 + s0 + eps);
                if weak_nonpositive {
                    gamma / den
                } else {
                    (delta + gamma - 1.0) / den
                }
            } else if weak_nonpositive {
                (delta + 1.0) / (2.0 * (2.0 * delta + s0 + eps))
            } else {
                delta / (2.0 * delta + s0 + eps)
            }
        }
        RateTarget::MeanError { theta } => {
            if !(0.0..=1.0).contains(&theta) {
                return Err(invalid("theta", "must lie in [0, 1]"));
            }
            if gamma == 1.0 {
                if theta == 1.0 {
                    0.0
                } else {
                    (1.0 - theta) * delta / (delta + s0 + eps)
                }
            } else if !saturated {
                (delta + gamma - 1.0 - theta * delta) / (delta + gamma - 1.0 + s0 + eps)
            } else {
                (2.0 - theta) * delta / (2.0 * delta + s0 + eps)
            }
        }
        RateTarget::PerturbedLaplacian { d } => {
            let d = check_dimension(d)?;
            if gamma < 3.0 {
                2.0 * gamma / (4.0 + d + 4.0 * gamma + 2.0 * eps)
            } else {
                6.0 / (16.0 + d + 2.0 * eps)
            }
        }
        RateTarget::PerturbedLaplacianMeanError { d, t } => {
            let d = check_dimension(d)?;
            check_order(t, -1.0, gamma)?;
            if gamma < 3.0 {
                (4.0 * gamma - 4.0 * t) / (4.0 + d + 4.0 * gamma + 2.0 * eps)
            } else {
                (12.0 - 4.0 * t) / (16.0 + d + 2.0 * eps)
            }
        }
        RateTarget::PerturbedLaplacianColoredNoise { d } => {
            let d = check_dimension(d)?;
            if gamma < 2.75 {
                2.0 * gamma / (3.0 + d + 4.0 * gamma + 2.0 * eps)
            } else {
                11.0 / (28.0 + 2.0 * d + 2.0 * eps)
            }
        }
        RateTarget::PerturbedLaplacianColoredNoiseMeanError { d, t } => {
            let d = check_dimension(d)?;
            check_order(t, -0.75, gamma)?;
            if gamma < 2.75 {
                (4.0 * gamma - 4.0 * t) / (3.0 + d + 4.0 * gamma + 2.0 * eps)
            } else {
                (22.0 - 8.0 * t) / (28.0 + 2.0 * d + 2.0 * eps)
            }
        }
    })
}

fn check_order(t: f64, lower: f64, gamma: f64) -> Result<()> {
    let upper_ok = t < 1.0 || (t == 1.0 && gamma > 1.0);
    if !(t >= lower) || !upper_ok {
        return Err(invalid("t", format!("norm order must lie in [{lower}, 1), or equal 1 when gamma > 1")));
    }
    Ok(())
}

/// `(gamma, e)` pairs of the contraction exponent over a regularity grid.
pub fn exponent_curve(base: &RateParams, gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    gammas
        .iter()
        .map(|&g| {
            let p = RateParams::new(g, base.delta, base.s0, base.epsilon, base.beta, base.ell)?;
            Ok((g, theoretical_exponent(RateTarget::Contraction, &p)?))
        })
        .collect()
}
