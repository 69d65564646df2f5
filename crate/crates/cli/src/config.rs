//! Run configuration, read from a sectioned TOML file.
//!
//! Every key is documented in `configs/reference.toml`.

use std::path::{Path, PathBuf};

use posterior_lab::{
    build_diagonal, build_general, build_perturbed_laplacian, build_perturbed_laplacian_colored_noise,
    dirichlet_spectrum, geometric_grid, MultiplierSpec, RateParams, RateTarget, Regime, Setup, Spectrum, TauRule,
    Truth,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub truth: TruthConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Diagonal,
    PerturbedLaplacian,
    PerturbedLaplacianColoredNoise,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    #[default]
    Algebraic,
    Dirichlet,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_n_trunc")]
    pub n_trunc: usize,
    /// Finer truncation for the guard and the assumption check; defaults to `2 n_trunc`.
    pub n_check: Option<usize>,
    #[serde(default)]
    pub basis: BasisName,
    pub alpha: Option<f64>,
    pub t_exp: Option<f64>,
    pub r_exp: Option<f64>,
    pub ell: Option<f64>,
    pub beta: Option<f64>,
    pub q: Option<MultiplierConfig>,
    pub r: Option<MultiplierConfig>,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "one")]
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierName {
    Zero,
    Constant,
    RaisedCosine,
    Tabulated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    pub family: MultiplierName,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one_u32")]
    pub m: u32,
    #[serde(default)]
    pub samples: Vec<f64>,
    #[serde(default)]
    pub smoothness: u32,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "default_margin")]
    pub margin_delta: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            margin_delta: default_margin(),
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    #[default]
    Contraction,
    MeanError,
    PerturbedLaplacian,
    PerturbedLaplacianColoredNoise,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    Moderate,
    Saturated,
    Minimal,
}

impl From<RegimeName> for Regime {
    fn from(r: RegimeName) -> Self {
        match r {
            RegimeName::Moderate => Regime::Moderate,
            RegimeName::Saturated => Regime::Saturated,
            RegimeName::Minimal => Regime::Minimal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Contraction,
    MeanError,
    PerturbedLaplacian,
    PerturbedLaplacianMeanError,
    PerturbedLaplacianColoredNoise,
    PerturbedLaplacianColoredNoiseMeanError,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub rule: RuleName,
    /// Picked from `gamma` for the contraction rule when absent.
    pub regime: Option<RegimeName>,
    /// Exponent `p` of `tau = n^p` for the manual rule.
    pub exponent: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "one_u32")]
    pub d: u32,
    /// Defaults to the target matching `rule`.
    pub target: Option<TargetName>,
    /// Interpolation index of mean-error targets.
    pub theta: Option<f64>,
    /// Norm order of the model-specific mean-error targets.
    pub t: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            rule: RuleName::Contraction,
            regime: None,
            exponent: None,
            epsilon: 0.0,
            d: 1,
            target: None,
            theta: None,
            t: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Explicit geometric `n` grid; overrides the range keys.
    pub n: Option<Vec<f64>>,
    #[serde(default = "default_n_min")]
    pub n_min: f64,
    #[serde(default = "default_n_max")]
    pub n_max: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    pub lambda: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub lambda_max: f64,
    #[serde(default = "default_lambda_min")]
    pub lambda_min: f64,
    #[serde(default = "default_lambda_points")]
    pub lambda_points: usize,
    /// Extra weighted mean-error columns of `rates.csv`.
    #[serde(default)]
    pub thetas: Vec<f64>,
    #[serde(default = "default_bound_thetas")]
    pub bound_thetas: Vec<f64>,
    #[serde(default)]
    pub spread_s: Vec<f64>,
    #[serde(default)]
    pub ambient: bool,
    #[serde(default = "one")]
    pub gamma_min: f64,
    #[serde(default = "default_gamma_max")]
    pub gamma_max: f64,
    #[serde(default = "default_gamma_points")]
    pub gamma_points: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        toml::from_str("").expect("every grid key has a default")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_slope_tol")]
    pub slope: f64,
    #[serde(default = "default_slope_tol")]
    pub bound_slope: f64,
    #[serde(default = "default_dual_tol")]
    pub dual: f64,
    #[serde(default = "default_guard_tol")]
    pub guard: f64,
    #[serde(default = "default_drift_tol")]
    pub drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        toml::from_str("").expect("every tolerance has a default")
    }
}

fn one() -> f64 {
    1.0
}
fn one_u32() -> u32 {
    1
}
fn default_n_trunc() -> usize {
    64
}
fn default_margin() -> f64 {
    0.1
}
fn default_n_min() -> f64 {
    1e3
}
fn default_n_max() -> f64 {
    1e9
}
fn default_n_points() -> usize {
    7
}
fn default_lambda_min() -> f64 {
    1e-6
}
fn default_lambda_points() -> usize {
    8
}
fn default_bound_thetas() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}
fn default_gamma_max() -> f64 {
    5.0
}
fn default_gamma_points() -> usize {
    41
}
fn default_probes() -> usize {
    20
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_slope_tol() -> f64 {
    0.05
}
fn default_dual_tol() -> f64 {
    1e-8
}
fn default_guard_tol() -> f64 {
    0.01
}
fn default_drift_tol() -> f64 {
    0.10
}

fn missing(section: &str, key: &str, kind: &str) -> CliError {
    CliError::Config(format!("[{section}] `{key}` is required for {kind}"))
}

impl MultiplierConfig {
    fn build(&self) -> CliResult<MultiplierSpec<f64>> {
        Ok(match self.family {
            MultiplierName::Zero => MultiplierSpec::zero(),
            MultiplierName::Constant => MultiplierSpec::constant(self.c)?,
            MultiplierName::RaisedCosine => MultiplierSpec::raised_cosine(self.c, self.m)?,
            MultiplierName::Tabulated => MultiplierSpec::tabulated(self.samples.clone(), self.smoothness)?,
        })
    }
}

fn multiplier(m: &Option<MultiplierConfig>) -> CliResult<MultiplierSpec<f64>> {
    match m {
        Some(m) => m.build(),
        None => Ok(MultiplierSpec::raised_cosine(1.0, 1)?),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}: ")
                })
                .unwrap_or_default();
            CliError::Input {
                path: path.to_path_buf(),
                message: format!("{location}{}", e.message()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let m = &self.model;
        if m.n_trunc == 0 {
            return Err(CliError::Config("[model] `n_trunc` must be positive".into()));
        }
        if self.n_check() <= m.n_trunc {
            return Err(CliError::Config("[model] `n_check` must exceed `n_trunc`".into()));
        }
        match m.kind {
            ModelKind::Diagonal => {
                m.alpha.ok_or_else(|| missing("model", "alpha", "the diagonal model"))?;
            }
            ModelKind::General => {
                for (key, v) in [("alpha", m.alpha), ("ell", m.ell), ("beta", m.beta)] {
                    v.ok_or_else(|| missing("model", key, "the general model"))?;
                }
            }
            ModelKind::PerturbedLaplacian | ModelKind::PerturbedLaplacianColoredNoise => {}
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("slope", t.slope),
            ("bound_slope", t.bound_slope),
            ("dual", t.dual),
            ("guard", t.guard),
            ("drift", t.drift),
        ] {
            if !(v > 0.0) {
                return Err(CliError::Config(format!("[tolerances] `{key}` must be positive")));
            }
        }
        Ok(())
    }

    pub fn n_check(&self) -> usize {
        self.model.n_check.unwrap_or(2 * self.model.n_trunc)
    }

    /// Builds the configured model at truncation `n_trunc`.
    pub fn setup(&self, n_trunc: usize) -> CliResult<Setup> {
        let m = &self.model;
        let setup = match m.kind {
            ModelKind::Diagonal => {
                let spectrum = match m.basis {
                    BasisName::Algebraic => Spectrum::algebraic(n_trunc)?,
                    BasisName::Dirichlet => dirichlet_spectrum(n_trunc)?,
                };
                let alpha = m.alpha.expect("validated");
                build_diagonal(&spectrum, alpha, m.t_exp.unwrap_or(0.0), m.r_exp.unwrap_or(0.0), m.tau, m.n)?
            }
            ModelKind::PerturbedLaplacian => build_perturbed_laplacian(n_trunc, &multiplier(&m.q)?, m.tau, m.n)?,
            ModelKind::PerturbedLaplacianColoredNoise => {
                build_perturbed_laplacian_colored_noise(n_trunc, &multiplier(&m.q)?, &multiplier(&m.r)?, m.tau, m.n)?
            }
            ModelKind::General => build_general(
                n_trunc,
                m.alpha.expect("validated"),
                m.ell.expect("validated"),
                m.beta.expect("validated"),
                &multiplier(&m.q)?,
                &multiplier(&m.r)?,
                m.tau,
                m.n,
            )?,
        };
        Ok(setup)
    }

    pub fn truth(&self) -> CliResult<Truth> {
        let t = &self.truth;
        Ok(Truth::new(t.gamma, t.margin_delta, t.amplitude)?)
    }

    pub fn rate_params(&self, setup: &Setup) -> CliResult<RateParams> {
        let p = setup.params();
        Ok(RateParams::new(
            self.truth.gamma,
            p.delta,
            p.s0,
            self.schedule.epsilon,
            p.beta,
            p.ell,
        )?)
    }

    pub fn tau_rule(&self, params: &RateParams) -> CliResult<TauRule> {
        let s = &self.schedule;
        Ok(match s.rule {
            RuleName::Contraction => match s.regime {
                Some(r) => TauRule::Contraction(r.into()),
                None => TauRule::contraction_for(params.gamma, params.delta),
            },
            RuleName::MeanError => TauRule::MeanError(
                s.regime
                    .ok_or_else(|| missing("schedule", "regime", "the mean_error rule"))?
                    .into(),
            ),
            RuleName::PerturbedLaplacian => TauRule::PerturbedLaplacian { d: s.d },
            RuleName::PerturbedLaplacianColoredNoise => TauRule::PerturbedLaplacianColoredNoise { d: s.d },
            RuleName::Manual => TauRule::Manual(
                s.exponent
                    .ok_or_else(|| missing("schedule", "exponent", "the manual rule"))?,
            ),
        })
    }

    pub fn rate_target(&self) -> CliResult<RateTarget> {
        let s = &self.schedule;
        let name = s.target.unwrap_or(match s.rule {
            RuleName::Contraction | RuleName::Manual => TargetName::Contraction,
            RuleName::MeanError => TargetName::MeanError,
            RuleName::PerturbedLaplacian => TargetName::PerturbedLaplacian,
            RuleName::PerturbedLaplacianColoredNoise => TargetName::PerturbedLaplacianColoredNoise,
        });
        let theta = || s.theta.ok_or_else(|| missing("schedule", "theta", "mean-error targets"));
        let t = || s.t.ok_or_else(|| missing("schedule", "t", "model mean-error targets"));
        Ok(match name {
            TargetName::Contraction => RateTarget::Contraction,
            TargetName::MeanError => RateTarget::MeanError { theta: theta()? },
            TargetName::PerturbedLaplacian => RateTarget::PerturbedLaplacian { d: s.d },
            TargetName::PerturbedLaplacianMeanError => RateTarget::PerturbedLaplacianMeanError { d: s.d, t: t()? },
            TargetName::PerturbedLaplacianColoredNoise => RateTarget::PerturbedLaplacianColoredNoise { d: s.d },
            TargetName::PerturbedLaplacianColoredNoiseMeanError => {
                RateTarget::PerturbedLaplacianColoredNoiseMeanError { d: s.d, t: t()? }
            }
        })
    }

    pub fn n_grid(&self) -> Vec<f64> {
        let g = &self.grids;
        g.n.clone().unwrap_or_else(|| geometric_grid(g.n_min, g.n_max, g.n_points))
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        let g = &self.grids;
        g.lambda
            .clone()
            .unwrap_or_else(|| geometric_grid(g.lambda_max, g.lambda_min, g.lambda_points))
    }

    pub fn gamma_grid(&self) -> CliResult<Vec<f64>> {
        let g = &self.grids;
        if g.gamma_points < 2 || !(g.gamma_max > g.gamma_min) {
            return Err(CliError::Config(
                "[grids] gamma range needs gamma_max > gamma_min and at least 2 points".into(),
            ));
        }
        let step = (g.gamma_max - g.gamma_min) / (g.gamma_points - 1) as f64;
        Ok((0..g.gamma_points).map(|i| g.gamma_min + step * i as f64).collect())
    }
}
