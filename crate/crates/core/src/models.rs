//! Operator triples `(A^{-1}, C0, C1)` for the diagonal model and for
//! perturbed Dirichlet Laplacians on the unit interval.

use std::sync::{Arc, OnceLock};

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, LabError, Result};
use crate::scalar::{cast, to_f64, Scalar};
use crate::spectral::{BasisKind, OperatorRep, ScaleParams, SpdFactor, Spectrum};

/// Per-entry absolute tolerance for quadrature-assembled Gram matrices.
pub const GRAM_QUADRATURE_TOL: f64 = 1e-12;

const SIMPSON_MAX_DEPTH: u32 = 48;

/// Eigenvalues `(k pi)^2` of the Dirichlet Laplacian on `(0, 1)`.
pub fn dirichlet_spectrum<T: Scalar>(n_trunc: usize) -> Result<Spectrum<T>> {
    if n_trunc == 0 {
        return Err(invalid("N", "truncation level must be at least 1"));
    }
    let pi = std::f64::consts::PI;
    let rho_sq = (1..=n_trunc)
        .map(|k| cast::<T>((k as f64 * pi).powi(2)))
        .collect();
    Spectrum::new(rho_sq, BasisKind::DirichletSine)
}

/// Shape of a multiplier function `w` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierFamily<T> {
    Constant(T),
    /// `c (1 + cos(2 pi m x))`.
    RaisedCosine { c: T, m: u32 },
    /// Samples on a uniform grid including both endpoints, linearly interpolated.
    Tabulated(Vec<T>),
}

/// A nonnegative multiplier with its declared Sobolev smoothness order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSpec<T> {
    family: MultiplierFamily<T>,
    smoothness_order: u32,
}

impl<T: Scalar> MultiplierSpec<T> {
    pub fn constant(c: T) -> Result<Self> {
        if !(c >= T::zero()) || !c.is_finite() {
            return Err(invalid("multiplier", "constant must be finite and nonnegative"));
        }
        Ok(Self {
            family: MultiplierFamily::Constant(c),
            smoothness_order: u32::MAX,
        })
    }

    pub fn zero() -> Self {
        Self {
            family: MultiplierFamily::Constant(T::zero()),
            smoothness_order: u32::MAX,
        }
    }

    pub fn raised_cosine(c: T, m: u32) -> Result<Self> {
        if !(c >= T::zero()) || !c.is_finite() {
            return Err(invalid("multiplier", "raised cosine amplitude must be finite and nonnegative"));
        }
        Ok(Self {
            family: MultiplierFamily::RaisedCosine { c, m },
            smoothness_order: u32::MAX,
        })
    }

    /// Piecewise-linear multiplier; the caller declares the smoothness of the
    /// function the samples were taken from.
    pub fn tabulated(samples: Vec<T>, smoothness_order: u32) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("multiplier", "need at least two samples"));
        }
        if samples.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("multiplier", "samples must be finite and nonnegative"));
        }
        Ok(Self {
            family: MultiplierFamily::Tabulated(samples),
            smoothness_order,
        })
    }

    pub fn family(&self) -> &MultiplierFamily<T> {
        &self.family
    }

    pub fn smoothness_order(&self) -> u32 {
        self.smoothness_order
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            MultiplierFamily::Constant(c) => *c == T::zero(),
            MultiplierFamily::RaisedCosine { c, .. } => *c == T::zero(),
            MultiplierFamily::Tabulated(s) => s.iter().all(|v| *v == T::zero()),
        }
    }

    /// Value `w(x)` for `x` in `[0, 1]`.
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.family {
            MultiplierFamily::Constant(c) => to_f64(*c),
            MultiplierFamily::RaisedCosine { c, m } => {
                to_f64(*c) * (1.0 + (2.0 * std::f64::consts::PI * f64::from(*m) * x).cos())
            }
            MultiplierFamily::Tabulated(s) => {
                let pieces = s.len() - 1;
                let pos = (x.clamp(0.0, 1.0) * pieces as f64).min(pieces as f64);
                let i = (pos.floor() as usize).min(pieces - 1);
                let frac = pos - i as f64;
                to_f64(s[i]) * (1.0 - frac) + to_f64(s[i + 1]) * frac
            }
        }
    }
}

/// Galerkin matrix `2 int_0^1 w(x) sin(j pi x) sin(k pi x) dx` in the sine basis.
pub fn multiplication_gram<T: Scalar>(
    w: &MultiplierSpec<T>,
    spectrum: &Spectrum<T>,
) -> Result<OperatorRep<T>> {
    if spectrum.basis() != BasisKind::DirichletSine {
        return Err(LabError::WrongKind {
            expected: "sine-basis spectrum",
        });
    }
    let n = spectrum.len();
    let matrix = match &w.family {
        MultiplierFamily::Constant(c) => DMatrix::from_diagonal_element(n, n, *c),
        MultiplierFamily::RaisedCosine { c, m } => raised_cosine_gram(*c, *m as usize, n),
        MultiplierFamily::Tabulated(samples) => tabulated_gram(samples, n)?,
    };
    OperatorRep::dense_symmetric(matrix)
}

/// `c [delta_jk + (delta_{|j-k|,2m} - delta_{j+k,2m}) / 2]` with one-based `j, k`.
fn raised_cosine_gram<T: Scalar>(c: T, m: usize, n: usize) -> DMatrix<T> {
    if m == 0 {
        return DMatrix::from_diagonal_element(n, n, c + c);
    }
    let half = c * cast::<T>(0.5);
    DMatrix::from_fn(n, n, |i, j| {
        let (j1, k1) = (i + 1, j + 1);
        let mut v = if j1 == k1 { c } else { T::zero() };
        if j1.abs_diff(k1) == 2 * m {
            v += half;
        }
        if j1 + k1 == 2 * m {
            v -= half;
        }
        v
    })
}

fn tabulated_gram<T: Scalar>(samples: &[T], n: usize) -> Result<DMatrix<T>> {
    // 2 sin(a) sin(b) = cos(a - b) - cos(a + b), so every entry is a
    // difference of two cosine moments I(m) = int w(x) cos(m pi x) dx.
    let values: Vec<f64> = samples.iter().map(|v| to_f64(*v)).collect();
    let moment_tol = 0.5 * GRAM_QUADRATURE_TOL;
    let moments: Vec<(f64, f64, bool)> = (0..=2 * n)
        .map(|m| cosine_moment(&values, m as f64, moment_tol))
        .collect();
    let mut worst: Option<(usize, usize, f64)> = None;
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i.abs_diff(j), i + j + 2);
        let (va, ea, oka) = moments[a];
        let (vb, eb, okb) = moments[b];
        let est = ea + eb;
        if (!(oka && okb) || est > GRAM_QUADRATURE_TOL) && worst.is_none_or(|w| est > w.2) {
            worst = Some((i, j, est));
        }
        cast::<T>(va - vb)
    });
    if let Some((row, col, estimate)) = worst {
        return Err(LabError::QuadratureFailure { row, col, estimate });
    }
    Ok(matrix)
}

/// `int_0^1 w(x) cos(freq pi x) dx` for piecewise-linear `w`; returns
/// (value, error estimate, converged).
fn cosine_moment(samples: &[f64], freq: f64, tol: f64) -> (f64, f64, bool) {
    let pieces = samples.len() - 1;
    let h = 1.0 / pieces as f64;
    let omega = freq * std::f64::consts::PI;
    // Panels short enough that no single Simpson rule sees a full period.
    let panels_per_piece = ((freq * h * 2.0).ceil() as usize).max(1);
    let total_panels = pieces * panels_per_piece;
    let panel_tol = tol / total_panels as f64;
    let mut value = 0.0;
    let mut err = 0.0;
    let mut ok = true;
    for p in 0..pieces {
        let (x0, w0, w1) = (p as f64 * h, samples[p], samples[p + 1]);
        let f = |x: f64| (w0 + (w1 - w0) * (x - x0) / h) * (omega * x).cos();
        let width = h / panels_per_piece as f64;
        for q in 0..panels_per_piece {
            let a = x0 + q as f64 * width;
            let (v, e, conv) = adaptive_simpson(&f, a, a + width, panel_tol);
            value += v;
            err += e;
            ok &= conv;
        }
    }
    (value, err, ok)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64, bool) {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> (f64, f64, bool) {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    let est = delta.abs() / 15.0;
    let refined = SIMPSON_MAX_DEPTH - depth >= 2;
    if est <= tol && refined {
        return (left + right + delta / 15.0, est, true);
    }
    if depth == 0 {
        return (left + right + delta / 15.0, est, false);
    }
    let (lv, le, lok) = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
    let (rv, re, rok) = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    (lv + rv, le + re, lok && rok)
}

/// Recipe that produced a setup, kept so it can be rebuilt at another truncation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec<T> {
    /// Simultaneously diagonal operators `(rho^2)^{-t}`, `(rho^2)^{-alpha}`, `(rho^2)^{-r}`.
    Diagonal { alpha: T, t_exp: T, r_exp: T },
    /// `A = A0^{ell alpha} + M_q`, `C1 = (A0^{beta alpha / 2} + M_r)^{-2}`, `C0 = A0^{-alpha}`.
    Perturbed {
        alpha: T,
        ell: T,
        beta: T,
        q: MultiplierSpec<T>,
        r: MultiplierSpec<T>,
    },
    /// Operators supplied directly; cannot be rebuilt at another truncation.
    Custom,
}

#[derive(Debug)]
struct Operators<T: Scalar> {
    a_inv: OperatorRep<T>,
    c0: OperatorRep<T>,
    c1: OperatorRep<T>,
    c1_factor: SpdFactor<T>,
    /// `A^{-1} C1^{-1} A^{-1}`.
    data_precision: OperatorRep<T>,
    c1_sqrt: OnceLock<OperatorRep<T>>,
    c1_inv_sqrt: OnceLock<OperatorRep<T>>,
}

/// A linear inverse problem `y = A^{-1} u + n^{-1/2} xi` with prior `N(0, tau^2 C0)`.
///
/// The operators are shared between setups that differ only in `(tau, n)`.
#[derive(Debug, Clone)]
pub struct ProblemSetup<T: Scalar> {
    spectrum: Spectrum<T>,
    ops: Arc<Operators<T>>,
    tau: T,
    n: T,
    lambda: T,
    params: ScaleParams<T>,
    model: ModelSpec<T>,
}

impl<T: Scalar> ProblemSetup<T> {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        spectrum: Spectrum<T>,
        a_inv: OperatorRep<T>,
        c0: OperatorRep<T>,
        c1: OperatorRep<T>,
        tau: T,
        n: T,
        params: ScaleParams<T>,
        model: ModelSpec<T>,
    ) -> Result<Self> {
        let dim = spectrum.len();
        for op in [&a_inv, &c0, &c1] {
            if op.dim() != dim {
                return Err(LabError::DimensionMismatch {
                    expected: dim,
                    found: op.dim(),
                });
            }
            if !op.is_spd() {
                return Err(LabError::NotSpd {
                    min_eigenvalue: op.min_eigenvalue().map(to_f64).unwrap_or(f64::NAN),
                });
            }
        }
        if !c0.is_diagonal() {
            return Err(LabError::WrongKind {
                expected: "diagonal prior covariance",
            });
        }
        let c1_factor = c1.factor()?;
        let data_precision = match (a_inv.diagonal_values(), &c1_factor) {
            (Some(a), SpdFactor::Diagonal(c)) => {
                OperatorRep::diagonal(a.component_mul(a).component_div(c))?
            }
            _ => {
                let a_dense = a_inv.to_dense();
                let inner = c1_factor.solve_matrix(&a_dense);
                OperatorRep::dense_symmetric(a_inv.apply_matrix(&inner))?
            }
        };
        let (tau, n, lambda) = check_scaling(tau, n)?;
        Ok(Self {
            spectrum,
            ops: Arc::new(Operators {
                a_inv,
                c0,
                c1,
                c1_factor,
                data_precision,
                c1_sqrt: OnceLock::new(),
                c1_inv_sqrt: OnceLock::new(),
            }),
            tau,
            n,
            lambda,
            params,
            model,
        })
    }

    /// Setup from explicit operators. `c0` must be diagonal and all three SPD.
    pub fn from_operators(
        spectrum: Spectrum<T>,
        a_inv: OperatorRep<T>,
        c0: OperatorRep<T>,
        c1: OperatorRep<T>,
        tau: T,
        n: T,
        params: ScaleParams<T>,
    ) -> Result<Self> {
        Self::assemble(spectrum, a_inv, c0, c1, tau, n, params, ModelSpec::Custom)
    }

    /// Same operators with a new `(tau, n)`.
    pub fn with_scaling(&self, tau: T, n: T) -> Result<Self> {
        let (tau, n, lambda) = check_scaling(tau, n)?;
        Ok(Self {
            tau,
            n,
            lambda,
            ..self.clone()
        })
    }

    /// Same model family rebuilt at truncation level `n_trunc`, same `(tau, n)`.
    pub fn rebuild(&self, n_trunc: usize) -> Result<Self> {
        let spectrum = match self.spectrum.basis() {
            BasisKind::DirichletSine => dirichlet_spectrum(n_trunc)?,
            BasisKind::Algebraic => Spectrum::algebraic(n_trunc)?,
        };
        match &self.model {
            ModelSpec::Diagonal { alpha, t_exp, r_exp } => {
                build_diagonal(&spectrum, *alpha, *t_exp, *r_exp, self.tau, self.n)
            }
            ModelSpec::Perturbed {
                alpha,
                ell,
                beta,
                q,
                r,
            } => assemble_perturbed(&spectrum, *alpha, *ell, *beta, q, r, self.tau, self.n),
            ModelSpec::Custom => Err(LabError::WrongKind {
                expected: "builder-generated",
            }),
        }
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    pub fn a_inv(&self) -> &OperatorRep<T> {
        &self.ops.a_inv
    }

    /// Unscaled prior covariance (the prior is `N(0, tau^2 C0)`).
    pub fn c0(&self) -> &OperatorRep<T> {
        &self.ops.c0
    }

    pub fn c1(&self) -> &OperatorRep<T> {
        &self.ops.c1
    }

    pub fn c1_factor(&self) -> &SpdFactor<T> {
        &self.ops.c1_factor
    }

    /// `A^{-1} C1^{-1} A^{-1}`, the `lambda`-independent part of the precision.
    pub fn data_precision(&self) -> &OperatorRep<T> {
        &self.ops.data_precision
    }

    pub fn c1_sqrt(&self) -> Result<&OperatorRep<T>> {
        cached_power(&self.ops.c1_sqrt, &self.ops.c1, cast(0.5))
    }

    pub fn c1_inv_sqrt(&self) -> Result<&OperatorRep<T>> {
        cached_power(&self.ops.c1_inv_sqrt, &self.ops.c1, cast(-0.5))
    }

    /// Prior standard deviations `lambda_k` (without `tau`).
    pub fn prior_std(&self) -> DVector<T> {
        self.ops
            .c0
            .diagonal_values()
            .expect("prior covariance is diagonal")
            .map(|v| v.sqrt())
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn n(&self) -> T {
        self.n
    }

    /// `1 / (n tau^2)`.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn params(&self) -> &ScaleParams<T> {
        &self.params
    }

    pub fn model(&self) -> &ModelSpec<T> {
        &self.model
    }

    pub fn is_diagonal(&self) -> bool {
        self.ops.a_inv.is_diagonal() && self.ops.c1.is_diagonal()
    }
}

fn cached_power<'a, T: Scalar>(
    cell: &'a OnceLock<OperatorRep<T>>,
    op: &OperatorRep<T>,
    p: T,
) -> Result<&'a OperatorRep<T>> {
    if let Some(v) = cell.get() {
        return Ok(v);
    }
    let value = op.fractional_power(p)?;
    Ok(cell.get_or_init(|| value))
}

fn check_scaling<T: Scalar>(tau: T, n: T) -> Result<(T, T, T)> {
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(invalid("tau", "must be finite and positive"));
    }
    if !(n > T::zero()) || !n.is_finite() {
        return Err(invalid("n", "must be finite and positive"));
    }
    let lambda = T::one() / (n * tau * tau);
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(LabError::Overflow { what: "lambda = 1/(n tau^2)" });
    }
    Ok((tau, n, lambda))
}

/// Simultaneously diagonal model over the eigenvalues `rho_k^2` of `spectrum`:
/// `A^{-1} = (rho^2)^{-t}`, `C1 = (rho^2)^{-r}`, `C0 = (rho^2)^{-alpha}`.
///
/// With [`Spectrum::algebraic`] these are `k^{-2t}`, `k^{-2r}`, `k^{-2 alpha}`.
pub fn build_diagonal<T: Scalar>(
    spectrum: &Spectrum<T>,
    alpha: T,
    t_exp: T,
    r_exp: T,
    tau: T,
    n: T,
) -> Result<ProblemSetup<T>> {
    if !(alpha > cast(0.5)) {
        return Err(invalid("alpha", "must exceed 1/2 so that C0 is trace class"));
    }
    if !(t_exp >= T::zero()) {
        return Err(invalid("t_exp", "must be nonnegative"));
    }
    if !(r_exp >= T::zero()) {
        return Err(invalid("r_exp", "must be nonnegative"));
    }
    let s0 = T::one() / (alpha + alpha);
    let params = ScaleParams::new(s0, r_exp / alpha, t_exp / alpha)?;
    ProblemSetup::assemble(
        spectrum.clone(),
        spectrum.base_power(-t_exp),
        spectrum.base_power(-alpha),
        spectrum.base_power(-r_exp),
        tau,
        n,
        params,
        ModelSpec::Diagonal {
            alpha,
            t_exp,
            r_exp,
        },
    )
}

/// Laplacian with a potential in the forward map and white noise:
/// `A = A0 + M_q`, `C1 = I`, `C0 = A0^{-2}` (`ell = 1/2`, `beta = 0`).
pub fn build_perturbed_laplacian<T: Scalar>(
    n_trunc: usize,
    q: &MultiplierSpec<T>,
    tau: T,
    n: T,
) -> Result<ProblemSetup<T>> {
    require_smoothness("q", q, 2)?;
    let spectrum = dirichlet_spectrum(n_trunc)?;
    assemble_perturbed(
        &spectrum,
        cast(2.0),
        cast(0.5),
        T::zero(),
        q,
        &MultiplierSpec::zero(),
        tau,
        n,
    )
}

/// As [`build_perturbed_laplacian`] with colored noise `C1 = (A0^{1/4} + M_r)^{-2}`
/// (`beta = 1/4`).
pub fn build_perturbed_laplacian_colored_noise<T: Scalar>(
    n_trunc: usize,
    q: &MultiplierSpec<T>,
    r: &MultiplierSpec<T>,
    tau: T,
    n: T,
) -> Result<ProblemSetup<T>> {
    require_smoothness("q", q, 2)?;
    require_smoothness("r", r, 4)?;
    let spectrum = dirichlet_spectrum(n_trunc)?;
    assemble_perturbed(&spectrum, cast(2.0), cast(0.5), cast(0.25), q, r, tau, n)
}

/// `A = A0^{ell alpha} + M_q`, `C1 = (A0^{beta alpha / 2} + M_r)^{-2}`, `C0 = A0^{-alpha}`.
#[allow(clippy::too_many_arguments)]
pub fn build_general<T: Scalar>(
    n_trunc: usize,
    alpha: T,
    ell: T,
    beta: T,
    q: &MultiplierSpec<T>,
    r: &MultiplierSpec<T>,
    tau: T,
    n: T,
) -> Result<ProblemSetup<T>> {
    if !(ell > T::zero()) {
        return Err(invalid("ell", "must be positive"));
    }
    if !(beta > T::zero()) {
        return Err(invalid("beta", "must be positive"));
    }
    let spectrum = dirichlet_spectrum(n_trunc)?;
    assemble_perturbed(&spectrum, alpha, ell, beta, q, r, tau, n)
}

#[allow(clippy::too_many_arguments)]
fn assemble_perturbed<T: Scalar>(
    spectrum: &Spectrum<T>,
    alpha: T,
    ell: T,
    beta: T,
    q: &MultiplierSpec<T>,
    r: &MultiplierSpec<T>,
    tau: T,
    n: T,
) -> Result<ProblemSetup<T>> {
    if !(alpha > cast(0.5)) {
        return Err(invalid("alpha", "must exceed 1/2 so that C0 is trace class"));
    }
    if !(ell >= T::zero()) || !(beta >= T::zero()) {
        return Err(invalid("ell/beta", "must be nonnegative"));
    }
    let half = cast::<T>(0.5);
    let s0 = half / alpha;
    let params = ScaleParams::new(s0, beta, ell)?;

    let forward_power = ell * alpha;
    let a_inv = if q.is_zero() {
        spectrum.base_power(-forward_power)
    } else {
        let a = spectrum
            .base_power(forward_power)
            .add(&multiplication_gram(q, spectrum)?)?;
        let a = OperatorRep::dense_spd(a.to_dense())?;
        a.inverse()?
    };

    let noise_power = beta * alpha * half;
    let c1 = if r.is_zero() {
        spectrum.base_power(-(noise_power + noise_power))
    } else {
        let s = spectrum
            .base_power(noise_power)
            .add(&multiplication_gram(r, spectrum)?)?;
        let s_inv = OperatorRep::dense_spd(s.to_dense())?.inverse()?;
        let m = s_inv.to_dense();
        OperatorRep::dense_spd(&m * &m)?
    };

    debug!(
        "assembled perturbed model N = {}, dense A^-1: {}, dense C1: {}",
        spectrum.len(),
        !a_inv.is_diagonal(),
        !c1.is_diagonal()
    );
    ProblemSetup::assemble(
        spectrum.clone(),
        a_inv,
        spectrum.base_power(-alpha),
        c1,
        tau,
        n,
        params,
        ModelSpec::Perturbed {
            alpha,
            ell,
            beta,
            q: q.clone(),
            r: r.clone(),
        },
    )
}

fn require_smoothness<T: Scalar>(name: &'static str, w: &MultiplierSpec<T>, order: u32) -> Result<()> {
    if w.smoothness_order() < order {
        return Err(invalid(
            name,
            format!(
                "multiplier smoothness order {} is below the required {}",
                w.smoothness_order(),
                order
            ),
        ));
    }
    Ok(())
}

/// Spectral norm of `A0^t M_w A0^{-t}` in the sine basis.
pub fn conjugated_multiplier_norm<T: Scalar>(
    w: &MultiplierSpec<T>,
    spectrum: &Spectrum<T>,
    t: T,
) -> Result<T> {
    let gram = multiplication_gram(w, spectrum)?.to_dense();
    let left = spectrum.base_power(t);
    let right = spectrum.base_power(-t);
    let conj = right.apply_matrix_right(&left.apply_matrix(&gram));
    Ok(conj.singular_values().max())
}
