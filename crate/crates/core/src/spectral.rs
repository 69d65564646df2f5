//! Hilbert-scale vectors and operator representations.
//!
//! Every vector and operator lives in the coordinates of the prior covariance
//! eigenbasis `phi_k`, truncated at level `N`. The Hilbert scale norm of order
//! `t` is `||u||_t = ||C0^{-t/2} u||`, which for a diagonal `C0 = diag(lambda_k^2)`
//! is `(sum_k lambda_k^{-2t} u_k^2)^{1/2}`.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, LabError, Result};
use crate::scalar::{cast, to_f64, Scalar};

/// Relative asymmetry above which assembly round-off is reported.
const ASYMMETRY_WARN: f64 = 1e-10;

/// Which orthonormal basis the coordinates refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// `sqrt(2) sin(k pi x)` on the unit interval; `rho_k^2 = (k pi)^2`.
    DirichletSine,
    /// Abstract basis with `rho_k^2 = k^2`, used by purely diagonal models.
    Algebraic,
}

/// Eigenvalues `rho_k^2` of the base operator, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    rho_sq: Vec<T>,
    basis: BasisKind,
}

impl<T: Scalar> Spectrum<T> {
    pub fn new(rho_sq: Vec<T>, basis: BasisKind) -> Result<Self> {
        if rho_sq.is_empty() {
            return Err(invalid("rho_sq", "spectrum must contain at least one eigenvalue"));
        }
        if rho_sq.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(invalid("rho_sq", "eigenvalues must be finite and strictly positive"));
        }
        if rho_sq.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("rho_sq", "eigenvalues must be non-decreasing"));
        }
        Ok(Self { rho_sq, basis })
    }

    /// `rho_k^2 = k^2` for `k = 1..=n`.
    pub fn algebraic(n: usize) -> Result<Self> {
        let rho_sq = (1..=n).map(|k| cast::<T>((k * k) as f64)).collect();
        Self::new(rho_sq, BasisKind::Algebraic)
    }

    pub fn len(&self) -> usize {
        self.rho_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_sq.is_empty()
    }

    pub fn rho_sq(&self) -> &[T] {
        &self.rho_sq
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    /// Diagonal operator `A0^p` with entries `(rho_k^2)^p`.
    pub fn base_power(&self, p: T) -> OperatorRep<T> {
        let values = DVector::from_iterator(self.len(), self.rho_sq.iter().map(|r| r.powf(p)));
        OperatorRep::from_diagonal_unchecked(values)
    }
}

/// Coordinates `u_k` of a vector in the prior eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVector<T: Scalar>(DVector<T>);

impl<T: Scalar> CoefVector<T> {
    pub fn new(coefs: Vec<T>) -> Self {
        Self(DVector::from_vec(coefs))
    }

    pub fn from_vector(v: DVector<T>) -> Self {
        Self(v)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    /// The `k`-th basis vector (zero based).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[k] = T::one();
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<T> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<T> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Euclidean norm, i.e. `||u||_0`.
    pub fn norm(&self) -> T {
        self.0.norm()
    }

    pub fn dot(&self, other: &Self) -> T {
        self.0.dot(&other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn scaled(&self, c: T) -> Self {
        Self(&self.0 * c)
    }

    /// First `n` coordinates.
    pub fn truncated(&self, n: usize) -> Self {
        Self(self.0.rows(0, n.min(self.len())).into_owned())
    }
}

/// Storage of a linear operator in the prior eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind<T: Scalar> {
    Diagonal(DVector<T>),
    DenseSymmetric(DMatrix<T>),
}

/// A symmetric operator, either diagonal or dense, with a positive-definiteness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorRep<T: Scalar> {
    kind: OperatorKind<T>,
    spd: bool,
}

impl<T: Scalar> OperatorRep<T> {
    pub fn identity(n: usize) -> Self {
        Self::from_diagonal_unchecked(DVector::from_element(n, T::one()))
    }

    /// Diagonal operator; flagged SPD when every entry is positive.
    pub fn diagonal(values: DVector<T>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values", "diagonal entries must be finite"));
        }
        Ok(Self::from_diagonal_unchecked(values))
    }

    pub(crate) fn from_diagonal_unchecked(values: DVector<T>) -> Self {
        let spd = values.iter().all(|v| *v > T::zero());
        Self {
            kind: OperatorKind::Diagonal(values),
            spd,
        }
    }

    /// Dense symmetric operator. The input is replaced by `(M + M^T)/2`; an
    /// asymmetry larger than 1e-10 (relative) is logged. The SPD flag is set
    /// when a Cholesky factorization succeeds.
    pub fn dense_symmetric(matrix: DMatrix<T>) -> Result<Self> {
        let matrix = symmetrize(matrix)?;
        let spd = cholesky_lower(&matrix).is_ok();
        Ok(Self {
            kind: OperatorKind::DenseSymmetric(matrix),
            spd,
        })
    }

    /// Dense symmetric operator that must be positive definite.
    pub fn dense_spd(matrix: DMatrix<T>) -> Result<Self> {
        let matrix = symmetrize(matrix)?;
        cholesky_lower(&matrix)?;
        Ok(Self {
            kind: OperatorKind::DenseSymmetric(matrix),
            spd: true,
        })
    }

    pub fn kind(&self) -> &OperatorKind<T> {
        &self.kind
    }

    pub fn is_spd(&self) -> bool {
        self.spd
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, OperatorKind::Diagonal(_))
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            OperatorKind::Diagonal(d) => d.len(),
            OperatorKind::DenseSymmetric(m) => m.nrows(),
        }
    }

    /// Diagonal entries, if the operator is stored diagonally.
    pub fn diagonal_values(&self) -> Option<&DVector<T>> {
        match &self.kind {
            OperatorKind::Diagonal(d) => Some(d),
            OperatorKind::DenseSymmetric(_) => None,
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => DMatrix::from_diagonal(d),
            OperatorKind::DenseSymmetric(m) => m.clone(),
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, u: &CoefVector<T>) -> Result<CoefVector<T>> {
        self.check_dim(u.len())?;
        Ok(CoefVector(self.apply_vec(&u.0)))
    }

    pub(crate) fn apply_vec(&self, u: &DVector<T>) -> DVector<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => d.component_mul(u),
            OperatorKind::DenseSymmetric(m) => m * u,
        }
    }

    /// `self * rhs` for a dense right-hand side.
    pub(crate) fn apply_matrix(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => {
                let mut out = rhs.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                out
            }
            OperatorKind::DenseSymmetric(m) => m * rhs,
        }
    }

    /// `rhs * self` for a dense left-hand side.
    pub(crate) fn apply_matrix_right(&self, lhs: &DMatrix<T>) -> DMatrix<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => {
                let mut out = lhs.clone();
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                out
            }
            OperatorKind::DenseSymmetric(m) => lhs * m,
        }
    }

    /// Symmetric product `self * other * self`, kept diagonal when possible.
    pub fn sandwich(&self, other: &OperatorRep<T>) -> Result<OperatorRep<T>> {
        self.check_dim(other.dim())?;
        match (&self.kind, &other.kind) {
            (OperatorKind::Diagonal(a), OperatorKind::Diagonal(b)) => Ok(Self::from_diagonal_unchecked(
                a.component_mul(b).component_mul(a),
            )),
            _ => {
                let inner = other.apply_matrix_right(&self.to_dense());
                OperatorRep::dense_symmetric(self.apply_matrix_right(&inner))
            }
        }
    }

    /// `self + other`.
    pub fn add(&self, other: &OperatorRep<T>) -> Result<OperatorRep<T>> {
        self.check_dim(other.dim())?;
        match (&self.kind, &other.kind) {
            (OperatorKind::Diagonal(a), OperatorKind::Diagonal(b)) => {
                Ok(Self::from_diagonal_unchecked(a + b))
            }
            _ => OperatorRep::dense_symmetric(self.to_dense() + other.to_dense()),
        }
    }

    pub fn scaled(&self, c: T) -> OperatorRep<T> {
        let kind = match &self.kind {
            OperatorKind::Diagonal(d) => OperatorKind::Diagonal(d * c),
            OperatorKind::DenseSymmetric(m) => OperatorKind::DenseSymmetric(m * c),
        };
        Self {
            kind,
            spd: self.spd && c > T::zero(),
        }
    }

    /// SPD factorization for repeated solves.
    pub fn factor(&self) -> Result<SpdFactor<T>> {
        match &self.kind {
            OperatorKind::Diagonal(d) => {
                if let Some((pivot, v)) = d.iter().enumerate().find(|(_, v)| **v <= T::zero()) {
                    return Err(LabError::Indefinite {
                        pivot,
                        value: to_f64(*v),
                    });
                }
                Ok(SpdFactor::Diagonal(d.clone()))
            }
            OperatorKind::DenseSymmetric(m) => Ok(SpdFactor::Cholesky(cholesky_lower(m)?)),
        }
    }

    /// Solves `self w = r` for an SPD operator.
    pub fn solve_spd(&self, r: &CoefVector<T>) -> Result<CoefVector<T>> {
        if !self.spd {
            return Err(LabError::WrongKind {
                expected: "symmetric positive definite",
            });
        }
        self.check_dim(r.len())?;
        Ok(CoefVector(self.factor()?.solve_vec(&r.0)))
    }

    /// `self^p` for an SPD operator. Dense operators go through a full
    /// symmetric eigendecomposition `V diag(mu^p) V^T`.
    pub fn fractional_power(&self, p: T) -> Result<OperatorRep<T>> {
        if !self.spd {
            return Err(LabError::NotSpd {
                min_eigenvalue: self.min_eigenvalue().map(to_f64).unwrap_or(f64::NAN),
            });
        }
        if p == T::zero() {
            return Ok(Self::identity(self.dim()));
        }
        if p == T::one() {
            return Ok(self.clone());
        }
        match &self.kind {
            OperatorKind::Diagonal(d) => Ok(Self::from_diagonal_unchecked(d.map(|v| v.powf(p)))),
            OperatorKind::DenseSymmetric(m) => {
                let eig = SymmetricEigen::new(m.clone());
                let min = eig.eigenvalues.min();
                if !(min > T::zero()) {
                    return Err(LabError::NotSpd {
                        min_eigenvalue: to_f64(min),
                    });
                }
                let powered = eig.eigenvalues.map(|mu| mu.powf(p));
                let v = &eig.eigenvectors;
                let mut scaled = v.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= powered[j];
                }
                let out = symmetrize(&scaled * v.transpose())?;
                Ok(Self {
                    kind: OperatorKind::DenseSymmetric(out),
                    spd: true,
                })
            }
        }
    }

    /// Inverse of an SPD operator.
    pub fn inverse(&self) -> Result<OperatorRep<T>> {
        match &self.kind {
            OperatorKind::Diagonal(d) => {
                self.factor()?;
                Ok(Self::from_diagonal_unchecked(d.map(|v| T::one() / v)))
            }
            OperatorKind::DenseSymmetric(_) => {
                let inv = self.factor()?.inverse();
                Ok(Self {
                    kind: OperatorKind::DenseSymmetric(symmetrize(inv)?),
                    spd: true,
                })
            }
        }
    }

    pub fn min_eigenvalue(&self) -> Option<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => (!d.is_empty()).then(|| d.min()),
            OperatorKind::DenseSymmetric(m) => {
                (m.nrows() > 0).then(|| m.clone().symmetric_eigenvalues().min())
            }
        }
    }

    pub fn max_eigenvalue(&self) -> Option<T> {
        match &self.kind {
            OperatorKind::Diagonal(d) => (!d.is_empty()).then(|| d.max()),
            OperatorKind::DenseSymmetric(m) => {
                (m.nrows() > 0).then(|| m.clone().symmetric_eigenvalues().max())
            }
        }
    }

    pub fn trace(&self) -> T {
        match &self.kind {
            OperatorKind::Diagonal(d) => d.sum(),
            OperatorKind::DenseSymmetric(m) => m.trace(),
        }
    }

    /// Sum of squared off-diagonal entries.
    pub fn off_diagonal_mass(&self) -> T {
        match &self.kind {
            OperatorKind::Diagonal(_) => T::zero(),
            OperatorKind::DenseSymmetric(m) => {
                let total = m.norm_squared();
                let diag: T = m.diagonal().norm_squared();
                total - diag
            }
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.dim();
        if expected != found {
            return Err(LabError::DimensionMismatch { expected, found });
        }
        Ok(())
    }
}

/// Factorization of an SPD operator.
#[derive(Debug, Clone)]
pub enum SpdFactor<T: Scalar> {
    Diagonal(DVector<T>),
    /// Lower Cholesky factor `L` with `M = L L^T`.
    Cholesky(DMatrix<T>),
}

impl<T: Scalar> SpdFactor<T> {
    pub fn dim(&self) -> usize {
        match self {
            SpdFactor::Diagonal(d) => d.len(),
            SpdFactor::Cholesky(l) => l.nrows(),
        }
    }

    pub fn solve_vec(&self, r: &DVector<T>) -> DVector<T> {
        match self {
            SpdFactor::Diagonal(d) => r.component_div(d),
            SpdFactor::Cholesky(l) => {
                let mut x = r.clone();
                l.solve_lower_triangular_mut(&mut x);
                l.tr_solve_lower_triangular_mut(&mut x);
                x
            }
        }
    }

    pub fn solve(&self, r: &CoefVector<T>) -> CoefVector<T> {
        CoefVector(self.solve_vec(&r.0))
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        match self {
            SpdFactor::Diagonal(d) => {
                let mut out = rhs.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row /= d[i];
                }
                out
            }
            SpdFactor::Cholesky(l) => {
                let mut x = rhs.clone();
                l.solve_lower_triangular_mut(&mut x);
                l.tr_solve_lower_triangular_mut(&mut x);
                x
            }
        }
    }

    /// Dense inverse.
    pub fn inverse(&self) -> DMatrix<T> {
        match self {
            SpdFactor::Diagonal(d) => DMatrix::from_diagonal(&d.map(|v| T::one() / v)),
            SpdFactor::Cholesky(l) => {
                let linv = self.lower_inverse(l);
                let inv = linv.tr_mul(&linv);
                (&inv + inv.transpose()) * cast::<T>(0.5)
            }
        }
    }

    /// Trace of the inverse, `||L^{-1}||_F^2` for a Cholesky factor.
    pub fn trace_inverse(&self) -> T {
        match self {
            SpdFactor::Diagonal(d) => d.iter().fold(T::zero(), |acc, v| acc + T::one() / *v),
            SpdFactor::Cholesky(l) => self.lower_inverse(l).norm_squared(),
        }
    }

    /// Quadratic form `r^T M^{-1} r`.
    pub fn inverse_quadratic_form(&self, r: &DVector<T>) -> T {
        match self {
            SpdFactor::Diagonal(d) => r
                .iter()
                .zip(d.iter())
                .fold(T::zero(), |acc, (x, v)| acc + *x * *x / *v),
            SpdFactor::Cholesky(l) => {
                let mut x = r.clone();
                l.solve_lower_triangular_mut(&mut x);
                x.norm_squared()
            }
        }
    }

    fn lower_inverse(&self, l: &DMatrix<T>) -> DMatrix<T> {
        let n = l.nrows();
        let mut x = DMatrix::identity(n, n);
        l.solve_lower_triangular_mut(&mut x);
        x
    }
}

/// `||u||_t` in the Hilbert scale induced by a diagonal `C0 = diag(lambda_k^2)`.
pub fn scale_norm<T: Scalar>(u: &CoefVector<T>, t: T, c0: &OperatorRep<T>) -> Result<T> {
    let d = c0.diagonal_values().ok_or(LabError::WrongKind {
        expected: "diagonal prior covariance",
    })?;
    if d.len() != u.len() {
        return Err(LabError::DimensionMismatch {
            expected: d.len(),
            found: u.len(),
        });
    }
    if d.iter().any(|v| *v <= T::zero()) {
        return Err(invalid("c0", "prior covariance eigenvalues must be positive"));
    }
    if t == T::zero() {
        return Ok(u.norm());
    }
    let mut acc = T::zero();
    for (lam_sq, x) in d.iter().zip(u.as_slice()) {
        acc += lam_sq.powf(-t) * *x * *x;
    }
    if !acc.is_finite() {
        return Err(LabError::Overflow { what: "scale norm" });
    }
    Ok(acc.sqrt())
}

/// Diagonal weights `lambda_k^{-t}` so that `||u||_t = ||diag(w) u||`.
pub fn scale_weights<T: Scalar>(c0: &OperatorRep<T>, t: T) -> Result<DVector<T>> {
    let d = c0.diagonal_values().ok_or(LabError::WrongKind {
        expected: "diagonal prior covariance",
    })?;
    let half = cast::<T>(0.5);
    Ok(d.map(|v| v.powf(-t * half)))
}

/// Hilbert-scale exponents of the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams<T> {
    pub s0: T,
    pub beta: T,
    pub ell: T,
    pub delta: T,
}

impl<T: Scalar> ScaleParams<T> {
    /// `delta = 2 ell - beta + 1`.
    pub fn new(s0: T, beta: T, ell: T) -> Result<Self> {
        if !(s0 >= T::zero() && s0 < T::one()) {
            return Err(invalid("s0", "must lie in [0, 1)"));
        }
        if !(beta >= T::zero()) {
            return Err(invalid("beta", "must be nonnegative"));
        }
        if !(ell >= T::zero()) {
            return Err(invalid("ell", "must be nonnegative"));
        }
        let delta = cast::<T>(2.0) * ell - beta + T::one();
        let params = Self {
            s0,
            beta,
            ell,
            delta,
        };
        if !params.is_sufficiently_ill_posed() {
            warn!(
                "ill-posedness delta = {} does not exceed 2 s0 = {}",
                delta,
                cast::<T>(2.0) * s0
            );
        }
        Ok(params)
    }

    pub fn is_sufficiently_ill_posed(&self) -> bool {
        self.delta > cast::<T>(2.0) * self.s0
    }

    /// `beta - 2 ell`, the weakest exponent of the scale used by the theory.
    pub fn weak_exponent(&self) -> T {
        self.beta - cast::<T>(2.0) * self.ell
    }

    /// `eta = (1 - theta)(beta - 2 ell) + theta`.
    pub fn eta(&self, theta: T) -> T {
        (T::one() - theta) * self.weak_exponent() + theta
    }
}

fn symmetrize<T: Scalar>(m: DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(LabError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix", "entries must be finite"));
    }
    let scale = m.amax();
    let asym = (&m - m.transpose()).amax();
    if scale > T::zero() && to_f64(asym / scale) > ASYMMETRY_WARN {
        warn!(
            "symmetrizing operator with relative asymmetry {:e}",
            to_f64(asym / scale)
        );
    }
    Ok((&m + m.transpose()) * cast::<T>(0.5))
}

/// Lower Cholesky factor; reports the first non-positive pivot.
pub(crate) fn cholesky_lower<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = m.nrows();
    let mut l = m.lower_triangle();
    let data = l.as_mut_slice();
    for j in 0..n {
        for k in 0..j {
            let ljk = data[j + k * n];
            if ljk == T::zero() {
                continue;
            }
            for i in j..n {
                let lik = data[i + k * n];
                data[i + j * n] -= lik * ljk;
            }
        }
        let pivot = data[j + j * n];
        if !(pivot > T::zero()) || !pivot.is_finite() {
            return Err(LabError::Indefinite {
                pivot: j,
                value: to_f64(pivot),
            });
        }
        let root = pivot.sqrt();
        data[j + j * n] = root;
        for i in (j + 1)..n {
            data[i + j * n] /= root;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    #[test]
    fn sandwich_is_outer_inner_outer() {
        let a = random_spd(7, 11);
        let b = random_spd(7, 12);
        let got = OperatorRep::dense_spd(a.clone())
            .unwrap()
            .sandwich(&OperatorRep::dense_spd(b.clone()).unwrap())
            .unwrap()
            .to_dense();
        let want = &a * &b * &a;
        assert!((got - &want).amax() <= 1e-12 * want.amax());
        let d = DVector::from_fn(7, |i, _| 1.0 + i as f64);
        let got = OperatorRep::dense_spd(a.clone())
            .unwrap()
            .sandwich(&OperatorRep::diagonal(d.clone()).unwrap())
            .unwrap()
            .to_dense();
        let want = &a * DMatrix::from_diagonal(&d) * &a;
        assert!((got - &want).amax() <= 1e-12 * want.amax());
    }

    fn dirichlet_c0(n: usize) -> OperatorRep<f64> {
        let pi = std::f64::consts::PI;
        OperatorRep::diagonal(DVector::from_fn(n, |k, _| ((k + 1) as f64 * pi).powi(-4))).unwrap()
    }

    #[test]
    fn scale_norm_identity_at_zero() {
        let u = CoefVector::new(vec![1.0, 0.0, 0.0]);
        assert_eq!(scale_norm(&u, 0.0, &dirichlet_c0(3)).unwrap(), 1.0);
    }

    #[test]
    fn scale_norm_second_dirichlet_mode() {
        // ||phi_2||_1 = lambda_2^{-1} = (2 pi)^2
        let u = CoefVector::new(vec![0.0, 1.0, 0.0]);
        let v = scale_norm(&u, 1.0, &dirichlet_c0(3)).unwrap();
        assert_relative_eq!(v, 4.0 * std::f64::consts::PI.powi(2), max_relative = 1e-14);
        assert_relative_eq!(v, 39.4784176, max_relative = 1e-8);
    }

    #[test]
    fn scale_norm_negative_order() {
        let c0 = OperatorRep::diagonal(DVector::from_vec(vec![0.25, 0.0625])).unwrap();
        let u = CoefVector::new(vec![1.0, 1.0]);
        let v = scale_norm(&u, -2.0, &c0).unwrap();
        assert_relative_eq!(v, (1.0f64 / 16.0 + 1.0 / 256.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn scale_norm_overflow_reported() {
        let c0 = OperatorRep::diagonal(DVector::from_vec(vec![1e-200, 1e-300])).unwrap();
        let u = CoefVector::new(vec![1.0, 1.0]);
        assert_eq!(
            scale_norm(&u, 2.0, &c0),
            Err(LabError::Overflow { what: "scale norm" })
        );
    }

    #[test]
    fn scale_norm_rejects_dense_c0() {
        let c0 = OperatorRep::dense_spd(DMatrix::<f64>::identity(2, 2)).unwrap();
        let u = CoefVector::new(vec![1.0, 1.0]);
        assert!(matches!(scale_norm(&u, 1.0, &c0), Err(LabError::WrongKind { .. })));
    }

    #[test]
    fn apply_identity_and_diagonal() {
        let u = CoefVector::new(vec![1.5, -2.0]);
        assert_eq!(OperatorRep::identity(2).apply(&u).unwrap(), u);
        let d = OperatorRep::diagonal(DVector::from_vec(vec![2.0, 3.0])).unwrap();
        let out = d.apply(&CoefVector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let u = CoefVector::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(
            OperatorRep::<f64>::identity(2).apply(&u),
            Err(LabError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let r = CoefVector::new(vec![0.3, -0.7, 2.0]);
        assert_eq!(OperatorRep::identity(3).solve_spd(&r).unwrap(), r);
        let d = OperatorRep::diagonal(DVector::from_vec(vec![4.0, 9.0])).unwrap();
        let w = d.solve_spd(&CoefVector::new(vec![4.0, 9.0])).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn solve_random_spd_residual() {
        let m = random_spd(8, 3);
        let op = OperatorRep::dense_spd(m.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = CoefVector::new((0..8).map(|_| rng.random_range(-1.0..1.0)).collect());
        let w = op.solve_spd(&r).unwrap();
        let resid = op.apply(&w).unwrap().sub(&r).norm() / r.norm();
        assert!(resid <= 1e-10, "residual {resid}");
    }

    #[test]
    fn indefinite_reports_pivot() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match OperatorRep::dense_spd(m) {
            Err(LabError::Indefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("expected indefinite, got {other:?}"),
        }
    }

    #[test]
    fn solve_requires_spd_flag() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let op = OperatorRep::dense_symmetric(m).unwrap();
        assert!(!op.is_spd());
        assert!(op.solve_spd(&CoefVector::new(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn symmetrization_averages() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let op = OperatorRep::dense_symmetric(m).unwrap();
        let d = op.to_dense();
        assert_eq!(d[(0, 1)], 0.5);
        assert_eq!(d[(1, 0)], 0.5);
    }

    #[test]
    fn fractional_power_special_exponents() {
        let m = random_spd(6, 1);
        let op = OperatorRep::dense_spd(m.clone()).unwrap();
        let p1 = op.fractional_power(1.0).unwrap();
        assert!((p1.to_dense() - &m).amax() <= 1e-12 * m.amax());
        let p0 = op.fractional_power(0.0).unwrap();
        assert_eq!(p0, OperatorRep::identity(6));
    }

    #[test]
    fn fractional_square_root_multiplies_back() {
        let m = random_spd(10, 5);
        let root = OperatorRep::dense_spd(m.clone()).unwrap().fractional_power(0.5).unwrap().to_dense();
        let back = &root * &root;
        assert!((back - &m).norm() / m.norm() <= 1e-10);
    }

    #[test]
    fn fractional_power_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let op = OperatorRep::dense_symmetric(m).unwrap();
        assert!(matches!(op.fractional_power(0.5), Err(LabError::NotSpd { .. })));
    }

    #[test]
    fn diagonal_fractional_power_is_elementwise() {
        let d = OperatorRep::diagonal(DVector::from_vec(vec![4.0, 9.0])).unwrap();
        let r = d.fractional_power(-0.5).unwrap();
        assert_eq!(r.diagonal_values().unwrap().as_slice(), &[0.5, 1.0 / 3.0]);
    }

    #[test]
    fn trace_of_inverse_matches_dense_inverse() {
        let m = random_spd(12, 7);
        let f = OperatorRep::dense_spd(m.clone()).unwrap().factor().unwrap();
        let inv = m.clone().try_inverse().unwrap();
        assert_relative_eq!(f.trace_inverse(), inv.trace(), max_relative = 1e-12);
        assert!((f.inverse() - inv).amax() <= 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let d = OperatorRep::<f32>::diagonal(DVector::from_vec(vec![4.0, 9.0])).unwrap();
        let w = d.solve_spd(&CoefVector::new(vec![4.0f32, 9.0])).unwrap();
        assert_eq!(w.as_slice(), &[1.0f32, 1.0]);
        let c0 = OperatorRep::<f32>::diagonal(DVector::from_vec(vec![0.25, 0.0625])).unwrap();
        let v = scale_norm(&CoefVector::new(vec![1.0f32, 1.0]), -2.0, &c0).unwrap();
        assert!((v - (1.0f32 / 16.0 + 1.0 / 256.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn scale_params_delta() {
        let p = ScaleParams::new(0.5, 0.5, 0.5).unwrap();
        assert_eq!(p.delta, 1.5);
        assert!(p.is_sufficiently_ill_posed());
        assert!(ScaleParams::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![1.0, 0.5], BasisKind::Algebraic).is_err());
        assert!(Spectrum::new(vec![0.0, 0.5], BasisKind::Algebraic).is_err());
        assert!(Spectrum::<f64>::new(vec![], BasisKind::Algebraic).is_err());
        let s = Spectrum::<f64>::algebraic(3).unwrap();
        assert_eq!(s.rho_sq(), &[1.0, 4.0, 9.0]);
    }
}
