//! Dense complex linear algebra for small Hermitian and unitary matrices.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex64`. The
//! dimensions involved are tiny (a handful of levels, or a symmetric subspace of
//! at most a few thousand states), so exactness of unitarity is preferred over
//! speed: exponentials and logarithms go through a spectral decomposition.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::tol::{rel, TOL};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
#[cfg(test)]
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Largest absolute entry of a matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Hermitian part `(A + A†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// A Hermitian matrix. The stored entries are exactly Hermitian: the
/// constructor validates the input and then symmetrizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        let dev = max_abs(&(&m - m.adjoint()));
        if dev > rel(TOL.hermitian, max_abs(&m)) {
            return invalid(format!("matrix deviates from hermiticity by {dev:.3e}"));
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Wraps `(m + m†)/2` without checking how far `m` was from Hermitian.
    pub fn from_hermitian_part(m: &CMat) -> Self {
        Self(hermitian_part(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMat::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMat::identity(d, d))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(CMat::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    /// Eigenvalues (unsorted) and the unitary whose columns are the eigenvectors.
    pub fn eigh(&self) -> (DVector<f64>, CMat) {
        let eig = SymmetricEigen::new(self.0.clone());
        (eig.eigenvalues, eig.eigenvectors)
    }

    /// Operator (spectral) norm.
    pub fn op_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.eigh().0.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    /// Hilbert–Schmidt norm `sqrt(Tr A²)`.
    pub fn hs_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_traceless(&self, tol: f64) -> bool {
        self.trace().abs() <= tol
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

/// A unitary matrix, checked to `U†U = I` within [`TOL.unitary`](crate::tol::Tolerances::unitary).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMat);

impl UnitaryMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        if !m.is_square() {
            return invalid(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        let dev = unitarity_defect(&m);
        if dev > TOL.unitary {
            return invalid(format!("matrix deviates from unitarity by {dev:.3e}"));
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMat::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }
}

impl Mul for &UnitaryMatrix {
    type Output = UnitaryMatrix;
    fn mul(self, rhs: Self) -> UnitaryMatrix {
        UnitaryMatrix(&self.0 * &rhs.0)
    }
}

/// `max |U†U - I|`.
pub fn unitarity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    max_abs(&(m.adjoint() * m - CMat::identity(n, n)))
}

/// A normalized pure state on a tensor product of subsystems.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    factors: Vec<usize>,
    amps: CVec,
}

impl PureState {
    pub fn new(factors: Vec<usize>, amps: CVec) -> Result<Self> {
        let total: usize = factors.iter().product();
        if factors.is_empty() || factors.contains(&0) {
            return invalid("subsystem dimensions must be positive");
        }
        if amps.len() != total {
            return invalid(format!(
                "{} amplitudes for subsystem dimensions {:?} (product {total})",
                amps.len(),
                factors
            ));
        }
        let n = amps.norm();
        if (n * n - 1.0).abs() > TOL.norm {
            return invalid(format!("state has squared norm {:.12}", n * n));
        }
        Ok(Self { factors, amps })
    }

    /// Normalizes `amps` before wrapping it. Fails on a zero vector.
    pub fn normalized(factors: Vec<usize>, amps: CVec) -> Result<Self> {
        let n = amps.norm();
        if n == 0.0 || !n.is_finite() {
            return invalid("cannot normalize a zero vector");
        }
        Self::new(factors, amps.unscale(n))
    }

    /// Computational basis vector `index` of the given product space.
    pub fn basis(factors: Vec<usize>, index: usize) -> Result<Self> {
        let total: usize = factors.iter().product();
        if index >= total {
            return invalid(format!("basis index {index} out of range {total}"));
        }
        let mut amps = CVec::zeros(total);
        amps[index] = ONE;
        Self::new(factors, amps)
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVec {
        self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Infidelity `sqrt(1 - |⟨a|b⟩|²)`.
    pub fn infidelity(&self, other: &PureState) -> f64 {
        (1.0 - self.fidelity(other)).max(0.0).sqrt()
    }
}

/// `e^{-itH}` via the spectral decomposition of `H`.
pub fn hermitian_expm(h: &HermitianMatrix, t: f64) -> UnitaryMatrix {
    let (vals, vecs) = h.eigh();
    let phases = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&e| C64::from_polar(1.0, -t * e)),
    );
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    UnitaryMatrix(scaled * vecs.adjoint())
}

/// Principal logarithm in the convention `U = e^{-iM}`, with the spectrum of
/// `M` in `(-pi, pi]`.
///
/// Fails with [`Error::BranchCut`] when an eigenphase of `U` sits within
/// `TOL.branch_cut` of `-1`, where the branch is ambiguous.
pub fn unitary_principal_log(u: &UnitaryMatrix) -> Result<HermitianMatrix> {
    let n = u.dim();
    if n == 0 {
        return Ok(HermitianMatrix::zeros(0));
    }
    let schur = Schur::try_new(u.matrix().clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Validation("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut log_diag = DVector::<C64>::zeros(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let phase = lambda.arg();
        if PI - phase.abs() < TOL.branch_cut {
            return Err(Error::BranchCut {
                phase,
                tolerance: TOL.branch_cut,
            });
        }
        log_diag[k] = C64::new(-phase, 0.0);
    }
    let m = &q * CMat::from_diagonal(&log_diag) * q.adjoint();
    Ok(HermitianMatrix::from_hermitian_part(&m))
}

/// Hilbert–Schmidt inner product `Tr(A†B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> Result<C64> {
    if a.shape() != b.shape() || !a.is_square() {
        return invalid(format!(
            "hs_inner needs equal square matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        ));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Orthonormal traceless Hermitian basis of `su(d)`: the generalized Gell-Mann
/// matrices scaled so that `Tr X_j X_k = δ_jk`.
///
/// Order: symmetric off-diagonal pairs, antisymmetric pairs, then the diagonal
/// ladder. For `d = 2` this yields `σx/√2, σy/√2, σz/√2`.
pub fn su_basis(d: usize) -> Result<Vec<HermitianMatrix>> {
    if d < 2 {
        return invalid(format!("su(d) basis needs d >= 2, got {d}"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut sym = Vec::new();
    let mut anti = Vec::new();
    for j in 0..d {
        for k in (j + 1)..d {
            let mut a = CMat::zeros(d, d);
            a[(j, k)] = C64::new(s, 0.0);
            a[(k, j)] = C64::new(s, 0.0);
            sym.push(HermitianMatrix(a));
            let mut b = CMat::zeros(d, d);
            b[(j, k)] = C64::new(0.0, -s);
            b[(k, j)] = C64::new(0.0, s);
            anti.push(HermitianMatrix(b));
        }
    }
    let mut out = sym;
    out.extend(anti);
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..d)
            .map(|j| match j.cmp(&l) {
                std::cmp::Ordering::Less => 1.0 / norm,
                std::cmp::Ordering::Equal => -(l as f64) / norm,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    Ok(out)
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Applies `op` to subsystem `slot` of a state vector on the product space
/// with dimensions `factors` (first factor most significant).
pub fn apply_local(amps: &CVec, factors: &[usize], slot: usize, op: &CMat) -> CVec {
    let d = factors[slot];
    debug_assert_eq!(op.nrows(), d);
    let inner: usize = factors[slot + 1..].iter().product();
    let outer: usize = factors[..slot].iter().product();
    let mut out = CVec::zeros(amps.len());
    let mut buf = vec![ZERO; d];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * d * inner + i;
            for (k, b) in buf.iter_mut().enumerate() {
                *b = amps[base + k * inner];
            }
            for row in 0..d {
                let mut acc = ZERO;
                for (col, b) in buf.iter().enumerate() {
                    acc += op[(row, col)] * b;
                }
                out[base + row * inner] = acc;
            }
        }
    }
    out
}
