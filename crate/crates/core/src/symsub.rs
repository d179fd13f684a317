//! Symmetric subspace of `r` copies of `C^d`: occupation basis, collective
//! operators `{A}_r`, their trace moments, and the Magnus generator of a
//! counter-rotated evolution.
//!
//! Collective operators are assembled directly in the occupation basis as
//! `Σ_ab A_ab a†_a a_b`, which works for any `r`. When `d^r` is small enough the
//! space also carries the explicit isometry into `(C^d)^{⊗r}`, used as an
//! independent route for the same operators.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::qcore::{
    apply_local, hermitian_expm, trace, unitary_principal_log, CMat, CVec, HermitianMatrix,
    UnitaryMatrix, C64,
};

/// Largest tensor space (`d^r` amplitudes) for which the isometry is built.
pub const TENSOR_BUDGET: usize = 4096;
/// Largest symmetric-subspace dimension handled by the occupation route.
pub const SYM_BUDGET: usize = 4096;

#[derive(Debug, Clone)]
pub struct SymSpace {
    d: usize,
    r: usize,
    occupations: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    isometry: Option<CMat>,
}

/// `binom(r + d - 1, d - 1)`, the dimension of the symmetric subspace.
pub fn sym_dim(d: usize, r: usize) -> usize {
    let (n, k) = (r + d - 1, (d - 1).min(r));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Symmetric subspace with its explicit isometry. Fails with a resource error
/// when `d^r` exceeds [`TENSOR_BUDGET`].
pub fn sym_space(d: usize, r: usize) -> Result<SymSpace> {
    SymSpace::with_isometry(d, r)
}

impl SymSpace {
    /// Occupation basis only; no tensor-space isometry.
    pub fn occupation(d: usize, r: usize) -> Result<Self> {
        if d < 2 || r < 1 {
            return invalid(format!("symmetric subspace needs d >= 2 and r >= 1, got d={d}, r={r}"));
        }
        let dim = sym_dim(d, r);
        if dim > SYM_BUDGET {
            return Err(Error::Resource(format!(
                "symmetric subspace dimension {dim} for d={d}, r={r} exceeds {SYM_BUDGET}"
            )));
        }
        let mut occupations = Vec::with_capacity(dim);
        let mut current = vec![0; d];
        fill_occupations(r, 0, &mut current, &mut occupations);
        debug_assert_eq!(occupations.len(), dim);
        let index = occupations
            .iter()
            .enumerate()
            .map(|(k, n)| (n.clone(), k))
            .collect();
        Ok(Self {
            d,
            r,
            occupations,
            index,
            isometry: None,
        })
    }

    pub fn with_isometry(d: usize, r: usize) -> Result<Self> {
        let tensor = (d as f64).powi(r as i32);
        if tensor > TENSOR_BUDGET as f64 {
            return Err(Error::Resource(format!(
                "tensor space d^r = {d}^{r} exceeds the budget of {TENSOR_BUDGET} amplitudes"
            )));
        }
        let mut space = Self::occupation(d, r)?;
        let n = d.pow(r as u32);
        let dim = space.dim();
        let mut v = CMat::zeros(n, dim);
        let mut digits = vec![0usize; r];
        for idx in 0..n {
            let mut rest = idx;
            for slot in (0..r).rev() {
                digits[slot] = rest % d;
                rest /= d;
            }
            let mut occ = vec![0usize; d];
            for &s in &digits {
                occ[s] += 1;
            }
            let col = space.index[&occ];
            v[(idx, col)] = C64::new(1.0, 0.0);
        }
        for (col, occ) in space.occupations.iter().enumerate() {
            let count = multinomial(r, occ);
            let a = 1.0 / count.sqrt();
            v.column_mut(col).iter_mut().for_each(|z| *z *= a);
        }
        space.isometry = Some(v);
        Ok(space)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Dimension `D` of the symmetric subspace.
    pub fn dim(&self) -> usize {
        self.occupations.len()
    }

    /// Occupation numbers of each basis state, ordered from `(r, 0, …)` down.
    pub fn occupations(&self) -> &[Vec<usize>] {
        &self.occupations
    }

    pub fn isometry(&self) -> Option<&CMat> {
        self.isometry.as_ref()
    }

    /// `F₂ = r(d + r) / (d(d + 1))`.
    pub fn f2(&self) -> f64 {
        let (d, r) = (self.d as f64, self.r as f64);
        r * (d + r) / (d * (d + 1.0))
    }

    /// `F₄ = r(r+d)(6r² + 6dr + d² - d) / (d(d+1)(d+2)(d+3))`.
    pub fn f4(&self) -> f64 {
        let (d, r) = (self.d as f64, self.r as f64);
        r * (r + d) * (6.0 * r * r + 6.0 * d * r + d * d - d)
            / (d * (d + 1.0) * (d + 2.0) * (d + 3.0))
    }

    /// `F₂₂ = 3r(r+d)(r-1)(d+r+1) / (d(d+1)(d+2)(d+3))`.
    pub fn f22(&self) -> f64 {
        let (d, r) = (self.d as f64, self.r as f64);
        3.0 * r * (r + d) * (r - 1.0) * (d + r + 1.0) / (d * (d + 1.0) * (d + 2.0) * (d + 3.0))
    }

    fn check_dim(&self, a: &HermitianMatrix) -> Result<()> {
        if a.dim() != self.d {
            return invalid(format!(
                "operator has dimension {}, symmetric space is built on C^{}",
                a.dim(),
                self.d
            ));
        }
        Ok(())
    }
}

fn fill_occupations(left: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let d = current.len();
    if pos == d - 1 {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for n in (0..=left).rev() {
        current[pos] = n;
        fill_occupations(left - n, pos + 1, current, out);
    }
    current[pos] = 0;
}

fn multinomial(r: usize, occ: &[usize]) -> f64 {
    let lf = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    (lf(r) - occ.iter().map(|&n| lf(n)).sum::<f64>()).exp().round()
}

/// Collective operator `{A}_r`, the restriction of `Σ_j A^{(j)}` to the
/// symmetric subspace, in the occupation basis.
pub fn collective(space: &SymSpace, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    space.check_dim(a)?;
    let dim = space.dim();
    let am = a.matrix();
    let mut out = CMat::zeros(dim, dim);
    let mut target = vec![0usize; space.d];
    for (col, occ) in space.occupations.iter().enumerate() {
        for b in 0..space.d {
            if occ[b] == 0 {
                continue;
            }
            for i in 0..space.d {
                let coef = am[(i, b)];
                if coef == C64::new(0.0, 0.0) {
                    continue;
                }
                if i == b {
                    out[(col, col)] += coef * occ[b] as f64;
                } else {
                    target.copy_from_slice(occ);
                    target[b] -= 1;
                    target[i] += 1;
                    let row = space.index[&target];
                    let amp = ((occ[b] * (occ[i] + 1)) as f64).sqrt();
                    out[(row, col)] += coef * amp;
                }
            }
        }
    }
    Ok(HermitianMatrix::from_hermitian_part(&out))
}

/// `V†(Σ_j A^{(j)})V` through the explicit isometry.
pub fn collective_via_isometry(space: &SymSpace, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    space.check_dim(a)?;
    let v = space.isometry.as_ref().ok_or_else(|| {
        Error::Resource("symmetric space was built without its tensor isometry".into())
    })?;
    let factors = vec![space.d; space.r];
    let mut summed = CMat::zeros(v.nrows(), v.ncols());
    for (k, col) in v.column_iter().enumerate() {
        let col: CVec = col.into_owned();
        let mut acc = CVec::zeros(col.len());
        for slot in 0..space.r {
            acc += apply_local(&col, &factors, slot, a.matrix());
        }
        summed.set_column(k, &acc);
    }
    Ok(HermitianMatrix::from_hermitian_part(&(v.adjoint() * summed)))
}

/// `U^{⊗r}` restricted to the symmetric subspace, via the isometry.
pub fn restricted_tensor_power(space: &SymSpace, u: &UnitaryMatrix) -> Result<CMat> {
    let v = space.isometry.as_ref().ok_or_else(|| {
        Error::Resource("symmetric space was built without its tensor isometry".into())
    })?;
    let factors = vec![space.d; space.r];
    let mut moved = CMat::zeros(v.nrows(), v.ncols());
    for (k, col) in v.column_iter().enumerate() {
        let mut acc: CVec = col.into_owned();
        for slot in 0..space.r {
            acc = apply_local(&acc, &factors, slot, u.matrix());
        }
        moved.set_column(k, &acc);
    }
    Ok(v.adjoint() * moved)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceMoments {
    pub m2_actual: f64,
    pub m2_predicted: f64,
    pub m4_actual: f64,
    pub m4_predicted: f64,
    pub f2: f64,
    pub f4: f64,
    pub f22: f64,
}

/// Normalized second and fourth trace moments of `{X}_r` against their closed
/// forms `F₂ Tr X²` and `F₄ Tr X⁴ + F₂₂ (Tr X²)²`.
pub fn collective_trace_moments(space: &SymSpace, x: &HermitianMatrix) -> Result<TraceMoments> {
    if !x.is_traceless(1e-10 * x.hs_norm().max(1.0)) {
        return invalid(format!("trace moments need a traceless operator, trace = {:.3e}", x.trace()));
    }
    let cx = collective(space, x)?;
    Ok(moments_from(space, x, cx.matrix()))
}

/// As [`collective_trace_moments`], with `{X}_r` built by restricting the full
/// tensor-space sum through the isometry. Needs a space built by
/// [`sym_space`].
pub fn brute_force_trace_moments(space: &SymSpace, x: &HermitianMatrix) -> Result<TraceMoments> {
    if !x.is_traceless(1e-10 * x.hs_norm().max(1.0)) {
        return invalid(format!("trace moments need a traceless operator, trace = {:.3e}", x.trace()));
    }
    let cx = collective_via_isometry(space, x)?;
    Ok(moments_from(space, x, cx.matrix()))
}

pub(crate) fn moments_from(space: &SymSpace, x: &HermitianMatrix, cx: &CMat) -> TraceMoments {
    let dim = space.dim() as f64;
    let c2 = cx * cx;
    let m2_actual = trace(&c2).re / dim;
    let m4_actual = trace(&(&c2 * &c2)).re / dim;
    let x2 = x.matrix() * x.matrix();
    let tr2 = trace(&x2).re;
    let tr4 = trace(&(&x2 * &x2)).re;
    let (f2, f4, f22) = (space.f2(), space.f4(), space.f22());
    TraceMoments {
        m2_actual,
        m2_predicted: f2 * tr2,
        m4_actual,
        m4_predicted: f4 * tr4 + f22 * tr2 * tr2,
        f2,
        f4,
        f22,
    }
}

/// Generator `M` with `e^{-iτM} = e^{iτH*} e^{-iτH_θ}`, from the principal
/// logarithm.
pub fn magnus_operator(
    h_star: &HermitianMatrix,
    h_theta: &HermitianMatrix,
    tau: f64,
) -> Result<HermitianMatrix> {
    if h_star.dim() != h_theta.dim() {
        return invalid("Magnus operator needs Hamiltonians of equal dimension");
    }
    if !(tau > 0.0) {
        return invalid(format!("Magnus operator needs tau > 0, got {tau}"));
    }
    let reach = tau * (h_star.op_norm() + h_theta.op_norm());
    if reach >= std::f64::consts::PI {
        return invalid(format!(
            "tau(|H*| + |H|) = {reach:.4} leaves the principal branch (must be < pi)"
        ));
    }
    let u = &hermitian_expm(h_star, -tau) * &hermitian_expm(h_theta, tau);
    let log = unitary_principal_log(&u)?;
    Ok(log.scale(1.0 / tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{max_abs, su_basis};
    use crate::random::{random_hermitian, random_traceless, trial_rng};
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions_match_binomials() {
        assert_eq!(sym_space(2, 2).unwrap().dim(), 3);
        assert_eq!(sym_space(3, 2).unwrap().dim(), 6);
        assert_eq!(sym_dim(2, 64), 65);
        assert_eq!(sym_dim(3, 4), 15);
        let s = sym_space(2, 4).unwrap();
        assert_eq!(s.dim(), 5);
        let v = s.isometry().unwrap();
        let gram = v.adjoint() * v;
        assert!(max_abs(&(gram - CMat::identity(5, 5))) < 1e-12);
    }

    #[test]
    fn tensor_budget_is_enforced() {
        assert!(matches!(sym_space(2, 13), Err(Error::Resource(_))));
        assert!(sym_space(2, 12).is_ok());
        assert!(SymSpace::occupation(2, 64).is_ok());
        assert!(matches!(SymSpace::occupation(3, 200), Err(Error::Resource(_))));
    }

    #[test]
    fn collective_identity_is_r_times_identity() {
        let s = SymSpace::occupation(3, 3).unwrap();
        let c = collective(&s, &HermitianMatrix::identity(3)).unwrap();
        assert!(max_abs(&(c.matrix() - CMat::identity(10, 10).scale(3.0))) < 1e-14);
    }

    #[test]
    fn collective_pauli_z_on_two_qubits() {
        let s = sym_space(2, 2).unwrap();
        assert_eq!(s.occupations(), &[vec![2, 0], vec![1, 1], vec![0, 2]]);
        let z = &su_basis(2).unwrap()[2];
        let c = collective(&s, z).unwrap();
        let r2 = 2f64.sqrt();
        let want = HermitianMatrix::from_real_diagonal(&[r2, 0.0, -r2]);
        assert!(max_abs(&(c.matrix() - want.matrix())) < 1e-14);
    }

    #[test]
    fn ladder_route_matches_isometry_route() {
        let mut rng = trial_rng(31, 0);
        for d in 2..=3 {
            for r in 1..=4 {
                let s = sym_space(d, r).unwrap();
                let a = random_hermitian(&mut rng, d);
                let lhs = collective(&s, &a).unwrap();
                let rhs = collective_via_isometry(&s, &a).unwrap();
                assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-12, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn collective_is_linear() {
        let mut rng = trial_rng(37, 0);
        let s = SymSpace::occupation(3, 5).unwrap();
        let a = random_hermitian(&mut rng, 3);
        let b = random_hermitian(&mut rng, 3);
        let lhs = collective(&s, &(&a + &b)).unwrap();
        let rhs = &collective(&s, &a).unwrap() + &collective(&s, &b).unwrap();
        assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-12);
        assert!(collective(&s, &HermitianMatrix::identity(2)).is_err());
    }

    #[test]
    fn worked_trace_moments() {
        let s = sym_space(2, 2).unwrap();
        let z = &su_basis(2).unwrap()[2];
        let t = collective_trace_moments(&s, z).unwrap();
        assert_abs_diff_eq!(t.m2_actual, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.m2_predicted, 4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.f4, 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.f22, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.m4_actual, 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.m4_predicted, 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn single_channel_moments_reduce() {
        let s = sym_space(3, 1).unwrap();
        // With r = 1 the normalization 1/D is 1/d, so F2 = F4 = 1/d.
        assert_abs_diff_eq!(s.f2(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.f4(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(s.f22(), 0.0);
        let mut rng = trial_rng(41, 0);
        let x = random_traceless(&mut rng, 3);
        let t = collective_trace_moments(&s, &x).unwrap();
        assert_abs_diff_eq!(t.m2_actual, t.m2_predicted, epsilon = 1e-10);
        assert_abs_diff_eq!(t.m4_actual, t.m4_predicted, epsilon = 1e-10);
        assert!(collective_trace_moments(&s, &HermitianMatrix::identity(3)).is_err());
    }

    #[test]
    fn magnus_examples() {
        let mut rng = trial_rng(43, 0);
        let h = random_hermitian(&mut rng, 2).scale(0.3);
        let m = magnus_operator(&h, &h, 0.5).unwrap();
        assert!(max_abs(m.matrix()) < 1e-12);
        let a = HermitianMatrix::from_real_diagonal(&[0.4, -0.1, 0.2]);
        let b = HermitianMatrix::from_real_diagonal(&[-0.3, 0.5, 0.05]);
        let m = magnus_operator(&a, &b, 1.0).unwrap();
        assert!(max_abs(&(m.matrix() - (&b - &a).matrix())) < 1e-12);
        let big = HermitianMatrix::from_real_diagonal(&[3.0, -3.0]);
        assert!(magnus_operator(&big, &big, 1.0).is_err());
    }

    #[test]
    fn restriction_identity() {
        let mut rng = trial_rng(53, 0);
        for d in 2..=3 {
            for r in 1..=4 {
                let s = sym_space(d, r).unwrap();
                let h = random_hermitian(&mut rng, d);
                let tau = 0.8;
                let lhs = hermitian_expm(&collective(&s, &h).unwrap(), tau);
                let rhs = restricted_tensor_power(&s, &hermitian_expm(&h, tau)).unwrap();
                assert!(max_abs(&(lhs.matrix() - rhs)) < 1e-9, "d={d} r={r}");
            }
        }
    }

    #[test]
    fn magnus_distance_sweep() {
        // Brute-force calibration of |M - (H - H*)|_HS <= 2 tau |H*|_HS |H - H*|_HS.
        let mut rng = trial_rng(59, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let tau = 0.2;
            let hs = random_hermitian(&mut rng, 2);
            let ht = random_hermitian(&mut rng, 2);
            let hs = hs.scale(1.0 / hs.op_norm().max(1e-12) * rand::Rng::random::<f64>(&mut rng));
            let ht = ht.scale(1.0 / ht.op_norm().max(1e-12) * rand::Rng::random::<f64>(&mut rng));
            let m = magnus_operator(&hs, &ht, tau).unwrap();
            let diff = &ht - &hs;
            let dist = (&m - &diff).hs_norm();
            let scale = 2.0 * tau * hs.hs_norm() * diff.hs_norm();
            if scale > 0.0 {
                worst = worst.max(dist / scale);
            }
        }
        assert!(worst <= 1.0, "worst ratio {worst}");
    }

    #[test]
    fn magnus_reproduces_product() {
        let mut rng = trial_rng(47, 0);
        for _ in 0..50 {
            let hs = random_hermitian(&mut rng, 3).scale(0.4);
            let ht = random_hermitian(&mut rng, 3).scale(0.4);
            let tau = 0.7;
            let m = magnus_operator(&hs, &ht, tau).unwrap();
            let lhs = hermitian_expm(&m, tau);
            let rhs = &hermitian_expm(&hs, -tau) * &hermitian_expm(&ht, tau);
            assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-9);
        }
    }
}
