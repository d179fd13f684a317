//! Closed-form metrological bounds with explicit constants, and the biased
//! Cramér–Rao evaluator.
//!
//! Order relations are frozen into explicit constants: `Tr V ≥ md/(4Nτ²)`
//! (factor 1/4) and `T ≥ √(md)/(2δ)` (factor 1/2, from `N ≥ 1`). The upper
//! bounds substitute the staging constants of [`Constants`].

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::estimate::Constants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QcrChain {
    pub tr_v_lower: f64,
    /// Whether `Nτ² ≥ md/(4δ²)`, i.e. the accuracy `δ² ≥ Tr V` is reachable.
    pub tradeoff_ok: bool,
}

/// `Tr V ≥ md/(4Nτ²)` and the resulting copies–time trade-off.
pub fn qcr_chain(m: usize, d: usize, delta: f64, tau: f64, n: f64) -> QcrChain {
    let md = (m * d) as f64;
    QcrChain {
        tr_v_lower: md / (4.0 * n * tau * tau),
        tradeoff_ok: n * tau * tau >= md / (4.0 * delta * delta),
    }
}

/// Minimum number of copies for accuracy `δ` at interval `τ`.
pub fn copies_lower(m: usize, d: usize, delta: f64, tau: f64) -> f64 {
    (m * d) as f64 / (4.0 * delta * delta * tau * tau)
}

/// `T ≥ √(md)/(2δ)`.
pub fn time_lower_bound(m: usize, d: usize, delta: f64) -> f64 {
    ((m * d) as f64).sqrt() / (2.0 * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonsphericalBound {
    /// `m/(2√c·δ)`: the same chain with `Tr J ≤ 4cτ²` in place of `4mτ²/d`.
    pub chain_bound: f64,
    /// `√c·d/(2δ²)`, the form with `δ`-exponent 2.
    pub quadratic_bound: f64,
    /// The two forms scale differently in `δ`; always set.
    pub exponent_mismatch: bool,
}

/// Lower bound on `T` for a model with `c = ‖Σ X_j²‖`.
///
/// The parameter count is needed because, off the sphere, `c` no longer
/// determines `m/d`. For `c = m/d` the chain form reduces to
/// [`time_lower_bound`].
pub fn nonspherical_time_lower(c: f64, m: usize, d: usize, delta: f64) -> NonsphericalBound {
    NonsphericalBound {
        chain_bound: m as f64 / (2.0 * c.sqrt() * delta),
        quadratic_bound: c.sqrt() * d as f64 / (2.0 * delta * delta),
        exponent_mismatch: true,
    }
}

/// `Σ_{n≥1} (1 + βn)/2ⁿ / (1 + β) = (1 + 2β)/(1 + β)`.
fn stage_sum(beta: f64) -> f64 {
    (1.0 + 2.0 * beta) / (1.0 + beta)
}

/// Adaptive-scheme time with `τ_n = κ/(2ⁿδ)` and `4α·m·d·(1+βn)/(1+β)`
/// copies per stage, summed over all stages: `4ακ·md·(1+2β)/((1+β)δ)`.
pub fn time_upper_general(m: usize, d: usize, delta: f64, constants: &Constants) -> f64 {
    4.0 * constants.alpha * constants.kappa * (m * d) as f64 * stage_sum(constants.beta) / delta
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FewParamBound {
    /// `4ακ·m^{3/2}d^{1/2}(1+2β)/((1+β)δ)`.
    pub bound: f64,
    /// Set when the general `md/δ` form is the tighter one (`m > d`).
    pub general_preferred: bool,
}

/// Few-parameter upper bound for spherical models, where `‖H_θ‖ ≤ E√(m/d)`
/// allows `τ ∝ √d/(√m·E)`. The search radius cancels.
pub fn fewparam_time_upper(
    m: usize,
    d: usize,
    delta: f64,
    _e: f64,
    constants: &Constants,
) -> FewParamBound {
    let (mf, df) = (m as f64, d as f64);
    let bound = 4.0 * constants.alpha * constants.kappa * mf.powf(1.5) * df.sqrt()
        * stage_sum(constants.beta)
        / delta;
    FewParamBound {
        bound,
        general_preferred: bound > time_upper_general(m, d, delta, constants),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `Tr J ≤ 4cτ²` (equal to `4mτ²/d` for spherical models).
    pub qfi_upper: f64,
    pub copies_lower: f64,
    pub time_lower: f64,
    pub time_upper_general: f64,
    pub time_upper_fewparam: f64,
    pub constants_used: BoundConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub qcr_factor: f64,
    pub time_factor: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// All closed-form bounds for `m` parameters in dimension `d` with
/// `c = ‖Σ X_j²‖`.
pub fn bound_report(
    m: usize,
    d: usize,
    c: f64,
    delta: f64,
    e: f64,
    tau: f64,
    constants: &Constants,
) -> Result<BoundReport> {
    for (name, v) in [("delta", delta), ("E", e), ("tau", tau), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("{name} must be positive, got {v}"));
        }
    }
    if m == 0 || d < 2 {
        return invalid(format!("need m >= 1 and d >= 2, got m={m}, d={d}"));
    }
    Ok(BoundReport {
        qfi_upper: 4.0 * c * tau * tau,
        copies_lower: copies_lower(m, d, delta, tau),
        time_lower: time_lower_bound(m, d, delta),
        time_upper_general: time_upper_general(m, d, delta, constants),
        time_upper_fewparam: fewparam_time_upper(m, d, delta, e, constants).bound,
        constants_used: BoundConstants {
            qcr_factor: 0.25,
            time_factor: 0.5,
            kappa: constants.kappa,
            alpha: constants.alpha,
            beta: constants.beta,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasedCr {
    /// `Tr[(I+D)J⁻¹(I+D)ᵀ]/N`.
    pub matrix_bound_trace: f64,
    /// `(Tr[I+D])²/(N·Tr J)`.
    pub scalar_bound: f64,
}

/// Inverse of a symmetric PSD matrix, or the direction along which it fails.
fn psd_inverse(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = j.nrows();
    if j.ncols() != n || n == 0 {
        return invalid(format!("Fisher matrix must be square and non-empty, got {:?}", j.shape()));
    }
    let sym = (j + j.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let k = eig.eigenvalues.imin();
    let low = eig.eigenvalues[k];
    if low < -1e-10 * scale {
        return invalid(format!("Fisher matrix is not positive semidefinite (eigenvalue {low:.3e})"));
    }
    if low <= 1e-12 * scale {
        return Err(Error::SingularFisher {
            direction: eig.eigenvectors.column(k).iter().copied().collect(),
        });
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose())
}

/// Right-hand sides of the biased Cramér–Rao inequality for `N` copies with
/// per-copy QFI `J` and bias Jacobian `D_jk = ∂_j b_k`.
pub fn biased_cr_rhs(j: &DMatrix<f64>, d: &DMatrix<f64>, n: f64) -> Result<BiasedCr> {
    if d.shape() != j.shape() {
        return invalid(format!("bias Jacobian {:?} does not match J {:?}", d.shape(), j.shape()));
    }
    if !(n > 0.0) {
        return invalid(format!("copy count must be positive, got {n}"));
    }
    let inv = psd_inverse(j)?;
    let a = DMatrix::identity(j.nrows(), j.ncols()) + d;
    let matrix_bound_trace = (&a * inv * a.transpose()).trace() / n;
    let scalar_bound = a.trace().powi(2) / (n * j.trace());
    Ok(BiasedCr {
        matrix_bound_trace,
        scalar_bound,
    })
}

/// `(Tr[J⁻¹]·Tr[J], m²)`; the first never falls below the second.
pub fn schwartz_chain(j: &DMatrix<f64>) -> Result<(f64, f64)> {
    let inv = psd_inverse(j)?;
    let m = j.nrows() as f64;
    Ok((inv.trace() * j.trace(), m * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_model, ModelKind};
    use crate::probe::{qfi_matrix, Schedule};
    use crate::random::trial_rng;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn qcr_chain_values() {
        let q = qcr_chain(3, 2, 0.1, 1.0, 1.0);
        assert_relative_eq!(q.tr_v_lower, 1.5);
        let q4 = qcr_chain(3, 2, 0.1, 1.0, 4.0);
        assert_relative_eq!(q4.tr_v_lower, 1.5 / 4.0);
        // Boundary N = md/(4δ²τ²) = 150.
        assert!(!qcr_chain(3, 2, 0.1, 1.0, 149.9).tradeoff_ok);
        assert!(qcr_chain(3, 2, 0.1, 1.0, 150.0).tradeoff_ok);
    }

    #[test]
    fn time_lower_values_and_homogeneity() {
        assert_relative_eq!(time_lower_bound(3, 2, 0.1), 6f64.sqrt() / 0.2, epsilon = 1e-12);
        assert_relative_eq!(time_lower_bound(3, 2, 0.05), 2.0 * time_lower_bound(3, 2, 0.1));
        for d in 2..6 {
            let m = d * d - 1;
            let ratio = time_lower_bound(m, d, 0.1) / ((d as f64).powf(1.5) / 0.2);
            assert!((0.8..=1.0).contains(&ratio), "d={d}: {ratio}");
        }
        let c = Constants::default();
        assert_relative_eq!(
            time_upper_general(3, 2, 0.05, &c),
            2.0 * time_upper_general(3, 2, 0.1, &c)
        );
        let b1 = nonspherical_time_lower(1.0, 2, 3, 0.1);
        let b2 = nonspherical_time_lower(1.0, 2, 3, 0.05);
        assert_relative_eq!(b2.chain_bound, 2.0 * b1.chain_bound);
        assert_relative_eq!(b2.quadratic_bound, 4.0 * b1.quadratic_bound);
    }

    #[test]
    fn nonspherical_reduces_to_spherical() {
        let m = make_model(ModelKind::OffDiag, 3, None).unwrap();
        let b = nonspherical_time_lower(m.c(), m.m(), 3, 0.1);
        assert!(b.chain_bound > 0.0 && b.chain_bound.is_finite());
        assert!(b.exponent_mismatch);
        let s = nonspherical_time_lower(3.0 / 2.0, 3, 2, 0.1);
        assert_relative_eq!(s.chain_bound, time_lower_bound(3, 2, 0.1), epsilon = 1e-12);
    }

    #[test]
    fn offdiag_free_evolution_saturates() {
        let model = make_model(ModelKind::OffDiag, 3, None).unwrap();
        let tau = 0.7;
        let start = crate::qcore::PureState::basis(vec![3, 1], 2).unwrap();
        let sched =
            Schedule::new(3, 1, start, vec![crate::probe::Step::free(tau)]).unwrap();
        let rep = qfi_matrix(&model, &[0.0, 0.0], &sched).unwrap();
        assert!((rep.trace_j - 2.0 * 2.0 * tau * tau).abs() < 1e-6);
        assert!((rep.trace_j - 4.0 * model.c() * tau * tau).abs() < 1e-6);
    }

    #[test]
    fn fewparam_forms() {
        let c = Constants::default();
        let a = fewparam_time_upper(1, 4, 0.1, 1.0, &c);
        let b = fewparam_time_upper(1, 16, 0.1, 1.0, &c);
        assert_relative_eq!(b.bound / a.bound, 2.0, epsilon = 1e-12);
        assert_relative_eq!(
            a.bound / time_lower_bound(1, 4, 0.1),
            b.bound / time_lower_bound(1, 16, 0.1),
            epsilon = 1e-12
        );
        assert!(!a.general_preferred);
        assert!(fewparam_time_upper(15, 4, 0.1, 1.0, &c).general_preferred);
        assert_eq!(
            fewparam_time_upper(3, 2, 0.1, 1.0, &c),
            fewparam_time_upper(3, 2, 0.1, 7.0, &c)
        );
    }

    #[test]
    fn report_respects_ordering() {
        let c = Constants::default();
        for d in 2..5 {
            let m = d * d - 1;
            let r = bound_report(m, d, m as f64 / d as f64, 0.05, 1.0, 0.3, &c).unwrap();
            assert!(r.time_lower <= r.time_upper_general);
            assert_relative_eq!(r.qfi_upper, 4.0 * m as f64 / d as f64 * 0.09, epsilon = 1e-12);
        }
        assert!(bound_report(3, 2, 1.5, 0.0, 1.0, 0.3, &c).is_err());
    }

    #[test]
    fn biased_cr_special_cases() {
        let j = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let zero = DMatrix::zeros(2, 2);
        let r = biased_cr_rhs(&j, &zero, 10.0).unwrap();
        let inv = j.clone().try_inverse().unwrap();
        assert_relative_eq!(r.matrix_bound_trace, inv.trace() / 10.0, epsilon = 1e-14);

        let jj = DMatrix::identity(3, 3) * 2.5;
        let half = DMatrix::identity(3, 3) * -0.5;
        let r = biased_cr_rhs(&jj, &half, 4.0).unwrap();
        assert_relative_eq!(r.matrix_bound_trace, 3.0 / (4.0 * 2.5 * 4.0), epsilon = 1e-14);
    }

    #[test]
    fn singular_fisher_names_direction() {
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = biased_cr_rhs(&j, &DMatrix::zeros(2, 2), 1.0).unwrap_err();
        match err {
            Error::SingularFisher { direction } => {
                let s = 0.5f64.sqrt();
                assert!((direction[0].abs() - s).abs() < 1e-12);
                assert!((direction[0] + direction[1]).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scalar_bound_never_exceeds_matrix_bound() {
        let mut rng = trial_rng(163, 0);
        for _ in 0..200 {
            let n = rng.random_range(1..5);
            let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let j = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let d = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let r = biased_cr_rhs(&j, &d, 3.0).unwrap();
            assert!(r.scalar_bound <= r.matrix_bound_trace * (1.0 + 1e-10));
            let (lhs, m2) = schwartz_chain(&j).unwrap();
            assert!(lhs >= m2 * (1.0 - 1e-8));
        }
    }
}
