//! From a reduced frame state back to parameters.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::qcore::{CVec, PureState, C64};
use crate::tol::TOL;

use super::frame::PostselectionFrame;

/// Rotates the global phase so that `c₀` is real and non-negative.
pub fn phase_fixed(c: &CVec) -> CVec {
    let c0 = c[0];
    let n = c0.norm();
    if n == 0.0 {
        return c.clone();
    }
    c * (c0.conj() / n)
}

/// First-order amplitude inversion `θ*_j = -(norm_factor/τ)·Im(c_j/c₀)`.
pub fn invert_theta(reduced: &PureState, tau: f64, frame: &PostselectionFrame) -> Result<Vec<f64>> {
    if reduced.dim() != frame.len() {
        return invalid(format!(
            "reduced state has dimension {}, frame has {} vectors",
            reduced.dim(),
            frame.len()
        ));
    }
    if !(tau > 0.0) {
        return invalid(format!("inversion needs tau > 0, got {tau}"));
    }
    invert_amplitudes(reduced.amplitudes(), tau, frame.norm_factor())
}

pub(crate) fn invert_amplitudes(c: &CVec, tau: f64, norm_factor: f64) -> Result<Vec<f64>> {
    let c = phase_fixed(c);
    let c0 = c[0].re;
    if c0 < TOL.min_reference_amplitude {
        return Err(Error::InversionUnstable(c0));
    }
    Ok(c.iter()
        .skip(1)
        .map(|cj| -(norm_factor / tau) * (cj / c0).im)
        .collect())
}

fn residual(model: &CVec, target: &CVec) -> DVector<f64> {
    let diff = phase_fixed(model) - target;
    DVector::from_iterator(
        2 * diff.len(),
        diff.iter().flat_map(|z| [z.re, z.im]),
    )
}

/// Gauss–Newton refinement of `theta0` so that the exact reduced state
/// `family(θ)` matches `target` (both compared with `c₀` phase-fixed).
///
/// `step` is the finite-difference step in parameter units. A step is kept
/// only when it lowers the residual, so the result is never worse than the
/// starting point.
pub fn refine_theta<F>(
    theta0: &[f64],
    target: &PureState,
    family: F,
    step: f64,
    iterations: usize,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<CVec>,
{
    let target = phase_fixed(target.amplitudes());
    let m = theta0.len();
    let mut theta = theta0.to_vec();
    let mut f = residual(&family(&theta)?, &target);
    for _ in 0..iterations {
        let mut jac = DMatrix::<f64>::zeros(f.len(), m);
        for k in 0..m {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[k] += step;
            minus[k] -= step;
            let col = (residual(&family(&plus)?, &target) - residual(&family(&minus)?, &target))
                / (2.0 * step);
            jac.set_column(k, &col);
        }
        let jt = jac.transpose();
        let Some(delta) = (&jt * &jac).cholesky().map(|ch| ch.solve(&(-&jt * &f))) else {
            break;
        };
        let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
        let f_trial = residual(&family(&trial)?, &target);
        if f_trial.norm() >= f.norm() {
            break;
        }
        theta = trial;
        f = f_trial;
    }
    Ok(theta)
}

/// First-order reduced state `(1, -iτθ_j/norm_factor)` normalized.
pub fn first_order_reduced(theta: &[f64], tau: f64, norm_factor: f64) -> CVec {
    let mut c = CVec::zeros(theta.len() + 1);
    c[0] = C64::new(1.0, 0.0);
    for (j, t) in theta.iter().enumerate() {
        c[j + 1] = C64::new(0.0, -tau * t / norm_factor);
    }
    let n = c.norm();
    c.unscale(n)
}
