//! Sampled δ-resolution `I_δ = inf √(1 - |⟨q_θ|q_θ'⟩|²)` over the search ball.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::model::HamiltonianModel;
use crate::qcore::{hermitian_expm, CVec};
use crate::random::{uniform_in_ball, unit_vector};

use super::frame::{reduce_operator, PostselectionFrame};

/// Fraction of pairs placed exactly on `‖θ - θ'‖ = δ`.
const BOUNDARY_SHARE: f64 = 0.8;

fn probe(
    model: &HamiltonianModel,
    tau: f64,
    theta: &[f64],
    frame: Option<&PostselectionFrame>,
) -> Result<CVec> {
    let u = hermitian_expm(&model.hamiltonian(theta)?, tau);
    match frame {
        Some(f) => Ok(reduce_operator(f, u.matrix())?.0.into_amplitudes()),
        None => Ok(crate::probe::operator_on_mes(u.matrix())),
    }
}

fn infidelity(a: &CVec, b: &CVec) -> f64 {
    (1.0 - a.dotc(b).norm_sqr()).max(0.0).sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sampled infimum of the probe infidelity over `n_pairs` pairs with
/// `‖θ‖, ‖θ'‖ ≤ E` and `‖θ - θ'‖ ≥ δ`.
///
/// Most pairs sit on the constraint boundary (midpoint uniform in the ball of
/// radius `E - δ/2`, offset `±δu/2`); the rest are uniform interior pairs kept
/// only when they are at least `δ` apart. With a frame, both probes are
/// projected and renormalized first.
pub fn delta_resolution<R: Rng + ?Sized>(
    model: &HamiltonianModel,
    tau: f64,
    e: f64,
    delta: f64,
    n_pairs: usize,
    rng: &mut R,
    frame: Option<&PostselectionFrame>,
) -> Result<f64> {
    if !(e > 0.0) || !(tau > 0.0) {
        return invalid(format!("delta_resolution needs E > 0 and tau > 0, got E={e}, tau={tau}"));
    }
    if !(0.0..=2.0 * e).contains(&delta) {
        return invalid(format!("delta must lie in [0, 2E], got {delta} with E={e}"));
    }
    if n_pairs == 0 {
        return invalid("delta_resolution needs at least one pair");
    }
    let m = model.m();
    let boundary = ((n_pairs as f64) * BOUNDARY_SHARE).ceil() as usize;
    let mut best = f64::INFINITY;
    for k in 0..n_pairs {
        let (a, b) = if k < boundary || delta == 0.0 {
            let mid = uniform_in_ball(rng, m, e - delta / 2.0);
            let u = unit_vector(rng, m);
            let a: Vec<f64> = mid.iter().zip(&u).map(|(c, x)| c + 0.5 * delta * x).collect();
            let b: Vec<f64> = mid.iter().zip(&u).map(|(c, x)| c - 0.5 * delta * x).collect();
            (a, b)
        } else {
            let a = uniform_in_ball(rng, m, e);
            let b = uniform_in_ball(rng, m, e);
            if distance(&a, &b) < delta {
                continue;
            }
            (a, b)
        };
        let v = infidelity(&probe(model, tau, &a, frame)?, &probe(model, tau, &b, frame)?);
        best = best.min(v);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_model, ModelKind};
    use crate::random::trial_rng;

    #[test]
    fn phase_qubit_closed_form() {
        let model = make_model(ModelKind::Phase, 2, None).unwrap();
        let mut rng = trial_rng(109, 0);
        for &(tau, e, delta) in &[(0.5, 1.0, 0.1), (1.0, 0.5, 0.3), (0.2, 2.0, 0.05)] {
            let v = delta_resolution(&model, tau, e, delta, 200, &mut rng, None).unwrap();
            let want = (tau * delta / 2f64.sqrt()).sin();
            assert!((v - want).abs() < 1e-8, "{v} vs {want}");
        }
    }

    #[test]
    fn zero_delta_gives_zero() {
        let model = make_model(ModelKind::Full, 2, None).unwrap();
        let mut rng = trial_rng(113, 0);
        let v = delta_resolution(&model, 0.3, 1.0, 0.0, 20, &mut rng, None).unwrap();
        assert!(v.abs() < 1e-7);
    }

    #[test]
    fn normalized_constant_in_window() {
        let mut rng = trial_rng(127, 0);
        for d in 2..=4 {
            let model = make_model(ModelKind::Full, d, None).unwrap();
            let tau = 0.3;
            for &delta in &[0.05, 0.2, 0.5] {
                let v = delta_resolution(&model, tau, 1.0, delta, 200, &mut rng, None).unwrap();
                let ratio = v * v * d as f64 / (tau * tau * delta * delta);
                assert!((0.5..=4.0).contains(&ratio), "d={d} δ={delta}: {ratio}");
            }
        }
    }

    #[test]
    fn frame_projection_keeps_resolution_order() {
        let model = make_model(ModelKind::Full, 2, None).unwrap();
        let frame = PostselectionFrame::one_channel(&model).unwrap();
        let mut rng = trial_rng(131, 0);
        let v = delta_resolution(&model, 0.3, 1.0, 0.1, 200, &mut rng, Some(&frame)).unwrap();
        let ratio = v * v * 2.0 / (0.09 * 0.01);
        assert!((0.5..=4.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = make_model(ModelKind::Full, 2, None).unwrap();
        let mut rng = trial_rng(137, 0);
        assert!(delta_resolution(&model, 0.3, 1.0, 2.5, 10, &mut rng, None).is_err());
        assert!(delta_resolution(&model, 0.0, 1.0, 0.1, 10, &mut rng, None).is_err());
        assert!(delta_resolution(&model, 0.3, 1.0, 0.1, 0, &mut rng, None).is_err());
    }
}
