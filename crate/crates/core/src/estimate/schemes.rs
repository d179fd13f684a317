//! The one-channel, adaptive and many-channel procedures.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::HamiltonianModel;
use crate::probe::{evolve, mes, trotter_slices, trotterized_feedback};
use crate::qcore::{hermitian_expm, CMat, CVec, HermitianMatrix, PureState, UnitaryMatrix};
use crate::symsub::{collective, SymSpace};
use crate::tol::TOL;

use super::frame::{reduce, reduce_operator, PostselectionFrame};
use super::inversion::{invert_amplitudes, refine_theta};
use super::tomography::Tomographer;
use super::{Constants, EstimationRecord, Scheme, StageRecord};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_inputs(
    model: &HamiltonianModel,
    theta_true: &[f64],
    delta: f64,
    e: f64,
    constants: &Constants,
) -> Result<()> {
    constants.validate()?;
    if theta_true.len() != model.m() {
        return invalid(format!(
            "theta has length {}, model has {} parameters",
            theta_true.len(),
            model.m()
        ));
    }
    if !(delta > 0.0 && delta.is_finite()) || !(e > 0.0 && e.is_finite()) {
        return invalid(format!("need finite delta > 0 and E > 0, got delta={delta}, E={e}"));
    }
    if delta > e {
        return invalid(format!("delta = {delta} exceeds the search radius E = {e}"));
    }
    let n = norm(theta_true);
    if n > e * (1.0 + 1e-12) {
        return invalid(format!("|theta| = {n} lies outside the search radius E = {e}"));
    }
    Ok(())
}

/// Number of halving stages, `⌈log₂(E/δ)⌉`.
pub fn stage_count(e: f64, delta: f64) -> u32 {
    let x = (e / delta).log2();
    // Guard exact powers of two against rounding up.
    (x - 1e-9).ceil().max(0.0) as u32
}

/// Accepted copies for stage `n`: `⌈4α·m·d·(1 + βn)/(1 + β)⌉`.
pub fn stage_copies(model: &HamiltonianModel, constants: &Constants, n: u32) -> usize {
    let base = 4.0 * constants.alpha * (model.m() * model.dim()) as f64;
    (base * (1.0 + constants.beta * n as f64) / (1.0 + constants.beta)).ceil() as usize
}

/// Accepted copies of the non-adaptive scheme: `⌈α·m·d·E²/δ²⌉`.
pub fn one_channel_copies(model: &HamiltonianModel, constants: &Constants, delta: f64, e: f64) -> usize {
    let md = (model.m() * model.dim()) as f64;
    (constants.alpha * md * (e / delta).powi(2)).ceil() as usize
}

/// Prepares copies until `copies` pass postselection, measuring each accepted
/// one. Returns the tomographic estimate and the number prepared.
fn sample_reduced<R: Rng + ?Sized>(
    reduced: &PureState,
    p_success: f64,
    copies: usize,
    constants: &Constants,
    rng: &mut R,
) -> Result<(PureState, usize)> {
    if p_success < constants.starvation {
        return Err(Error::Starvation(p_success));
    }
    let mut tomo = Tomographer::new(reduced.dim());
    let mut prepared = 0usize;
    while tomo.count() < copies {
        prepared += 1;
        if rng.random::<f64>() < p_success {
            tomo.measure(reduced.amplitudes(), rng);
        }
    }
    Ok((tomo.estimate()?, prepared))
}

struct StageResult {
    estimate: Vec<f64>,
    prepared: usize,
    p_success: f64,
}

/// Estimate of `Δ = θ - θ*` from a reduced-state family `Δ ↦ c(Δ)`.
fn finish_stage<R, F>(
    reduced_true: (PureState, f64),
    family: F,
    tau: f64,
    frame: &PostselectionFrame,
    copies: usize,
    constants: &Constants,
    rng: &mut R,
) -> Result<(Vec<f64>, usize, f64)>
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Result<CVec>,
{
    let (reduced, p) = reduced_true;
    let (est, prepared) = sample_reduced(&reduced, p, copies, constants, rng)?;
    let mut delta = invert_amplitudes(est.amplitudes(), tau, frame.norm_factor())?;
    if constants.refine {
        delta = refine_theta(&delta, &est, family, TOL.fd_step / tau, 3)?;
    }
    Ok((delta, prepared, p))
}

/// One round of the single-channel scheme with the feedback `-H_{θ*}`.
#[allow(clippy::too_many_arguments)]
fn single_channel_stage<R: Rng + ?Sized>(
    model: &HamiltonianModel,
    frame: &PostselectionFrame,
    theta_true: &[f64],
    theta_star: &[f64],
    tau: f64,
    copies: usize,
    constants: &Constants,
    rng: &mut R,
) -> Result<StageResult> {
    let shifted = sub(theta_true, theta_star);
    let reduced_true = if constants.trotter && norm(theta_star) > 0.0 {
        let h_star = model.hamiltonian(theta_star)?;
        let a = model.hamiltonian(theta_true)?.op_norm();
        let slices = trotter_slices(tau, a, h_star.op_norm(), constants.trotter_tol);
        let schedule = trotterized_feedback(model.dim(), mes(model.dim())?, tau, &h_star, slices)?;
        let state = evolve(model, theta_true, &schedule)?;
        reduce(frame, state.amplitudes())?
    } else {
        let u = hermitian_expm(&model.hamiltonian(&shifted)?, tau);
        reduce_operator(frame, u.matrix())?
    };
    let family = |d: &[f64]| -> Result<CVec> {
        let u = hermitian_expm(&model.hamiltonian(d)?, tau);
        Ok(reduce_operator(frame, u.matrix())?.0.into_amplitudes())
    };
    let (delta, prepared, p_success) =
        finish_stage(reduced_true, family, tau, frame, copies, constants, rng)?;
    Ok(StageResult {
        estimate: add(theta_star, &delta),
        prepared,
        p_success,
    })
}

/// Collective generators `{X_j}_r` on one symmetric subspace.
struct CollectiveModel {
    frame: PostselectionFrame,
    ops: Vec<CMat>,
}

impl CollectiveModel {
    fn new(model: &HamiltonianModel, r: usize) -> Result<Self> {
        let space = SymSpace::occupation(model.dim(), r)?;
        let ops = model
            .generators()
            .iter()
            .map(|x| collective(&space, x).map(|c| c.into_matrix()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frame: PostselectionFrame::collective(model, &space)?,
            ops,
        })
    }

    fn hamiltonian(&self, theta: &[f64]) -> HermitianMatrix {
        let dim = self.frame.dim();
        let mut h = CMat::zeros(dim, dim);
        for (c, &t) in self.ops.iter().zip(theta) {
            h += c.scale(t);
        }
        HermitianMatrix::from_hermitian_part(&h)
    }

    /// `e^{iτ{H*}} e^{-iτ{H_θ}}`, with the counter-rotation supplied.
    fn probe_operator(&self, counter: &UnitaryMatrix, theta: &[f64], tau: f64) -> CMat {
        counter.matrix() * hermitian_expm(&self.hamiltonian(theta), tau).matrix()
    }
}

fn many_channel_stage<R: Rng + ?Sized>(
    coll: &CollectiveModel,
    theta_true: &[f64],
    theta_star: &[f64],
    tau: f64,
    copies: usize,
    constants: &Constants,
    rng: &mut R,
) -> Result<StageResult> {
    let counter = hermitian_expm(&coll.hamiltonian(theta_star), -tau);
    let reduced_true = reduce_operator(&coll.frame, &coll.probe_operator(&counter, theta_true, tau))?;
    let family = |d: &[f64]| -> Result<CVec> {
        let w = coll.probe_operator(&counter, &add(theta_star, d), tau);
        Ok(reduce_operator(&coll.frame, &w)?.0.into_amplitudes())
    };
    let (delta, prepared, p_success) =
        finish_stage(reduced_true, family, tau, &coll.frame, copies, constants, rng)?;
    Ok(StageResult {
        estimate: add(theta_star, &delta),
        prepared,
        p_success,
    })
}

fn is_stage_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Starvation(_) | Error::InversionUnstable(_) | Error::DegenerateProjection(_)
    )
}

fn assemble(
    scheme: Scheme,
    theta_true: &[f64],
    theta_hat: Vec<f64>,
    delta: f64,
    stages: Vec<StageRecord>,
) -> EstimationRecord {
    let error = distance(theta_true, &theta_hat);
    let total_time = stages.iter().map(StageRecord::time).sum();
    EstimationRecord {
        scheme,
        theta_true: theta_true.to_vec(),
        theta_hat,
        error,
        delta,
        stages,
        total_time,
        success: error <= delta,
        seed: 0,
    }
}

/// Non-adaptive scheme: a single round at `τ = κ/(E√c)` with
/// `⌈α·m·d·E²/δ²⌉` accepted copies.
pub fn run_one_channel<R: Rng + ?Sized>(
    model: &HamiltonianModel,
    theta_true: &[f64],
    delta: f64,
    e: f64,
    constants: &Constants,
    rng: &mut R,
) -> Result<EstimationRecord> {
    check_inputs(model, theta_true, delta, e, constants)?;
    let frame = PostselectionFrame::one_channel(model)?;
    let tau = constants.kappa / model.max_energy(e);
    let copies = one_channel_copies(model, constants, delta, e);
    let zero = vec![0.0; model.m()];
    let res = single_channel_stage(model, &frame, theta_true, &zero, tau, copies, constants, rng)?;
    let stage = StageRecord {
        n: 0,
        tau,
        r: 1,
        copies,
        prepared: res.prepared,
        postselect_success_rate: res.p_success,
        error_before: norm(theta_true),
        error_after: distance(theta_true, &res.estimate),
        failure: None,
    };
    Ok(assemble(Scheme::OneChannel, theta_true, res.estimate, delta, vec![stage]))
}

/// Halving stages `n = n₀, …, 1` with radius `2ⁿδ`, each run on the shifted
/// model `H_{θ-θ*}` at `τ_n = κ/(2ⁿδ√c)`.
pub fn run_adaptive<R: Rng + ?Sized>(
    model: &HamiltonianModel,
    theta_true: &[f64],
    delta: f64,
    e: f64,
    constants: &Constants,
    rng: &mut R,
) -> Result<EstimationRecord> {
    check_inputs(model, theta_true, delta, e, constants)?;
    let n0 = stage_count(e, delta);
    if n0 == 0 {
        let mut rec = run_one_channel(model, theta_true, delta, e, constants, rng)?;
        rec.scheme = Scheme::Adaptive;
        return Ok(rec);
    }
    let frame = PostselectionFrame::one_channel(model)?;
    let scale = model.c().sqrt();
    let mut theta_star = vec![0.0; model.m()];
    let mut stages = Vec::with_capacity(n0 as usize);
    for n in (1..=n0).rev() {
        let radius = 2f64.powi(n as i32) * delta;
        let tau = constants.kappa / (radius * scale);
        let copies = stage_copies(model, constants, n);
        let before = distance(theta_true, &theta_star);
        let mut stage = StageRecord {
            n,
            tau,
            r: 1,
            copies,
            prepared: 0,
            postselect_success_rate: 0.0,
            error_before: before,
            error_after: before,
            failure: None,
        };
        match single_channel_stage(model, &frame, theta_true, &theta_star, tau, copies, constants, rng) {
            Ok(res) => {
                stage.prepared = res.prepared;
                stage.postselect_success_rate = res.p_success;
                stage.error_after = distance(theta_true, &res.estimate);
                theta_star = res.estimate;
                stages.push(stage);
            }
            Err(err) if is_stage_failure(&err) => {
                stage.failure = Some(err.to_string());
                stages.push(stage);
                break;
            }
            Err(err) => return Err(err),
        }
    }
    Ok(assemble(Scheme::Adaptive, theta_true, theta_star, delta, stages))
}

/// Same staging as [`run_adaptive`] but with fixed `τ = κ/(2^{n₀}δ√c)` and
/// `r_n = min(2^{n₀-n}·d, r_max)` parallel channels on the symmetric subspace;
/// the prior estimate enters only through the measurement-side rotation
/// `e^{iτ{H*}_r}`.
pub fn run_many_channel<R: Rng + ?Sized>(
    model: &HamiltonianModel,
    theta_true: &[f64],
    delta: f64,
    e: f64,
    constants: &Constants,
    rng: &mut R,
) -> Result<EstimationRecord> {
    check_inputs(model, theta_true, delta, e, constants)?;
    let n0 = stage_count(e, delta);
    if n0 == 0 {
        let mut rec = run_one_channel(model, theta_true, delta, e, constants, rng)?;
        rec.scheme = Scheme::ManyChannel;
        return Ok(rec);
    }
    let d = model.dim();
    let tau = constants.kappa / (2f64.powi(n0 as i32) * delta * model.c().sqrt());
    let r_max = constants.r_max_for(d);
    let mut theta_star = vec![0.0; model.m()];
    let mut stages = Vec::with_capacity(n0 as usize);
    for n in (1..=n0).rev() {
        let r = channel_count(d, n0, n, r_max);
        let coll = CollectiveModel::new(model, r)?;
        let copies = stage_copies(model, constants, n);
        let before = distance(theta_true, &theta_star);
        let mut stage = StageRecord {
            n,
            tau,
            r,
            copies,
            prepared: 0,
            postselect_success_rate: 0.0,
            error_before: before,
            error_after: before,
            failure: None,
        };
        match many_channel_stage(&coll, theta_true, &theta_star, tau, copies, constants, rng) {
            Ok(res) => {
                stage.prepared = res.prepared;
                stage.postselect_success_rate = res.p_success;
                stage.error_after = distance(theta_true, &res.estimate);
                theta_star = res.estimate;
                stages.push(stage);
            }
            Err(err) if is_stage_failure(&err) => {
                stage.failure = Some(err.to_string());
                stages.push(stage);
                break;
            }
            Err(err) => return Err(err),
        }
    }
    Ok(assemble(Scheme::ManyChannel, theta_true, theta_star, delta, stages))
}

/// `min(2^{n₀-n}·d, r_max)`.
pub fn channel_count(d: usize, n0: u32, n: u32, r_max: usize) -> usize {
    let shift = n0.saturating_sub(n).min(40);
    (d << shift).min(r_max).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_model, ModelKind};
    use crate::qcore::max_abs;
    use crate::random::{trial_rng, uniform_in_ball, TrialRng};
    use crate::symsub::{restricted_tensor_power, sym_space};
    use rand::SeedableRng;

    fn full2() -> HamiltonianModel {
        make_model(ModelKind::Full, 2, None).unwrap()
    }

    #[test]
    fn stage_counts_and_channel_sequence() {
        assert_eq!(stage_count(1.0, 1.0), 0);
        assert_eq!(stage_count(1.0, 0.5), 1);
        assert_eq!(stage_count(1.0, 0.2), 3);
        assert_eq!(stage_count(1.0, 0.125), 3);
        assert_eq!(stage_count(1.0, 0.025), 6);
        let seq: Vec<usize> = (1..=3).rev().map(|n| channel_count(2, 3, n, 1024)).collect();
        assert_eq!(seq, vec![2, 4, 8]);
        assert_eq!(channel_count(2, 12, 1, 1024), 1024);
    }

    #[test]
    fn copies_grow_with_stage_index() {
        let model = full2();
        let c = Constants::default();
        assert!(stage_copies(&model, &c, 5) > stage_copies(&model, &c, 1));
        assert_eq!(stage_copies(&model, &c, 1), (4.0 * c.alpha * 6.0).ceil() as usize);
    }

    #[test]
    fn null_parameter_is_recovered() {
        let model = full2();
        let c = Constants::default();
        let mut rng = trial_rng(139, 0);
        let rec = run_one_channel(&model, &[0.0; 3], 0.2, 1.0, &c, &mut rng).unwrap();
        assert!(rec.error <= 0.1, "{}", rec.error);
        assert!(rec.success);
    }

    #[test]
    fn total_time_matches_stages() {
        let model = full2();
        let c = Constants::default();
        let mut rng = trial_rng(149, 0);
        let theta = uniform_in_ball(&mut rng, 3, 1.0);
        for scheme in Scheme::ALL {
            let rec = scheme.run(&model, &theta, 0.2, 1.0, &c, 7).unwrap();
            let sum: f64 = rec.stages.iter().map(|s| s.prepared as f64 * s.r as f64 * s.tau).sum();
            assert_eq!(rec.total_time, sum);
            assert_eq!(rec.success, rec.error <= rec.delta);
            assert_eq!(rec.seed, 7);
            assert!(rec.stages.iter().all(|s| s.prepared >= s.copies));
        }
    }

    #[test]
    fn records_are_reproducible() {
        let model = full2();
        let c = Constants::default();
        let theta = [0.3, -0.2, 0.5];
        for scheme in Scheme::ALL {
            let a = scheme.run(&model, &theta, 0.2, 1.0, &c, 11).unwrap();
            let b = scheme.run(&model, &theta, 0.2, 1.0, &c, 11).unwrap();
            assert_eq!(a, b);
            let other = scheme.run(&model, &theta, 0.2, 1.0, &c, 12).unwrap();
            assert_ne!(a.theta_hat, other.theta_hat);
        }
    }

    #[test]
    fn degenerate_staging_equals_one_channel() {
        let model = full2();
        let c = Constants::default();
        let theta = [0.05, 0.02, -0.04];
        let a = Scheme::Adaptive.run(&model, &theta, 0.1, 0.1, &c, 3).unwrap();
        let b = Scheme::OneChannel.run(&model, &theta, 0.1, 0.1, &c, 3).unwrap();
        assert_eq!(a.stages, b.stages);
        assert_eq!(a.theta_hat, b.theta_hat);
        assert_eq!(a.scheme, Scheme::Adaptive);
    }

    #[test]
    fn input_validation() {
        let model = full2();
        let c = Constants::default();
        let mut rng = trial_rng(151, 0);
        assert!(run_one_channel(&model, &[2.0, 0.0, 0.0], 0.1, 1.0, &c, &mut rng).is_err());
        assert!(run_one_channel(&model, &[0.0, 0.0], 0.1, 1.0, &c, &mut rng).is_err());
        assert!(run_adaptive(&model, &[0.0; 3], 2.0, 1.0, &c, &mut rng).is_err());
        assert!(run_many_channel(&model, &[0.0; 3], 0.0, 1.0, &c, &mut rng).is_err());
    }

    #[test]
    fn doubling_copies_halves_squared_error() {
        let model = full2();
        let theta = [0.4, 0.1, -0.3];
        let median_sq = |alpha: f64| {
            let c = Constants { alpha, refine: false, ..Constants::default() };
            let mut errs: Vec<f64> = (0..300)
                .map(|s| {
                    let mut rng = TrialRng::seed_from_u64(1000 + s);
                    let rec = run_one_channel(&model, &theta, 0.2, 1.0, &c, &mut rng).unwrap();
                    rec.error * rec.error
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[errs.len() / 2]
        };
        let ratio = median_sq(8.0) / median_sq(16.0);
        assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn perfect_prior_gives_unperturbed_reduced_state() {
        let model = full2();
        let coll = CollectiveModel::new(&model, 4).unwrap();
        let theta = [0.3, -0.1, 0.2];
        let tau = 0.2;
        let counter = hermitian_expm(&coll.hamiltonian(&theta), -tau);
        let (red, p) = reduce_operator(&coll.frame, &coll.probe_operator(&counter, &theta, tau)).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        let inc = invert_amplitudes(red.amplitudes(), tau, coll.frame.norm_factor()).unwrap();
        assert!(norm(&inc) < 1e-10);
    }

    #[test]
    fn collective_evolution_matches_tensor_power() {
        let model = make_model(ModelKind::Full, 2, None).unwrap();
        let theta = [0.7, -0.4, 0.3];
        for r in 1..=4 {
            let coll = CollectiveModel::new(&model, r).unwrap();
            let space = sym_space(2, r).unwrap();
            let u = hermitian_expm(&model.hamiltonian(&theta).unwrap(), 0.6);
            let tensor = restricted_tensor_power(&space, &u).unwrap();
            let direct = hermitian_expm(&coll.hamiltonian(&theta), 0.6);
            assert!(max_abs(&(tensor - direct.matrix())) < 1e-10, "r={r}");
        }
    }

    #[test]
    fn magnus_state_distance_is_quadratic() {
        // ‖e^{iτ{H*}}e^{-iτ{H_θ}}|Φ_r⟩ - e^{-iτ{H_θ - H*}}|Φ_r⟩‖ ≤ C'(τE)².
        let model = full2();
        let mut rng = trial_rng(157, 0);
        let mut worst: f64 = 0.0;
        for r in [1, 2, 4] {
            let coll = CollectiveModel::new(&model, r).unwrap();
            for &te in &[0.01, 0.03, 0.1] {
                for _ in 0..10 {
                    let theta = uniform_in_ball(&mut rng, 3, te);
                    let star = uniform_in_ball(&mut rng, 3, te);
                    let counter = hermitian_expm(&coll.hamiltonian(&star), -1.0);
                    let exact = coll.probe_operator(&counter, &theta, 1.0);
                    let approx = hermitian_expm(&coll.hamiltonian(&sub(&theta, &star)), 1.0);
                    let dim = coll.frame.dim() as f64;
                    let dist = (exact - approx.matrix()).norm() / dim.sqrt();
                    worst = worst.max(dist / (te * te * r as f64 * r as f64));
                }
            }
        }
        assert!(worst < 2.0, "fitted constant {worst}");
    }
}
