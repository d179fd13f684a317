//! Probe preparation and evolution under feedback schedules, the QFI matrix,
//! and the growth-rate audit of the QFI trace.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::HamiltonianModel;
use crate::qcore::{
    apply_local, hermitian_expm, max_abs, CMat, CVec, HermitianMatrix, PureState, UnitaryMatrix,
    C64,
};
use crate::random::{haar_unitary, random_state, uniform_in_ball};
use crate::tol::TOL;

/// Maximally entangled state `d^{-1/2} Σ_j |e_j⟩|e_j⟩` on two `d`-level factors.
pub fn mes(d: usize) -> Result<PureState> {
    if d < 1 {
        return invalid("MES needs a positive dimension");
    }
    let mut amps = CVec::zeros(d * d);
    let a = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    for j in 0..d {
        amps[j * d + j] = a;
    }
    PureState::new(vec![d, d], amps)
}

/// `(A ⊗ I)|Φ⟩` for the MES on `A`'s dimension, i.e. `vec(A)/√d`.
pub fn operator_on_mes(a: &CMat) -> CVec {
    let d = a.nrows();
    let s = 1.0 / (d as f64).sqrt();
    CVec::from_iterator(d * d, (0..d * d).map(|k| a[(k / d, k % d)] * s))
}

/// One step of a schedule: an optional θ-independent unitary on the whole
/// space, followed by free evolution under `H_θ` on every driven channel.
#[derive(Debug, Clone)]
pub struct Step {
    pub feedback: Option<UnitaryMatrix>,
    pub interval: f64,
}

impl Step {
    pub fn free(interval: f64) -> Self {
        Step {
            feedback: None,
            interval,
        }
    }

    pub fn with_feedback(feedback: UnitaryMatrix, interval: f64) -> Self {
        Step {
            feedback: Some(feedback),
            interval,
        }
    }
}

/// `r` driven channels of dimension `d` plus an ancilla, an initial state on
/// `(C^d)^{⊗r} ⊗ C^a`, and a sequence of steps.
#[derive(Debug, Clone)]
pub struct Schedule {
    d: usize,
    r: usize,
    initial: PureState,
    steps: Vec<Step>,
}

impl Schedule {
    pub fn new(d: usize, r: usize, initial: PureState, steps: Vec<Step>) -> Result<Self> {
        if r == 0 {
            return invalid("schedule needs at least one driven channel");
        }
        let f = initial.factors();
        if f.len() != r + 1 || f[..r].iter().any(|&x| x != d) {
            return invalid(format!(
                "initial state factors {f:?} do not match {r} channel(s) of dimension {d} plus an ancilla"
            ));
        }
        let total = initial.dim();
        for (k, s) in steps.iter().enumerate() {
            if !(s.interval >= 0.0) || !s.interval.is_finite() {
                return invalid(format!("step {k} has interval {}", s.interval));
            }
            if let Some(v) = &s.feedback {
                if v.dim() != total {
                    return invalid(format!(
                        "feedback at step {k} has dimension {}, state space has {total}",
                        v.dim()
                    ));
                }
            }
        }
        Ok(Self {
            d,
            r,
            initial,
            steps,
        })
    }

    /// MES probe on one channel with a single free interval.
    pub fn single_interval(d: usize, tau: f64) -> Result<Self> {
        Self::new(d, 1, mes(d)?, vec![Step::free(tau)])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn channels(&self) -> usize {
        self.r
    }

    pub fn initial(&self) -> &PureState {
        &self.initial
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Total evolution time `Σ t_k` per channel.
    pub fn total_time(&self) -> f64 {
        self.steps.iter().map(|s| s.interval).sum()
    }

    /// The schedule cut off after evolution time `t`. Feedback unitaries that
    /// occur at or before `t` are kept.
    pub fn truncated(&self, t: f64) -> Schedule {
        let mut steps = Vec::new();
        let mut elapsed = 0.0;
        for s in &self.steps {
            if elapsed > t {
                break;
            }
            let dt = s.interval.min(t - elapsed).max(0.0);
            steps.push(Step {
                feedback: s.feedback.clone(),
                interval: dt,
            });
            elapsed += s.interval;
        }
        Schedule {
            d: self.d,
            r: self.r,
            initial: self.initial.clone(),
            steps,
        }
    }
}

/// Runs the schedule for parameter `theta`.
pub fn evolve(model: &HamiltonianModel, theta: &[f64], schedule: &Schedule) -> Result<PureState> {
    if model.dim() != schedule.d {
        return invalid(format!(
            "model dimension {} does not match schedule channel dimension {}",
            model.dim(),
            schedule.d
        ));
    }
    let h = model.hamiltonian(theta)?;
    let factors = schedule.initial.factors().to_vec();
    let mut amps = schedule.initial.amplitudes().clone();
    for s in &schedule.steps {
        if let Some(v) = &s.feedback {
            amps = v.matrix() * amps;
        }
        if s.interval > 0.0 {
            let u = hermitian_expm(&h, s.interval);
            for slot in 0..schedule.r {
                amps = apply_local(&amps, &factors, slot, u.matrix());
            }
        }
    }
    // Unitary evolution: renormalize only the rounding drift.
    PureState::normalized(factors, amps)
}

#[derive(Debug, Clone, Serialize)]
pub struct QfiReport {
    /// QFI matrix.
    #[serde(skip)]
    pub j: DMatrix<f64>,
    /// `G_jk = ⟨q|X̃_j X̃_k|q⟩` with `X̃_j = Σ_channels X_j`.
    #[serde(skip)]
    pub g: CMat,
    pub trace_j: f64,
    pub trace_g: f64,
    /// Total driven time `r·Σ t_k`.
    pub driven_time: f64,
    /// `4 c (r τ)²`.
    pub bound_4ct2: f64,
    /// `4 m (r τ)² / d` for spherical models.
    pub spherical_bound: Option<f64>,
}

/// QFI matrix by central finite differences of [`evolve`] with step
/// `TOL.fd_step`.
pub fn qfi_matrix(model: &HamiltonianModel, theta: &[f64], schedule: &Schedule) -> Result<QfiReport> {
    qfi_matrix_with_step(model, theta, schedule, TOL.fd_step)
}

pub fn qfi_matrix_with_step(
    model: &HamiltonianModel,
    theta: &[f64],
    schedule: &Schedule,
    h: f64,
) -> Result<QfiReport> {
    let m = model.m();
    let q = evolve(model, theta, schedule)?;
    let mut tangents = Vec::with_capacity(m);
    let mut shifted = theta.to_vec();
    for j in 0..m {
        shifted[j] = theta[j] + h;
        let plus = evolve(model, &shifted, schedule)?;
        shifted[j] = theta[j] - h;
        let minus = evolve(model, &shifted, schedule)?;
        shifted[j] = theta[j];
        tangents.push((plus.amplitudes() - minus.amplitudes()).unscale(2.0 * h));
    }
    let qa = q.amplitudes();
    let overlaps: Vec<C64> = tangents.iter().map(|t| t.dotc(qa)).collect();
    let mut jm = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v = 4.0 * (tangents[a].dotc(&tangents[b]) - overlaps[a] * overlaps[b].conj()).re;
            jm[(a, b)] = v;
            jm[(b, a)] = v;
        }
    }
    let g = collective_g(model, &q, schedule.r);
    let driven_time = schedule.r as f64 * schedule.total_time();
    let bound = 4.0 * model.c() * driven_time * driven_time;
    let spherical_bound = model
        .is_spherical()
        .then(|| 4.0 * m as f64 * driven_time * driven_time / model.dim() as f64);
    Ok(QfiReport {
        trace_j: jm.trace(),
        trace_g: g.trace().re,
        j: jm,
        g,
        driven_time,
        bound_4ct2: bound,
        spherical_bound,
    })
}

fn collective_g(model: &HamiltonianModel, q: &PureState, r: usize) -> CMat {
    let factors = q.factors();
    let w: Vec<CVec> = model
        .generators()
        .iter()
        .map(|x| {
            let mut acc = CVec::zeros(q.dim());
            for slot in 0..r {
                acc += apply_local(q.amplitudes(), factors, slot, x.matrix());
            }
            acc
        })
        .collect();
    let m = w.len();
    CMat::from_fn(m, m, |a, b| w[a].dotc(&w[b]))
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct GrowthPoint {
    pub t: f64,
    pub trace_j: f64,
    /// `4 Tr G(t)`.
    pub four_trace_g: f64,
    /// `4 c (r t)²`.
    pub bound: f64,
}

/// Evaluates `Tr J(t)` on a uniform grid of `n_steps` times over the schedule
/// and checks `Tr J(t) ≤ 4c(rt)²` and the growth rate of `√Tr J` against
/// `√(4 max Tr G)`.
pub fn growth_audit(
    model: &HamiltonianModel,
    theta: &[f64],
    schedule: &Schedule,
    n_steps: usize,
) -> Result<Vec<GrowthPoint>> {
    let series = growth_series(model, theta, schedule, n_steps)?;
    check_growth(&series)?;
    Ok(series)
}

/// The grid evaluation of [`growth_audit`] without the checks.
pub fn growth_series(
    model: &HamiltonianModel,
    theta: &[f64],
    schedule: &Schedule,
    n_steps: usize,
) -> Result<Vec<GrowthPoint>> {
    if n_steps < 2 {
        return invalid("growth audit needs at least two grid points");
    }
    let tau = schedule.total_time();
    (0..n_steps)
        .map(|i| {
            let t = if i + 1 == n_steps {
                tau
            } else {
                tau * i as f64 / (n_steps - 1) as f64
            };
            let rep = qfi_matrix(model, theta, &schedule.truncated(t))?;
            Ok(GrowthPoint {
                t,
                trace_j: rep.trace_j,
                four_trace_g: 4.0 * rep.trace_g,
                bound: rep.bound_4ct2,
            })
        })
        .collect()
}

fn check_growth(series: &[GrowthPoint]) -> Result<()> {
    // Absolute floor for finite-difference noise near t = 0.
    const FLOOR: f64 = 1e-12;
    for p in series {
        if p.trace_j > p.bound * (1.0 + TOL.qfi_bound_slack) + FLOOR {
            return Err(Error::AuditFailure {
                time: p.t,
                detail: format!("Tr J = {:.9e} exceeds 4ct² = {:.9e}", p.trace_j, p.bound),
            });
        }
    }
    let max_g = series.iter().fold(0.0_f64, |a, p| a.max(p.four_trace_g));
    let rate = max_g.sqrt();
    for w in series.windows(2) {
        let inc = w[1].trace_j.max(0.0).sqrt() - w[0].trace_j.max(0.0).sqrt();
        let allowed = rate * (w[1].t - w[0].t) * (1.0 + TOL.growth_slack) + FLOOR.sqrt() * 1e-3;
        if inc > allowed {
            return Err(Error::AuditFailure {
                time: w[1].t,
                detail: format!("increment of sqrt(Tr J) {inc:.6e} exceeds {allowed:.6e}"),
            });
        }
    }
    Ok(())
}

/// Random schedule for audits: Haar initial state, `n_steps` intervals with
/// Haar feedback unitaries between them, total time `total_time`.
pub fn random_schedule<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    r: usize,
    ancilla: usize,
    n_steps: usize,
    total_time: f64,
) -> Result<Schedule> {
    let mut factors = vec![d; r];
    factors.push(ancilla);
    let dim: usize = factors.iter().product();
    let initial = random_state(rng, factors);
    let weights: Vec<f64> = (0..n_steps).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let steps = weights
        .iter()
        .enumerate()
        .map(|(k, w)| Step {
            feedback: (k > 0).then(|| haar_unitary(rng, dim)),
            interval: total_time * w / total,
        })
        .collect();
    Schedule::new(d, r, initial, steps)
}

/// Random schedule together with a random parameter in the ball of `radius`.
pub fn random_audit_case<R: Rng + ?Sized>(
    rng: &mut R,
    model: &HamiltonianModel,
    r: usize,
    max_time: f64,
    radius: f64,
) -> Result<(Vec<f64>, Schedule)> {
    let ancilla = rng.random_range(1..=model.dim());
    let n_steps = rng.random_range(1..=4);
    let total = max_time * rng.random::<f64>();
    let schedule = random_schedule(rng, model.dim(), r, ancilla, n_steps, total)?;
    let theta = uniform_in_ball(rng, model.m(), radius);
    Ok((theta, schedule))
}

/// Strang-split simulation of one interval under `H_θ - H*` on a single
/// channel: `k` slices of free evolution interleaved with the θ-independent
/// counter-rotations `e^{+i h H*}`.
pub fn trotterized_feedback(
    d: usize,
    initial: PureState,
    interval: f64,
    h_star: &HermitianMatrix,
    slices: usize,
) -> Result<Schedule> {
    if slices == 0 {
        return invalid("Trotterization needs at least one slice");
    }
    let total = initial.dim();
    let ancilla = total / d;
    let h = interval / slices as f64;
    let embed = |u: UnitaryMatrix| -> Result<UnitaryMatrix> {
        UnitaryMatrix::new(crate::qcore::kron(u.matrix(), &CMat::identity(ancilla, ancilla)))
    };
    let half = embed(hermitian_expm(h_star, -h / 2.0))?;
    let full = embed(hermitian_expm(h_star, -h))?;
    let mut steps = Vec::with_capacity(slices + 1);
    steps.push(Step::with_feedback(half.clone(), h));
    for _ in 1..slices {
        steps.push(Step::with_feedback(full.clone(), h));
    }
    steps.push(Step::with_feedback(half, 0.0));
    let initial = PureState::new(vec![d, ancilla], initial.into_amplitudes())?;
    Schedule::new(d, 1, initial, steps)
}

/// Slice count for which the Strang splitting error bound
/// `t³(a²b/3 + ab²/6)/k²` stays below `tol`, where `a ≥ ‖H_θ‖` and
/// `b ≥ ‖H*‖`.
pub fn trotter_slices(interval: f64, a: f64, b: f64, tol: f64) -> usize {
    let c = interval.powi(3) * (a * a * b / 3.0 + a * b * b / 6.0);
    ((c / tol).sqrt().ceil() as usize).max(1)
}

/// Largest entry of `|J - Jᵀ|`, used by tests of the report invariants.
pub fn asymmetry(j: &DMatrix<f64>) -> f64 {
    (j - j.transpose()).amax()
}

/// Max-abs deviation of `G` from hermiticity.
pub fn g_asymmetry(g: &CMat) -> f64 {
    max_abs(&(g - g.adjoint()))
}
