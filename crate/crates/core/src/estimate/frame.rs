//! Postselection frames and the projection superoperator.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::HamiltonianModel;
use crate::probe::operator_on_mes;
use crate::qcore::{hs_inner, max_abs, trace, CMat, CVec, PureState, C64};
use crate::symsub::{collective, SymSpace};
use crate::tol::TOL;

/// Orthonormal basis `|0̄⟩ = |Φ⟩, |j̄⟩ ∝ (K_j ⊗ I)|Φ⟩` of the subspace in which
/// the postselected probe lives.
///
/// For one channel `K_j = X_j`; for `r` channels on the symmetric subspace
/// `K_j = {X_j}_r`. In both cases `‖K_j|Φ⟩‖² = F₂` and the frame stores
/// `norm_factor = 1/√F₂` (which is `√d` for a single channel).
///
/// The frame is stored through its operators `K_k` (normalized so that
/// `Tr K_j† K_k = D δ_jk`); basis vectors are `vec(K_k)/√D`.
#[derive(Debug, Clone)]
pub struct PostselectionFrame {
    factors: Vec<usize>,
    ops: Vec<CMat>,
    norm_factor: f64,
}

impl PostselectionFrame {
    /// Frame for the single-channel MES probe.
    pub fn one_channel(model: &HamiltonianModel) -> Result<Self> {
        let d = model.dim();
        let mut ops = vec![CMat::identity(d, d)];
        let s = (d as f64).sqrt();
        ops.extend(model.generators().iter().map(|x| x.matrix().scale(s)));
        Self::from_operators(d, ops, s)
    }

    /// Frame for the MES on the symmetric subspace of `space.r()` channels.
    pub fn collective(model: &HamiltonianModel, space: &SymSpace) -> Result<Self> {
        if space.d() != model.dim() {
            return invalid("symmetric space and model dimensions differ");
        }
        let dim = space.dim();
        let inv = 1.0 / space.f2().sqrt();
        let mut ops = vec![CMat::identity(dim, dim)];
        for x in model.generators() {
            ops.push(collective(space, x)?.matrix().scale(inv));
        }
        Self::from_operators(dim, ops, inv)
    }

    fn from_operators(dim: usize, ops: Vec<CMat>, norm_factor: f64) -> Result<Self> {
        let frame = Self {
            factors: vec![dim, dim],
            ops,
            norm_factor,
        };
        let dev = frame.gram_defect();
        if dev > 1e-9 {
            return invalid(format!("postselection frame is not orthonormal (defect {dev:.3e})"));
        }
        Ok(frame)
    }

    /// Number of frame vectors, `m + 1`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Dimension `D` of the driven factor.
    pub fn dim(&self) -> usize {
        self.factors[0]
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Frame vectors in the probe space.
    pub fn basis(&self) -> Vec<CVec> {
        self.ops.iter().map(operator_on_mes).collect()
    }

    pub fn operators(&self) -> &[CMat] {
        &self.ops
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    /// `max |⟨j̄|k̄⟩ - δ_jk|`.
    pub fn gram_defect(&self) -> f64 {
        let n = self.ops.len();
        let dim = self.dim() as f64;
        let g = CMat::from_fn(n, n, |a, b| self.ops[a].dotc(&self.ops[b]) / dim);
        max_abs(&(g - CMat::identity(n, n)))
    }

    /// Frame coefficients `⟨k̄|ψ⟩` of a vector in the probe space.
    pub fn coefficients(&self, amps: &CVec) -> CVec {
        let d = self.dim();
        let s = 1.0 / (d as f64).sqrt();
        CVec::from_iterator(
            self.ops.len(),
            self.ops.iter().map(|k| {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..d {
                    for b in 0..d {
                        acc += k[(a, b)].conj() * amps[a * d + b];
                    }
                }
                acc * s
            }),
        )
    }

    /// Frame coefficients of `(W ⊗ I)|Φ⟩`, i.e. `Tr(K_k† W)/D`.
    pub fn operator_coefficients(&self, w: &CMat) -> CVec {
        let dim = self.dim() as f64;
        CVec::from_iterator(self.ops.len(), self.ops.iter().map(|k| k.dotc(w) / dim))
    }

    /// `P|ψ⟩` in the full probe space.
    pub fn project(&self, amps: &CVec) -> CVec {
        let coef = self.coefficients(amps);
        let mut out = CVec::zeros(amps.len());
        for (b, c) in self.basis().iter().zip(coef.iter()) {
            out += b * *c;
        }
        out
    }

    fn check_state(&self, state: &PureState) -> Result<()> {
        if state.factors() != self.factors.as_slice() {
            return invalid(format!(
                "state factors {:?} do not match frame factors {:?}",
                state.factors(),
                self.factors
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Postselection {
    pub accepted: bool,
    /// Normalized frame coefficients of the projected state.
    pub reduced: PureState,
    pub p_success: f64,
}

/// Projects `state` onto the frame; acceptance is drawn with the projection
/// probability.
pub fn postselect<R: Rng + ?Sized>(
    frame: &PostselectionFrame,
    state: &PureState,
    rng: &mut R,
) -> Result<Postselection> {
    frame.check_state(state)?;
    let (reduced, p_success) = reduce(frame, state.amplitudes())?;
    let accepted = rng.random::<f64>() < p_success;
    Ok(Postselection {
        accepted,
        reduced,
        p_success,
    })
}

/// Normalized reduced state and projection probability, without sampling.
pub fn reduce(frame: &PostselectionFrame, amps: &CVec) -> Result<(PureState, f64)> {
    finish_reduce(frame.coefficients(amps))
}

/// As [`reduce`] for the probe `(W ⊗ I)|Φ⟩`, without forming it.
pub fn reduce_operator(frame: &PostselectionFrame, w: &CMat) -> Result<(PureState, f64)> {
    if w.shape() != (frame.dim(), frame.dim()) {
        return invalid("operator does not match the frame dimension");
    }
    finish_reduce(frame.operator_coefficients(w))
}

fn finish_reduce(coef: CVec) -> Result<(PureState, f64)> {
    let p = coef.norm_squared();
    if p < TOL.min_projection {
        return Err(Error::DegenerateProjection(p));
    }
    let reduced = PureState::normalized(vec![coef.len()], coef)?;
    Ok((reduced, p.min(1.0)))
}

/// `S(A) = (Tr A / d) I + Σ_j Tr(A X_j) X_j`, the HS projection onto
/// `span{I, X_1, …, X_m}`.
pub fn superop_s(model: &HamiltonianModel, a: &CMat) -> Result<CMat> {
    let d = model.dim();
    if a.shape() != (d, d) {
        return invalid(format!("operator shape {:?} does not match model dimension {d}", a.shape()));
    }
    let mut out = CMat::identity(d, d) * (trace(a) / d as f64);
    for x in model.generators() {
        // Tr(A X_j) = Tr(X_j† A) since X_j is Hermitian.
        let c = hs_inner(x.matrix(), a)?;
        out += x.matrix() * c;
    }
    Ok(out)
}
