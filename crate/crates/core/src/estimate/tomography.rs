//! Pure-state tomography from single-copy measurements in Haar-random bases.
//!
//! Each copy is measured in an independent Haar-random orthonormal basis and
//! the outcome vector `|b⟩` is recorded. Since `E|b⟩⟨b| = (ρ + I)/(D + 1)`, the
//! linear-inversion estimate is `ρ̂ = (D + 1)·mean(|b⟩⟨b|) - I`, and the state
//! estimate is the top eigenvector of `ρ̂`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{invalid, Result};
use crate::qcore::{CMat, CVec, PureState, C64};
use crate::random::{complex_normal, haar_unitary};

/// Outcome of measuring `psi` in a freshly drawn Haar basis, sampled
/// directly: the recorded vector has density `D·|⟨b|ψ⟩|²` with respect to
/// the uniform measure on the unit sphere.
///
/// A complex Gaussian vector weighted by `|⟨ψ|g⟩|²` has the same direction
/// law, and the weighting only changes the component along `ψ`, whose squared
/// modulus becomes Gamma(2, 1) distributed.
pub fn sample_outcome<R: Rng + ?Sized>(psi: &CVec, rng: &mut R) -> CVec {
    let n = psi.len();
    let mut g = CVec::from_fn(n, |_, _| complex_normal(rng));
    let along = psi.dotc(&g);
    g -= psi * along;
    let e1: f64 = Exp1.sample(rng);
    let e2: f64 = Exp1.sample(rng);
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    g += psi * C64::from_polar((e1 + e2).sqrt(), phase);
    let norm = g.norm();
    g.unscale(norm)
}

/// Reference sampler: draws the full Haar basis and picks an element by the
/// Born rule.
pub fn haar_basis_outcome<R: Rng + ?Sized>(psi: &CVec, rng: &mut R) -> CVec {
    let u = haar_unitary(rng, psi.len());
    let amps = u.matrix().adjoint() * psi;
    let mut x: f64 = rng.random();
    let last = psi.len() - 1;
    for k in 0..psi.len() {
        let p = amps[k].norm_sqr();
        if x < p || k == last {
            return u.matrix().column(k).into_owned();
        }
        x -= p;
    }
    unreachable!()
}

/// Running sum of outcome projectors.
#[derive(Debug, Clone)]
pub struct Tomographer {
    dim: usize,
    sum: CMat,
    count: usize,
}

impl Tomographer {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sum: CMat::zeros(dim, dim),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Records one measured outcome vector.
    pub fn record(&mut self, b: &CVec) {
        for j in 0..self.dim {
            let bj = b[j];
            for k in 0..self.dim {
                self.sum[(j, k)] += bj * b[k].conj();
            }
        }
        self.count += 1;
    }

    /// Measures one copy of `psi`.
    pub fn measure<R: Rng + ?Sized>(&mut self, psi: &CVec, rng: &mut R) {
        let b = sample_outcome(psi, rng);
        self.record(&b);
    }

    /// Linear-inversion density estimate `(D+1)·mean - I`.
    pub fn density(&self) -> CMat {
        let n = self.dim;
        let mean = self.sum.unscale(self.count.max(1) as f64);
        let rho = mean.scale((n + 1) as f64) - CMat::identity(n, n);
        crate::qcore::hermitian_part(&rho)
    }

    /// Top eigenvector of the density estimate. Needs at least `D` copies.
    pub fn estimate(&self) -> Result<PureState> {
        if self.count < self.dim {
            return invalid(format!(
                "tomography needs at least {} copies, got {}",
                self.dim, self.count
            ));
        }
        top_eigenvector(&self.density(), self.dim)
    }
}

fn top_eigenvector(rho: &CMat, dim: usize) -> Result<PureState> {
    let (vals, vecs) = crate::qcore::HermitianMatrix::from_hermitian_part(rho).eigh();
    let best = vals.imax();
    PureState::normalized(vec![dim], vecs.column(best).into_owned())
}

/// Measures every copy in its own Haar-random basis and returns the estimate.
pub fn tomography<R: Rng + ?Sized>(copies: &[PureState], rng: &mut R) -> Result<PureState> {
    let first = copies
        .first()
        .ok_or_else(|| crate::Error::Validation("tomography needs copies".into()))?;
    let dim = first.dim();
    if copies.len() < dim {
        return invalid(format!("tomography needs at least {dim} copies, got {}", copies.len()));
    }
    let mut t = Tomographer::new(dim);
    for c in copies {
        if c.dim() != dim {
            return invalid("tomography copies have different dimensions");
        }
        t.measure(c.amplitudes(), rng);
    }
    t.estimate()
}

/// Estimate from exact outcome statistics: the limit of infinitely many copies.
pub fn infinite_data_estimate(psi: &CVec) -> Result<PureState> {
    let n = psi.len();
    let proj = psi * psi.adjoint();
    let mean = (proj + CMat::identity(n, n)).unscale((n + 1) as f64);
    let rho = mean.scale((n + 1) as f64) - CMat::identity(n, n);
    top_eigenvector(&rho, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::max_abs;
    use crate::random::{random_state, trial_rng};

    fn moments<F: FnMut(&mut crate::random::TrialRng) -> CVec>(
        n: usize,
        samples: usize,
        probe: &CVec,
        mut draw: F,
    ) -> (CMat, f64) {
        let mut rng = trial_rng(73, 0);
        let mut mean = CMat::zeros(n, n);
        let mut fourth = 0.0;
        for _ in 0..samples {
            let b = draw(&mut rng);
            mean += &b * b.adjoint();
            fourth += probe.dotc(&b).norm_sqr().powi(2);
        }
        (mean.unscale(samples as f64), fourth / samples as f64)
    }

    #[test]
    fn fast_sampler_matches_haar_basis_measurement() {
        let mut rng = trial_rng(79, 0);
        let psi = random_state(&mut rng, vec![3]).into_amplitudes();
        let probe = random_state(&mut rng, vec![3]).into_amplitudes();
        let samples = 40_000;
        let (fast_mean, fast4) = moments(3, samples, &probe, |r| sample_outcome(&psi, r));
        let (ref_mean, ref4) = moments(3, samples, &probe, |r| haar_basis_outcome(&psi, r));
        let want = (&psi * psi.adjoint() + CMat::identity(3, 3)).unscale(4.0);
        assert!(max_abs(&(&fast_mean - &want)) < 0.01);
        assert!(max_abs(&(&ref_mean - &want)) < 0.01);
        assert!((fast4 - ref4).abs() < 0.02, "{fast4} vs {ref4}");
    }

    #[test]
    fn infinite_data_limit_recovers_the_state() {
        let mut rng = trial_rng(83, 0);
        for n in 2..6 {
            let psi = random_state(&mut rng, vec![n]);
            let est = infinite_data_estimate(psi.amplitudes()).unwrap();
            assert!((est.fidelity(&psi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_state_with_200_copies() {
        let psi = PureState::basis(vec![2], 0).unwrap();
        let copies = vec![psi.clone(); 200];
        let mut good = 0;
        for seed in 0..200 {
            let mut rng = trial_rng(89, seed);
            let est = tomography(&copies, &mut rng).unwrap();
            if 1.0 - est.fidelity(&psi) <= 0.05 {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.95 * 200.0, "{good}/200");
    }

    #[test]
    fn too_few_copies_is_an_error() {
        let psi = PureState::basis(vec![3], 0).unwrap();
        let mut rng = trial_rng(97, 0);
        assert!(tomography(&[psi.clone(), psi], &mut rng).is_err());
        assert!(tomography(&[], &mut rng).is_err());
    }
}
