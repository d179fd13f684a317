//! Seeded randomness: per-trial streams and random matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qcore::{CMat, CVec, HermitianMatrix, PureState, UnitaryMatrix, C64};

pub type TrialRng = ChaCha8Rng;

/// Independent stream for trial `index` of an experiment seeded with `master`.
///
/// ChaCha is counter based: the stream id selects a disjoint keystream, so the
/// generator for a trial does not depend on how many other trials ran before it.
pub fn trial_rng(master: u64, index: u64) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Deterministic 64-bit seed reported for a trial (splitmix64 of the pair).
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| complex_normal(rng))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase of `R`'s
/// diagonal absorbed into `Q`).
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> UnitaryMatrix {
    let qr = ginibre(rng, n).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..n {
        let rk = r[(k, k)];
        let phase = if rk.norm() > 0.0 { rk / rk.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    UnitaryMatrix::new(q).expect("QR factor is unitary")
}

/// Haar-random pure state on the given product space.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, factors: Vec<usize>) -> PureState {
    let n: usize = factors.iter().product();
    let v = CVec::from_fn(n, |_, _| complex_normal(rng));
    PureState::normalized(factors, v).expect("Gaussian vector is nonzero")
}

/// GUE-like random Hermitian matrix.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    HermitianMatrix::from_hermitian_part(&ginibre(rng, n))
}

/// Random Hermitian matrix with zero trace.
pub fn random_traceless<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let h = random_hermitian(rng, n);
    let shift = h.trace() / n as f64;
    &h - &HermitianMatrix::identity(n).scale(shift)
}

/// Uniform point in the closed Euclidean ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let dir = unit_vector(rng, dim);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    dir.into_iter().map(|x| x * r).collect()
}

/// Uniform direction on the unit sphere in `R^dim`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
