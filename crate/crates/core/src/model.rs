//! Linear Hamiltonian models `H_θ = Σ_j θ_j X_j` over orthonormal generators.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::qcore::{hs_inner, max_abs, CMat, HermitianMatrix, C64};
use crate::tol::TOL;

/// Built-in generator families. The lowercase names are the strings used in
/// configuration files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// All of `su(d)`, `m = d² - 1`.
    Full,
    /// Orthonormalized diagonal generators, `m = d - 1`.
    Phase,
    /// `(|e_j⟩⟨e_d| + |e_d⟩⟨e_j|)/√2`, `m = d - 1`. Not spherical for `d > 2`.
    OffDiag,
    /// User-supplied orthonormal traceless generators.
    Custom,
}

impl ModelKind {
    pub const NAMES: [&'static str; 4] = ["full", "phase", "offdiag", "custom"];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Phase => "phase",
            ModelKind::OffDiag => "offdiag",
            ModelKind::Custom => "custom",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelKind::Full),
            "phase" => Ok(ModelKind::Phase),
            "offdiag" => Ok(ModelKind::OffDiag),
            "custom" => Ok(ModelKind::Custom),
            other => Err(Error::Validation(format!(
                "unknown model `{other}`; expected one of {}",
                ModelKind::NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    kind: ModelKind,
    d: usize,
    generators: Vec<HermitianMatrix>,
    big_x: HermitianMatrix,
    c: f64,
    spherical: bool,
}

impl HamiltonianModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of parameters.
    pub fn m(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[HermitianMatrix] {
        &self.generators
    }

    /// `Σ_j X_j²`.
    pub fn big_x(&self) -> &HermitianMatrix {
        &self.big_x
    }

    /// Operator norm of `Σ_j X_j²`.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_spherical(&self) -> bool {
        self.spherical
    }

    /// `Σ_j θ_j X_j`.
    pub fn hamiltonian(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        if theta.len() != self.m() {
            return invalid(format!(
                "parameter vector has length {}, model has {} generators",
                theta.len(),
                self.m()
            ));
        }
        let mut h = CMat::zeros(self.d, self.d);
        for (x, &t) in self.generators.iter().zip(theta) {
            h += x.matrix().scale(t);
        }
        Ok(HermitianMatrix::from_hermitian_part(&h))
    }

    /// Upper bound `E·√c` on `‖H_θ‖` over the ball `‖θ‖ ≤ E`.
    pub fn max_energy(&self, radius: f64) -> f64 {
        radius * self.c.sqrt()
    }
}

/// Builds one of the built-in models, or validates `custom` generators.
pub fn make_model(
    kind: ModelKind,
    d: usize,
    custom: Option<Vec<HermitianMatrix>>,
) -> Result<HamiltonianModel> {
    if d < 2 {
        return invalid(format!("model dimension must be >= 2, got {d}"));
    }
    let generators = match kind {
        ModelKind::Full => crate::qcore::su_basis(d)?,
        ModelKind::Phase => phase_generators(d),
        ModelKind::OffDiag => offdiag_generators(d),
        ModelKind::Custom => {
            let gens = custom.ok_or_else(|| Error::Validation("custom model needs generators".into()))?;
            validate_custom(d, &gens)?;
            gens
        }
    };
    Ok(assemble(kind, d, generators))
}

fn assemble(kind: ModelKind, d: usize, generators: Vec<HermitianMatrix>) -> HamiltonianModel {
    let mut sq = CMat::zeros(d, d);
    for x in &generators {
        sq += x.matrix() * x.matrix();
    }
    let big_x = HermitianMatrix::from_hermitian_part(&sq);
    let c = big_x.op_norm();
    let m = generators.len() as f64;
    let shifted = big_x.matrix() - CMat::identity(d, d).scale(m / d as f64);
    let spherical = max_abs(&shifted) <= TOL.spherical;
    HamiltonianModel {
        kind,
        d,
        generators,
        big_x,
        c,
        spherical,
    }
}

/// Gram–Schmidt over the relative-phase patterns `|e_j⟩⟨e_j| - |e_d⟩⟨e_d|`.
fn phase_generators(d: usize) -> Vec<HermitianMatrix> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for j in 0..d - 1 {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        v[d - 1] = -1.0;
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= n);
        basis.push(v);
    }
    basis
        .iter()
        .map(|v| HermitianMatrix::from_real_diagonal(v))
        .collect()
}

fn offdiag_generators(d: usize) -> Vec<HermitianMatrix> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    (0..d - 1)
        .map(|j| {
            let mut a = CMat::zeros(d, d);
            a[(j, d - 1)] = s;
            a[(d - 1, j)] = s;
            HermitianMatrix::from_hermitian_part(&a)
        })
        .collect()
}

fn validate_custom(d: usize, gens: &[HermitianMatrix]) -> Result<()> {
    if gens.is_empty() {
        return invalid("custom model has no generators");
    }
    for (j, x) in gens.iter().enumerate() {
        if x.dim() != d {
            return invalid(format!("generator {j} has dimension {}, expected {d}", x.dim()));
        }
        if !x.is_traceless(1e-10) {
            return invalid(format!("generator {j} has trace {:.3e}", x.trace()));
        }
    }
    let mut bad = Vec::new();
    for (j, x) in gens.iter().enumerate() {
        for (k, y) in gens.iter().enumerate().skip(j) {
            let g = hs_inner(x.matrix(), y.matrix())?;
            let want = if j == k { 1.0 } else { 0.0 };
            if (g - C64::new(want, 0.0)).norm() > TOL.gram {
                bad.push(format!("G[{j},{k}] = {:.6}{:+.6}i", g.re, g.im));
            }
        }
    }
    if !bad.is_empty() {
        return invalid(format!("generators are not orthonormal: {}", bad.join("; ")));
    }
    Ok(())
}
