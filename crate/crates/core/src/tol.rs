//! Numerical tolerances shared by the library and its tests.

/// One place for every tolerance the library checks against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hermiticity of inputs (max-abs entry of `A - A†`).
    pub hermitian: f64,
    /// Tracelessness of generators.
    pub traceless: f64,
    /// Unitarity of evolution operators (max-abs entry of `U†U - I`).
    pub unitary: f64,
    /// Norm of pure states.
    pub norm: f64,
    /// Distance of an eigenphase from `-pi` below which the principal log is refused.
    pub branch_cut: f64,
    /// Gram matrix of model generators.
    pub gram: f64,
    /// Sphericity threshold on `max |X - (m/d) I|`.
    pub spherical: f64,
    /// Finite-difference step for tangent vectors.
    pub fd_step: f64,
    /// Relative slack on the `4 c t^2` bound.
    pub qfi_bound_slack: f64,
    /// Relative slack on the growth-rate increments of the audit grid.
    pub growth_slack: f64,
    /// Minimum projection probability accepted by `postselect`.
    pub min_projection: f64,
    /// Minimum `|c0|` accepted by the amplitude inversion.
    pub min_reference_amplitude: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermitian: 1e-12,
    traceless: 1e-12,
    unitary: 1e-10,
    norm: 1e-10,
    branch_cut: 1e-8,
    gram: 1e-8,
    spherical: 1e-8,
    fd_step: 1e-5,
    qfi_bound_slack: 1e-4,
    growth_slack: 1e-3,
    min_projection: 1e-12,
    min_reference_amplitude: 0.1,
};

/// Scale-aware hermiticity check: `tol` is applied relative to `max(1, max|A|)`.
pub(crate) fn rel(tol: f64, scale: f64) -> f64 {
    tol * scale.max(1.0)
}
