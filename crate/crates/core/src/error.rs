use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("eigenphase {phase:.3e} lies within {tolerance:.0e} of the branch cut at -pi")]
    BranchCut { phase: f64, tolerance: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("projection onto the postselection frame has probability {0:.3e}")]
    DegenerateProjection(f64),

    #[error("reference amplitude |c0| = {0:.3e} is too small for a stable inversion")]
    InversionUnstable(f64),

    #[error("postselection acceptance {0:.3e} fell below the starvation threshold")]
    Starvation(f64),

    #[error("Fisher information matrix is singular along {direction:?}")]
    SingularFisher { direction: Vec<f64> },

    #[error("audit failed at t = {time}: {detail}")]
    AuditFailure { time: f64, detail: String },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
