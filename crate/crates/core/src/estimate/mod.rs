//! End-to-end estimation: postselection, tomography, inversion and the three
//! staging schemes.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HamiltonianModel;
use crate::random::TrialRng;

pub mod frame;
pub mod inversion;
pub mod resolution;
pub mod schemes;
pub mod tomography;

pub use frame::{postselect, reduce, reduce_operator, superop_s, Postselection, PostselectionFrame};
pub use inversion::{invert_theta, refine_theta};
pub use resolution::delta_resolution;
pub use schemes::{run_adaptive, run_many_channel, run_one_channel};
pub use tomography::{tomography, Tomographer};

/// Tunable constants of the estimation procedures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Evolution time per copy in units of `1/(E'·√c)`.
    pub kappa: f64,
    /// Copy-count prefactor.
    pub alpha: f64,
    /// Per-stage growth of the copy count (failure budget shrinks as `p_crit/2ⁿ`).
    pub beta: f64,
    /// Target overall failure probability.
    pub p_crit: f64,
    /// Channel cap for the many-channel scheme; `None` means `2048/d`.
    pub r_max: Option<usize>,
    /// Gauss–Newton refinement of each inversion against the exact probe family.
    pub refine: bool,
    /// Apply the adaptive feedback through Strang splitting instead of exactly.
    pub trotter: bool,
    /// Splitting error budget per interval in Trotter mode.
    pub trotter_tol: f64,
    /// Postselection acceptance below which a stage is abandoned.
    pub starvation: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            kappa: 0.3,
            alpha: 64.0,
            beta: 1.0,
            p_crit: 0.05,
            r_max: None,
            refine: true,
            trotter: false,
            trotter_tol: 1e-6,
            starvation: 0.01,
        }
    }
}

impl Constants {
    pub fn r_max_for(&self, d: usize) -> usize {
        self.r_max.unwrap_or((2048 / d).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("alpha", self.alpha),
            ("trotter_tol", self.trotter_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Validation(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.p_crit > 0.0 && self.p_crit < 1.0) {
            return Err(Error::Validation(format!("p_crit must lie in (0, 1), got {}", self.p_crit)));
        }
        if !(0.0..1.0).contains(&self.starvation) {
            return Err(Error::Validation(format!(
                "starvation threshold must lie in [0, 1), got {}",
                self.starvation
            )));
        }
        if self.r_max == Some(0) {
            return Err(Error::Validation("r_max must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneChannel,
    Adaptive,
    ManyChannel,
}

impl Scheme {
    pub const NAMES: [&'static str; 3] = ["one_channel", "adaptive", "many_channel"];
    pub const ALL: [Scheme; 3] = [Scheme::OneChannel, Scheme::Adaptive, Scheme::ManyChannel];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OneChannel => "one_channel",
            Scheme::Adaptive => "adaptive",
            Scheme::ManyChannel => "many_channel",
        }
    }

    /// Runs one trial with a generator seeded from `seed`; the record carries
    /// the seed so that the trial can be replayed on its own.
    pub fn run(
        self,
        model: &HamiltonianModel,
        theta_true: &[f64],
        delta: f64,
        e: f64,
        constants: &Constants,
        seed: u64,
    ) -> Result<EstimationRecord> {
        let mut rng = TrialRng::seed_from_u64(seed);
        let mut rec = match self {
            Scheme::OneChannel => run_one_channel(model, theta_true, delta, e, constants, &mut rng),
            Scheme::Adaptive => run_adaptive(model, theta_true, delta, e, constants, &mut rng),
            Scheme::ManyChannel => run_many_channel(model, theta_true, delta, e, constants, &mut rng),
        }?;
        rec.seed = seed;
        Ok(rec)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown scheme '{s}'; valid schemes: {}",
                    Scheme::NAMES.join(", ")
                ))
            })
    }
}

/// One postselection + tomography round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Stage index; the estimate after stage `n` is within `2^{n-1}δ` when it succeeds.
    pub n: u32,
    pub tau: f64,
    /// Channels used per copy.
    pub r: usize,
    /// Accepted copies fed to tomography.
    pub copies: usize,
    /// Copies prepared, accepted or not.
    pub prepared: usize,
    pub postselect_success_rate: f64,
    /// Estimation error entering the stage.
    pub error_before: f64,
    /// Estimation error after the stage.
    pub error_after: f64,
    /// Why the stage was abandoned, if it was.
    pub failure: Option<String>,
}

impl StageRecord {
    pub fn time(&self) -> f64 {
        self.prepared as f64 * self.r as f64 * self.tau
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub scheme: Scheme,
    pub theta_true: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub error: f64,
    pub delta: f64,
    pub stages: Vec<StageRecord>,
    pub total_time: f64,
    pub success: bool,
    pub seed: u64,
}

impl EstimationRecord {
    /// Compact stage summary `n:r:tau:copies:prepared` joined by `|`.
    pub fn stage_summary(&self) -> String {
        self.stages
            .iter()
            .map(|s| format!("{}:{}:{:.6e}:{}:{}", s.n, s.r, s.tau, s.copies, s.prepared))
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        let err = "bayes".parse::<Scheme>().unwrap_err().to_string();
        for n in Scheme::NAMES {
            assert!(err.contains(n));
        }
    }

    #[test]
    fn default_constants_validate() {
        let c = Constants::default();
        c.validate().unwrap();
        assert_eq!(c.r_max_for(2), 1024);
        assert!(Constants { p_crit: 1.5, ..c }.validate().is_err());
        assert!(Constants { kappa: 0.0, ..c }.validate().is_err());
        assert!(Constants { r_max: Some(0), ..c }.validate().is_err());
    }
}
