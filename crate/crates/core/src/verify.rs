//! Fixed-seed property suites behind `hamest verify`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::bounds::{biased_cr_rhs, qcr_chain, schwartz_chain, time_lower_bound};
use crate::error::{Error, Result};
use crate::estimate::{delta_resolution, reduce_operator, superop_s, Constants, PostselectionFrame, Scheme};
use crate::model::{make_model, ModelKind};
use crate::probe::{growth_audit, mes, operator_on_mes, qfi_matrix, random_audit_case, Schedule, Step};
use crate::qcore::{hermitian_expm, max_abs, trace, HermitianMatrix, PureState};
use crate::random::{ginibre, random_hermitian, random_traceless, trial_rng, uniform_in_ball};
use crate::symsub::{
    brute_force_trace_moments, collective, collective_trace_moments, collective_via_isometry,
    restricted_tensor_power, sym_space, SymSpace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Qfi,
    Collective,
    Resolution,
    Bounds,
}

impl Suite {
    pub const NAMES: [&'static str; 5] = ["all", "qfi", "collective", "resolution", "bounds"];

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Qfi => "qfi",
            Suite::Collective => "collective",
            Suite::Resolution => "resolution",
            Suite::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Suite::All, Suite::Qfi, Suite::Collective, Suite::Resolution, Suite::Bounds]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown suite '{s}'; valid suites: {}", Suite::NAMES.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

struct Checks {
    suite: &'static str,
    out: Vec<Check>,
}

impl Checks {
    fn new(suite: &'static str) -> Self {
        Self { suite, out: Vec::new() }
    }

    /// Records `body`'s verdict; errors count as failures.
    fn run(&mut self, name: &'static str, body: impl FnOnce() -> Result<(bool, String)>) {
        let (passed, detail) = body().unwrap_or_else(|e| (false, format!("error: {e}")));
        self.out.push(Check {
            suite: self.suite,
            name,
            passed,
            detail,
        });
    }
}

/// Runs a suite and returns one result per property.
pub fn run_suite(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::All => [Suite::Qfi, Suite::Collective, Suite::Resolution, Suite::Bounds]
            .into_iter()
            .flat_map(run_suite)
            .collect(),
        Suite::Qfi => qfi_suite(),
        Suite::Collective => collective_suite(),
        Suite::Resolution => resolution_suite(),
        Suite::Bounds => bounds_suite(),
    }
}

fn qfi_suite() -> Vec<Check> {
    let mut c = Checks::new("qfi");
    c.run("mes saturation", || {
        let mut worst: f64 = 0.0;
        for d in [2, 3] {
            let model = make_model(ModelKind::Full, d, None)?;
            for tau in [0.5, 1.0] {
                let rep = qfi_matrix(&model, &vec![0.0; model.m()], &Schedule::single_interval(d, tau)?)?;
                let want = DMatrix::<f64>::identity(model.m(), model.m()) * (4.0 / d as f64 * tau * tau);
                worst = worst.max((rep.j - want).amax());
            }
        }
        Ok((worst <= 1e-6, format!("max |J - (4/d)tau^2 I| = {worst:.2e}")))
    });
    c.run("growth bound audit", || {
        let mut rng = trial_rng(2024, 0);
        let mut violations = 0;
        for k in 0..100 {
            let d = 2 + k % 2;
            let model = make_model(ModelKind::Full, d, None)?;
            let r = 1 + (k / 2) % 2;
            let (theta, sched) = random_audit_case(&mut rng, &model, r, 3.0 / r as f64, 1.5)?;
            if growth_audit(&model, &theta, &sched, 5).is_err() {
                violations += 1;
            }
        }
        Ok((violations == 0, format!("{violations} violations in 100 schedules")))
    });
    c.run("offdiag saturation", || {
        let model = make_model(ModelKind::OffDiag, 3, None)?;
        let tau = 0.8;
        let start = PureState::basis(vec![3, 1], 2)?;
        let sched = Schedule::new(3, 1, start, vec![Step::free(tau)])?;
        let rep = qfi_matrix(&model, &[0.0, 0.0], &sched)?;
        let gap = (rep.trace_j - rep.bound_4ct2).abs() / rep.bound_4ct2;
        Ok((gap <= 1e-4, format!("Tr J / 4ct^2 - 1 = {gap:.2e}")))
    });
    c.run("schwartz chain", || {
        let mut rng = trial_rng(2025, 0);
        let mut worst = f64::INFINITY;
        for d in [2, 3] {
            let model = make_model(ModelKind::Full, d, None)?;
            for _ in 0..10 {
                let theta = uniform_in_ball(&mut rng, model.m(), 1.0);
                let rep = qfi_matrix(&model, &theta, &Schedule::single_interval(d, 0.7)?)?;
                let (lhs, m2) = schwartz_chain(&rep.j)?;
                worst = worst.min(lhs / m2 - 1.0);
            }
        }
        Ok((worst >= -1e-8, format!("min Tr[J^-1]Tr[J]/m^2 - 1 = {worst:.2e}")))
    });
    c.out
}

fn collective_suite() -> Vec<Check> {
    let mut c = Checks::new("collective");
    c.run("trace moments", || {
        let mut rng = trial_rng(2026, 0);
        let mut worst: f64 = 0.0;
        for d in [2, 3] {
            for r in 1..=4 {
                let space = sym_space(d, r)?;
                for _ in 0..20 {
                    let x = random_traceless(&mut rng, d);
                    for t in [collective_trace_moments(&space, &x)?, brute_force_trace_moments(&space, &x)?] {
                        worst = worst
                            .max((t.m2_actual - t.m2_predicted).abs())
                            .max((t.m4_actual - t.m4_predicted).abs());
                    }
                }
            }
        }
        Ok((worst <= 1e-9, format!("max moment deviation {worst:.2e}")))
    });
    c.run("worked values", || {
        let space = sym_space(2, 2)?;
        let z = HermitianMatrix::from_real_diagonal(&[
            std::f64::consts::FRAC_1_SQRT_2,
            -std::f64::consts::FRAC_1_SQRT_2,
        ]);
        let t = brute_force_trace_moments(&space, &z)?;
        let ok = (t.m2_actual - 4.0 / 3.0).abs() < 1e-12 && (t.m4_actual - 8.0 / 3.0).abs() < 1e-12;
        Ok((ok, format!("moments {:.12}, {:.12}", t.m2_actual, t.m4_actual)))
    });
    c.run("restriction identity", || {
        let mut rng = trial_rng(2027, 0);
        let mut worst: f64 = 0.0;
        for d in [2, 3] {
            for r in 1..=4 {
                let space = sym_space(d, r)?;
                let h = random_hermitian(&mut rng, d);
                let u = hermitian_expm(&h, 0.7);
                let lhs = restricted_tensor_power(&space, &u)?;
                let rhs = hermitian_expm(&collective(&space, &h)?, 0.7);
                worst = worst.max(max_abs(&(lhs - rhs.matrix())));
            }
        }
        Ok((worst <= 1e-9, format!("max entry deviation {worst:.2e}")))
    });
    c.run("ladder matches isometry", || {
        let mut rng = trial_rng(2028, 0);
        let mut worst: f64 = 0.0;
        for d in [2, 3] {
            for r in 1..=4 {
                let space = sym_space(d, r)?;
                let a = random_hermitian(&mut rng, d);
                let lhs = collective(&space, &a)?;
                let rhs = collective_via_isometry(&space, &a)?;
                worst = worst.max(max_abs(&(lhs.matrix() - rhs.matrix())));
            }
        }
        Ok((worst <= 1e-10, format!("max entry deviation {worst:.2e}")))
    });
    c.out
}

fn resolution_suite() -> Vec<Check> {
    let mut c = Checks::new("resolution");
    c.run("phase closed form", || {
        let model = make_model(ModelKind::Phase, 2, None)?;
        let mut rng = trial_rng(2029, 0);
        let v = delta_resolution(&model, 0.5, 1.0, 0.2, 200, &mut rng, None)?;
        let want = (0.5 * 0.2 / 2f64.sqrt()).sin();
        Ok(((v - want).abs() <= 1e-8, format!("|I - sin(tau delta/sqrt2)| = {:.2e}", (v - want).abs())))
    });
    c.run("normalized resolution", || {
        let mut rng = trial_rng(2030, 0);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for d in [2, 3, 4] {
            let model = make_model(ModelKind::Full, d, None)?;
            for tau in [0.2, 0.5] {
                for delta in [0.05, 0.2] {
                    let v = delta_resolution(&model, tau, 1.0, delta, 200, &mut rng, None)?;
                    let ratio = v * v * d as f64 / (tau * tau * delta * delta);
                    lo = lo.min(ratio);
                    hi = hi.max(ratio);
                }
            }
        }
        Ok(((0.5..=4.0).contains(&lo) && (0.5..=4.0).contains(&hi), format!("ratio range [{lo:.3}, {hi:.3}]")))
    });
    c.run("frame orthonormality", || {
        let mut worst: f64 = 0.0;
        for kind in [ModelKind::Full, ModelKind::Phase, ModelKind::OffDiag] {
            for d in [2, 3] {
                let model = make_model(kind, d, None)?;
                worst = worst.max(PostselectionFrame::one_channel(&model)?.gram_defect());
                for r in 1..=4 {
                    let space = SymSpace::occupation(d, r)?;
                    worst = worst.max(PostselectionFrame::collective(&model, &space)?.gram_defect());
                }
            }
        }
        Ok((worst <= 1e-9, format!("max Gram defect {worst:.2e}")))
    });
    c.run("superoperator identity", || {
        let mut rng = trial_rng(2031, 0);
        let mut worst: f64 = 0.0;
        for kind in [ModelKind::Full, ModelKind::Phase, ModelKind::OffDiag] {
            for d in [2, 3, 4] {
                let model = make_model(kind, d, None)?;
                let frame = PostselectionFrame::one_channel(&model)?;
                let a = ginibre(&mut rng, d);
                let lhs = frame.project(&operator_on_mes(&a));
                let rhs = operator_on_mes(&superop_s(&model, &a)?);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        Ok((worst <= 1e-10, format!("max |P A|Phi> - S(A)|Phi>| = {worst:.2e}")))
    });
    c.run("mes trace identity", || {
        let mut rng = trial_rng(2032, 0);
        let mut worst: f64 = 0.0;
        for d in 2..=5 {
            let phi = mes(d)?;
            let a = ginibre(&mut rng, d);
            let lhs = phi.amplitudes().dotc(&operator_on_mes(&a));
            let rhs = trace(&a) / d as f64;
            worst = worst.max((lhs - rhs).norm());
        }
        Ok((worst <= 1e-12, format!("max |<Phi|A|Phi> - Tr A/d| = {worst:.2e}")))
    });
    c.run("reproducibility", || {
        let model = make_model(ModelKind::Full, 2, None)?;
        let constants = Constants::default();
        let theta = [0.3, -0.4, 0.2];
        let mut same = true;
        for scheme in Scheme::ALL {
            let a = scheme.run(&model, &theta, 0.2, 1.0, &constants, 99)?;
            let b = scheme.run(&model, &theta, 0.2, 1.0, &constants, 99)?;
            same &= a == b;
        }
        Ok((same, "identical records for identical seeds".into()))
    });
    c.run("reduced probe normalization", || {
        let model = make_model(ModelKind::Full, 3, None)?;
        let frame = PostselectionFrame::one_channel(&model)?;
        let mut rng = trial_rng(2033, 0);
        let theta = uniform_in_ball(&mut rng, model.m(), 1.0);
        let u = hermitian_expm(&model.hamiltonian(&theta)?, 0.2);
        let (red, p) = reduce_operator(&frame, u.matrix())?;
        let ok = (red.amplitudes().norm() - 1.0).abs() < 1e-12 && p > 0.9 && p <= 1.0;
        Ok((ok, format!("acceptance {p:.6}")))
    });
    c.out
}

fn bounds_suite() -> Vec<Check> {
    let mut c = Checks::new("bounds");
    c.run("qcr chain value", || {
        let v = qcr_chain(3, 2, 0.1, 1.0, 1.0).tr_v_lower;
        Ok(((v - 1.5).abs() < 1e-15, format!("Tr V lower = {v}")))
    });
    c.run("time lower value", || {
        let v = time_lower_bound(3, 2, 0.1);
        Ok(((v - 12.247448713915889).abs() < 1e-9, format!("T lower = {v:.6}")))
    });
    c.run("homogeneity", || {
        let ok = (time_lower_bound(6, 3, 0.05) / time_lower_bound(6, 3, 0.1) - 2.0).abs() < 1e-12;
        Ok((ok, "T lower doubles when delta halves".into()))
    });
    c.run("unbiased reduction", || {
        let j = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let r = biased_cr_rhs(&j, &DMatrix::zeros(2, 2), 5.0)?;
        let want = j.clone().try_inverse().map(|i| i.trace() / 5.0).unwrap_or(f64::NAN);
        Ok(((r.matrix_bound_trace - want).abs() < 1e-14, format!("{} vs {want}", r.matrix_bound_trace)))
    });
    c.run("scalar below matrix bound", || {
        let mut rng = trial_rng(2034, 0);
        let mut ok = true;
        for n in 1..5 {
            for _ in 0..20 {
                let a = DMatrix::<f64>::from_fn(n, n, |_, _| random_normal(&mut rng));
                let j = &a * a.transpose() + DMatrix::identity(n, n) * 0.05;
                let d = DMatrix::<f64>::from_fn(n, n, |_, _| random_normal(&mut rng));
                let r = biased_cr_rhs(&j, &d, 2.0)?;
                ok &= r.scalar_bound <= r.matrix_bound_trace * (1.0 + 1e-10);
                let (lhs, m2) = schwartz_chain(&j)?;
                ok &= lhs >= m2 * (1.0 - 1e-8);
            }
        }
        Ok((ok, "80 random PSD cases".into()))
    });
    c.out
}

fn random_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}
