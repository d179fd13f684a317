//! Seeded batch experiments: configuration, trial execution, summaries and
//! scaling sweeps.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Constants, EstimationRecord, Scheme};
use crate::model::{make_model, HamiltonianModel, ModelKind};
use crate::random::{trial_rng, trial_seed, uniform_in_ball, unit_vector};

/// Largest admissible `δ/E`.
pub const MAX_DELTA_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub d: usize,
    pub scheme: Scheme,
    pub delta: f64,
    pub e: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub constants: Constants,
    /// Sample `θ` just inside the sphere `‖θ‖ = E` instead of uniformly in the ball.
    pub worst_case_grid: bool,
    pub delta_list: Option<Vec<f64>>,
    pub csv_out: Option<PathBuf>,
    pub json_out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Full,
            d: 2,
            scheme: Scheme::Adaptive,
            delta: 0.1,
            e: 1.0,
            trials: 100,
            master_seed: 1,
            constants: Constants::default(),
            worst_case_grid: false,
            delta_list: None,
            csv_out: None,
            json_out: None,
        }
    }
}

fn cfg_err<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(Error::Config(format!("line {line}: {msg}")))
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .or_else(|e| cfg_err(line, format!("bad value '{v}' for {key}: {e}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => cfg_err(line, format!("bad boolean '{v}' for {key}")),
    }
}

/// Parses a comma-separated list of positive reals.
pub fn parse_delta_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad delta '{t}': {e}")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return cfg_err(line, format!("expected key = value, got '{content}'"));
            };
            let (key, value) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return cfg_err(line, format!("duplicate key '{key}' (first on line {prev})"));
            }
            let c = &mut cfg.constants;
            match key {
                "model" => {
                    cfg.model = value.parse().map_err(|e: Error| Error::Config(format!("line {line}: {e}")))?
                }
                "d" => cfg.d = parse_num(line, key, value)?,
                "scheme" => cfg.scheme = value.parse()?,
                "delta" => cfg.delta = parse_num(line, key, value)?,
                "E" | "e" => cfg.e = parse_num(line, key, value)?,
                "trials" => cfg.trials = parse_num(line, key, value)?,
                "seed" | "master_seed" => cfg.master_seed = parse_num(line, key, value)?,
                "kappa" => c.kappa = parse_num(line, key, value)?,
                "alpha" => c.alpha = parse_num(line, key, value)?,
                "beta" => c.beta = parse_num(line, key, value)?,
                "p_crit" => c.p_crit = parse_num(line, key, value)?,
                "r_max" => c.r_max = Some(parse_num(line, key, value)?),
                "refine" => c.refine = parse_bool(line, key, value)?,
                "trotter" => c.trotter = parse_bool(line, key, value)?,
                "worst_case_grid" => cfg.worst_case_grid = parse_bool(line, key, value)?,
                "delta_list" => cfg.delta_list = Some(parse_delta_list(value)?),
                "csv" | "csv_out" => cfg.csv_out = Some(PathBuf::from(value)),
                "json" | "json_out" => cfg.json_out = Some(PathBuf::from(value)),
                _ => return cfg_err(line, format!("unknown key '{key}'")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == ModelKind::Custom {
            return Err(Error::Config(
                "custom models take generator matrices and are only available through the library".into(),
            ));
        }
        if self.d < 2 {
            return Err(Error::Config(format!("d must be at least 2, got {}", self.d)));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        check_ratio(self.delta, self.e)?;
        if let Some(list) = &self.delta_list {
            for &d in list {
                check_ratio(d, self.e)?;
            }
        }
        self.constants.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build_model(&self) -> Result<HamiltonianModel> {
        make_model(self.model, self.d, None)
    }
}

fn check_ratio(delta: f64, e: f64) -> Result<()> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::Config(format!("E must be positive, got {e}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    if delta / e > MAX_DELTA_RATIO * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "delta/E = {} exceeds {MAX_DELTA_RATIO}",
            delta / e
        )));
    }
    Ok(())
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub scheme: String,
    pub d: usize,
    pub m: usize,
    pub delta: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub theta_err: f64,
    pub total_time: f64,
    pub success: bool,
    pub stages: String,
}

/// Outcome of one trial; procedure errors are kept per trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    pub record: std::result::Result<EstimationRecord, String>,
}

impl TrialOutcome {
    pub fn row(&self, cfg: &ExperimentConfig, delta: f64, m: usize) -> TrialRow {
        let (theta_err, total_time, success, stages) = match &self.record {
            Ok(r) => (r.error, r.total_time, r.success, r.stage_summary()),
            Err(msg) => (f64::NAN, f64::NAN, false, format!("error: {}", msg.replace(',', ";"))),
        };
        TrialRow {
            trial: self.index,
            seed: self.seed,
            scheme: cfg.scheme.name().to_string(),
            d: cfg.d,
            m,
            delta,
            e: cfg.e,
            theta_err,
            total_time,
            success,
            stages,
        }
    }
}

/// True parameter for trial `index`.
pub fn sample_theta(cfg: &ExperimentConfig, m: usize, index: usize) -> Vec<f64> {
    let mut rng = trial_rng(cfg.master_seed, index as u64);
    if cfg.worst_case_grid {
        let r = cfg.e * (1.0 - 1e-9);
        unit_vector(&mut rng, m).into_iter().map(|x| r * x).collect()
    } else {
        uniform_in_ball(&mut rng, m, cfg.e)
    }
}

fn run_trial(cfg: &ExperimentConfig, model: &HamiltonianModel, delta: f64, index: usize) -> TrialOutcome {
    let seed = trial_seed(cfg.master_seed, index as u64);
    let theta = sample_theta(cfg, model.m(), index);
    let record = cfg
        .scheme
        .run(model, &theta, delta, cfg.e, &cfg.constants, seed)
        .map_err(|e| e.to_string());
    TrialOutcome { index, seed, record }
}

/// Runs all trials at `delta` on up to `jobs` worker threads (0 = all cores).
/// Outcomes are returned in trial order and do not depend on `jobs`.
pub fn run_trials(cfg: &ExperimentConfig, delta: f64, jobs: usize) -> Result<Vec<TrialOutcome>> {
    let model = cfg.build_model()?;
    let indices: Vec<usize> = (0..cfg.trials).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(|| {
            indices
                .par_iter()
                .map(|&i| run_trial(cfg, &model, delta, i))
                .collect()
        }))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok(indices.iter().map(|&i| run_trial(cfg, &model, delta, i)).collect())
    }
}

/// Quantile by linear interpolation between order statistics; `None` for no data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scheme: String,
    pub delta: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub trials: usize,
    /// Trials that ended with a procedure error (counted as failures).
    pub errors: usize,
    pub success_rate: f64,
    #[serde(rename = "median_T")]
    pub median_t: Option<f64>,
    #[serde(rename = "q1_T")]
    pub q1_t: Option<f64>,
    #[serde(rename = "q3_T")]
    pub q3_t: Option<f64>,
}

pub fn summarize(cfg: &ExperimentConfig, delta: f64, outcomes: &[TrialOutcome]) -> RunSummary {
    let mut times: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.record.as_ref().ok().map(|r| r.total_time))
        .collect();
    times.sort_by(f64::total_cmp);
    let successes = outcomes
        .iter()
        .filter(|o| o.record.as_ref().map(|r| r.success).unwrap_or(false))
        .count();
    RunSummary {
        scheme: cfg.scheme.name().to_string(),
        delta,
        e: cfg.e,
        trials: outcomes.len(),
        errors: outcomes.iter().filter(|o| o.record.is_err()).count(),
        success_rate: successes as f64 / outcomes.len().max(1) as f64,
        median_t: quantile(&times, 0.5),
        q1_t: quantile(&times, 0.25),
        q3_t: quantile(&times, 0.75),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

/// Least-squares fit of `ln y = intercept + slope·ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Validation("log-log fit needs at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Validation("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Validation("log-log fit needs distinct x values".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals = lx.iter().zip(&ly).map(|(a, b)| b - (intercept + slope * a)).collect();
    Ok(LogLogFit {
        slope,
        intercept,
        residuals,
    })
}

/// Checks a sweep's δ list: at least three values, strictly decreasing, each
/// within the admissible ratio.
pub fn validate_delta_list(list: &[f64], e: f64) -> Result<()> {
    if list.len() < 3 {
        return Err(Error::Config(format!("a sweep needs at least 3 delta values, got {}", list.len())));
    }
    for w in list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Config(format!(
                "delta values must be strictly decreasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    list.iter().try_for_each(|&d| check_ratio(d, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub scheme: String,
    pub delta: Vec<f64>,
    pub success_rate: Vec<f64>,
    #[serde(rename = "median_T")]
    pub median_t: Vec<f64>,
    #[serde(rename = "q1_T")]
    pub q1_t: Vec<f64>,
    #[serde(rename = "q3_T")]
    pub q3_t: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

pub struct SweepResult {
    pub points: Vec<(RunSummary, Vec<TrialOutcome>)>,
    pub summary: SweepSummary,
}

/// Runs the configured trials at every δ and fits `ln median T` against `ln δ`.
pub fn run_sweep(cfg: &ExperimentConfig, deltas: &[f64], jobs: usize) -> Result<SweepResult> {
    validate_delta_list(deltas, cfg.e)?;
    let mut points = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let outcomes = run_trials(cfg, delta, jobs)?;
        points.push((summarize(cfg, delta, &outcomes), outcomes));
    }
    let medians: Vec<f64> = points
        .iter()
        .map(|(s, _)| s.median_t.unwrap_or(f64::NAN))
        .collect();
    let fit = loglog_fit(deltas, &medians)?;
    let pick = |f: fn(&RunSummary) -> f64| points.iter().map(|(s, _)| f(s)).collect::<Vec<_>>();
    let summary = SweepSummary {
        scheme: cfg.scheme.name().to_string(),
        delta: deltas.to_vec(),
        success_rate: pick(|s| s.success_rate),
        median_t: medians,
        q1_t: pick(|s| s.q1_t.unwrap_or(f64::NAN)),
        q3_t: pick(|s| s.q3_t.unwrap_or(f64::NAN)),
        slope: fit.slope,
        intercept: fit.intercept,
        residuals: fit.residuals,
    };
    Ok(SweepResult { points, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# adaptive example
model = full
d = 2
scheme = adaptive
delta = 0.1
E = 1
trials = 4
seed = 9
alpha = 48   # override
refine = false
";

    #[test]
    fn parses_key_values() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.scheme, Scheme::Adaptive);
        assert_eq!(cfg.trials, 4);
        assert_eq!(cfg.master_seed, 9);
        assert_eq!(cfg.constants.alpha, 48.0);
        assert!(!cfg.constants.refine);
    }

    #[test]
    fn rejects_bad_configs() {
        let err = ExperimentConfig::parse("scheme = bayes\n").unwrap_err().to_string();
        assert!(err.contains("one_channel, adaptive, many_channel"));
        assert!(ExperimentConfig::parse("delta = 0.5\nE = 1\n").is_err());
        assert!(ExperimentConfig::parse("trials = 0\n").is_err());
        assert!(ExperimentConfig::parse("colour = blue\n").is_err());
        assert!(ExperimentConfig::parse("d = 2\nd = 3\n").is_err());
        assert!(ExperimentConfig::parse("model = custom\n").is_err());
        assert!(ExperimentConfig::parse("just text\n").is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn fit_recovers_power_law() {
        let x = [0.2, 0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let fit = loglog_fit(&x, &y).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn delta_list_checks() {
        assert!(validate_delta_list(&[0.2, 0.1, 0.05], 1.0).is_ok());
        assert!(validate_delta_list(&[0.2, 0.1], 1.0).is_err());
        assert!(validate_delta_list(&[0.2, 0.1, 0.1], 1.0).is_err());
        assert!(validate_delta_list(&[0.5, 0.1, 0.05], 1.0).is_err());
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        let a = run_trials(&cfg, 0.1, 1).unwrap();
        let b = run_trials(&cfg, 0.1, 3).unwrap();
        assert_eq!(a, b);
        let rows: Vec<_> = a.iter().map(|o| o.row(&cfg, 0.1, 3)).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.total_time > 0.0));
    }
}
