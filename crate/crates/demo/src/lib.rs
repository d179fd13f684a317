//! Browser bindings: each export takes plain numbers and returns a JSON
//! string for the page to plot.

use hamest::estimate::{delta_resolution, Scheme};
use hamest::experiment::{run_sweep, ExperimentConfig};
use hamest::model::{make_model, ModelKind};
use hamest::probe::{growth_series, random_schedule, Schedule};
use hamest::random::{trial_rng, uniform_in_ball};
use serde_json::json;
use wasm_bindgen::prelude::*;

type Json = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `Tr J(t)` against `4ct²` along a schedule on the full model. `feedback`
/// controls whether random unitaries are interleaved; without it the probe is
/// the maximally entangled state under free evolution, which saturates.
pub fn growth_curve(d: usize, total_time: f64, points: usize, feedback: bool, seed: u64) -> Json {
    let model = make_model(ModelKind::Full, d, None).map_err(err)?;
    let mut rng = trial_rng(seed, 0);
    let (theta, schedule) = if feedback {
        let s = random_schedule(&mut rng, d, 1, d, 4, total_time).map_err(err)?;
        (uniform_in_ball(&mut rng, model.m(), 1.0), s)
    } else {
        (vec![0.0; model.m()], Schedule::single_interval(d, total_time).map_err(err)?)
    };
    let series = growth_series(&model, &theta, &schedule, points.max(2)).map_err(err)?;
    Ok(json!({
        "t": series.iter().map(|p| p.t).collect::<Vec<_>>(),
        "trace_j": series.iter().map(|p| p.trace_j).collect::<Vec<_>>(),
        "bound": series.iter().map(|p| p.bound).collect::<Vec<_>>(),
    })
    .to_string())
}

/// Sampled δ-resolution at `n` evenly spaced δ in `(0, E/2]`, with the
/// short-time prediction `τδ/√d`.
pub fn resolution_curve(d: usize, tau: f64, e: f64, n: usize, pairs: usize, seed: u64) -> Json {
    let model = make_model(ModelKind::Full, d, None).map_err(err)?;
    let mut rng = trial_rng(seed, 1);
    let n = n.max(2);
    let deltas: Vec<f64> = (1..=n).map(|k| 0.5 * e * k as f64 / n as f64).collect();
    let values = deltas
        .iter()
        .map(|&delta| delta_resolution(&model, tau, e, delta, pairs.max(1), &mut rng, None))
        .collect::<hamest::Result<Vec<_>>>()
        .map_err(err)?;
    let predicted: Vec<f64> = deltas.iter().map(|x| tau * x / (d as f64).sqrt()).collect();
    Ok(json!({ "delta": deltas, "resolution": values, "predicted": predicted }).to_string())
}

/// A small scaling sweep of one scheme on the full qubit model.
pub fn scaling_sweep(scheme: &str, deltas: &[f64], trials: usize, seed: u64) -> Json {
    let scheme: Scheme = scheme.parse().map_err(err)?;
    let cfg = ExperimentConfig {
        scheme,
        trials: trials.max(1),
        master_seed: seed,
        ..ExperimentConfig::default()
    };
    let result = run_sweep(&cfg, deltas, 1).map_err(err)?;
    serde_json::to_string(&result.summary).map_err(err)
}

#[wasm_bindgen(js_name = growthCurve)]
pub fn growth_curve_js(d: usize, total_time: f64, points: usize, feedback: bool, seed: u64) -> Result<String, JsError> {
    growth_curve(d, total_time, points, feedback, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = resolutionCurve)]
pub fn resolution_curve_js(d: usize, tau: f64, e: f64, n: usize, pairs: usize, seed: u64) -> Result<String, JsError> {
    resolution_curve(d, tau, e, n, pairs, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = scalingSweep)]
pub fn scaling_sweep_js(scheme: &str, deltas: Vec<f64>, trials: usize, seed: u64) -> Result<String, JsError> {
    scaling_sweep(scheme, &deltas, trials, seed).map_err(|e| JsError::new(&e))
}
