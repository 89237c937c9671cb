//! Browser bindings: each export returns a JSON string for `www/index.html`.

use elimfdr::confidence::{conf_pair, conf_single, BoundConfig};
use elimfdr::elim::run_classify;
use elimfdr::family::PolicyFamily;
use elimfdr::fdrctl::run_fdr;
use elimfdr::harness::{gen_beta_band, gen_tsybakov};
use elimfdr::instance::{Instance, NoiseMode};
use elimfdr::sampling::stream_rng;
use elimfdr::trace::{EngineOptions, TrialResult};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn options() -> EngineOptions {
    EngineOptions {
        record_regions: true,
        ..EngineOptions::default()
    }
}

fn mode_of(persistent: bool) -> NoiseMode {
    if persistent {
        NoiseMode::Persistent
    } else {
        NoiseMode::Stochastic
    }
}

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn result_json(instance: &Instance, r: &TrialResult) -> serde_json::Value {
    json!({
        "eta": instance.eta(),
        "truth": instance.truth(),
        "outcome": r.outcome,
        "labels": r.labels_used,
        "draws": r.draws,
        "cap_hit": r.cap_hit,
        "trace": r.trace,
        "regions": r.regions,
    })
}

/// Action elimination over thresholds on a Tsybakov instance.
#[wasm_bindgen]
pub fn classify_trace(
    n: usize,
    h: f64,
    noise_exponent: f64,
    z: f64,
    delta: f64,
    persistent: bool,
    seed: u64,
) -> Result<String, JsValue> {
    let mut instance = gen_tsybakov(n, h, noise_exponent, z).map_err(err)?;
    if persistent {
        instance = Instance::realize_persistent(instance.eta().to_vec(), &mut stream_rng(seed, 7)).map_err(err)?;
    }
    let family = PolicyFamily::thresholds(n).map_err(err)?;
    let bound = BoundConfig::general(instance.mode(), n);
    let r = run_classify(&instance, &family, delta, &bound, &options(), seed).map_err(err)?;
    Ok(result_json(&instance, &r).to_string())
}

/// Active FDR control over thresholds on a β-band instance.
#[wasm_bindgen]
pub fn fdr_trace(n: usize, beta: f64, band_end: usize, alpha: f64, delta: f64, seed: u64) -> Result<String, JsValue> {
    let instance = gen_beta_band(n, beta, band_end, seed).map_err(err)?;
    let family = PolicyFamily::thresholds(n).map_err(err)?;
    let bound = BoundConfig::general(NoiseMode::Persistent, n);
    let r = run_fdr(&instance, &family, alpha, delta, &bound, &options(), seed).map_err(err)?;
    Ok(result_json(&instance, &r).to_string())
}

/// Single and pairwise radii on the averaged scale for `t = 1..=t_max`.
#[wasm_bindgen]
pub fn radius_curve(
    n: usize,
    size: usize,
    weight: f64,
    delta: f64,
    persistent: bool,
    t_max: u64,
) -> Result<String, JsValue> {
    let cfg = BoundConfig::general(mode_of(persistent), n);
    let t_max = if persistent { t_max.min(n as u64) } else { t_max };
    let mut points = Vec::new();
    for t in 1..=t_max {
        let single = conf_single(size, weight, t, delta, &cfg).map_err(err)? / size as f64;
        let pair = conf_pair(size, weight, t, delta, &cfg).map_err(err)? / size as f64;
        points.push(json!([t, single, pair]));
    }
    Ok(json!({ "points": points }).to_string())
}
