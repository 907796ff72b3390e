//! WebAssembly entry points for the demo page. Every export takes and returns
//! JSON strings; the plain functions in [`demo`] do the work and are what the
//! native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo;

pub use demo::{breakdown, compare, curve, DemoParams};

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Mean latency and likability per policy for the given slider settings.
#[wasm_bindgen]
pub fn compare_policies(params_json: &str) -> Result<String, JsValue> {
    to_js(demo::parse(params_json).and_then(|p| compare(&p)))
}

/// Per-user split, integrator and latency terms of the proposed schedule on one draw.
#[wasm_bindgen]
pub fn proposed_allocation(params_json: &str, run: usize) -> Result<String, JsValue> {
    to_js(demo::parse(params_json).and_then(|p| breakdown(&p, run)))
}

/// Sampled latency to resemblance to likability curve.
#[wasm_bindgen]
pub fn likability_curve(l_ref_ms: f64, points: usize) -> Result<String, JsValue> {
    to_js(curve(l_ref_ms, points))
}
