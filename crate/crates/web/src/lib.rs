//! WebAssembly bindings for the browser demo in `www/`. Every export takes
//! and returns plain strings or numbers; structured results are JSON.

pub mod api;

use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_error(e: sticky_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

/// Simulates a scenario JSON document; returns paths, events and the
/// variation summary.
#[wasm_bindgen]
pub fn simulate(scenario_json: &str) -> Result<String, JsError> {
    to_json(&api::simulate(scenario_json).map_err(js_error)?)
}

/// A seeded random scenario as JSON.
#[wasm_bindgen(js_name = randomScenario)]
pub fn random_scenario(n: u32, d: u32, seed: u32, horizon: f64) -> Result<String, JsError> {
    api::random_scenario(n as usize, d as usize, seed.into(), horizon).map_err(js_error)
}

/// Exact W1 between two `weight,point` CSV atom lists.
#[wasm_bindgen]
pub fn w1(mu_csv: &str, nu_csv: &str) -> Result<f64, JsError> {
    api::w1(mu_csv, nu_csv).map_err(js_error)
}

/// Runs a convergence study for a continuum recipe JSON document.
#[wasm_bindgen]
pub fn converge(recipe_json: &str, sizes: Vec<u32>, times: Vec<f64>) -> Result<String, JsError> {
    let sizes: Vec<usize> = sizes.into_iter().map(|n| n as usize).collect();
    to_json(&api::converge(recipe_json, &sizes, &times).map_err(js_error)?)
}
