//! Browser bindings: closed-form quantities of a configuration, one coloured
//! limit tree, and one coloured neighbourhood of a freshly generated graph.
//! Every call takes the same JSON config the command-line tool reads and
//! returns JSON.

use fpp_local::cli::{ExperimentConfig, Prepared};
use fpp_local::experiments::{limit_records, neighbourhood_records};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn prepare(config_json: &str) -> Result<Prepared, String> {
    ExperimentConfig::from_json(config_json)
        .and_then(|c| c.prepare())
        .map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn derive_json(config_json: &str) -> Result<String, String> {
    to_json(&prepare(config_json)?.derived)
}

pub fn limit_tree_json(config_json: &str, radius: u32, seed: u64) -> Result<String, String> {
    let p = prepare(config_json)?;
    let mut records = limit_records(&p.limit_sampler(), radius, 1, seed, 1, &p.code_options())
        .map_err(|e| e.to_string())?;
    to_json(&records.pop())
}

pub fn neighbourhood_json(config_json: &str, n: usize, radius: u32, seed: u64) -> Result<String, String> {
    let p = prepare(config_json)?;
    let mut records = neighbourhood_records(
        n,
        0,
        &p.degree,
        &p.config.weight,
        radius,
        1,
        1,
        seed,
        1,
        &p.code_options(),
    )
    .map_err(|e| e.to_string())?;
    to_json(&records.pop())
}

#[wasm_bindgen]
pub fn derive(config_json: &str) -> Result<String, JsError> {
    derive_json(config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_limit_tree(config_json: &str, radius: u32, seed: u64) -> Result<String, JsError> {
    limit_tree_json(config_json, radius, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_neighbourhood(config_json: &str, n: usize, radius: u32, seed: u64) -> Result<String, JsError> {
    neighbourhood_json(config_json, n, radius, seed).map_err(|e| JsError::new(&e))
}
