//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations, each taking and returning plain strings so the page
//! needs no bundler: [`simulate`] produces a day-tensor CSV, [`detect`]
//! computes the cross-validated switch curve of a CSV, and [`graph`] fits
//! a lasso VAR and returns its strongest edges and section influence.
//! The `*_json` functions hold the logic and are usable natively.

use regvar_core::analysis::{export_edges, influence, rank_influence, Edge};
use regvar_core::dataset::{load_days, save_days};
use regvar_core::regime::{cv_risk_curve, detect_switch, RegimeOptions};
use regvar_core::simgen::{gen_dataset, GeneratorSpec};
use regvar_core::solver::SolverConfig;
use regvar_core::varmodel::{fit, FitOptions, SlotWindow};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// A day-tensor CSV of `days` simulated days with `p` sections, plus the
/// number of nonzeros of both true transition matrices.
pub fn simulate_csv(
    p: usize,
    days: usize,
    switch_t: usize,
    avg_degree: f64,
    seed: u32,
) -> Result<String, String> {
    let spec = GeneratorSpec {
        p,
        n: days,
        switch_t,
        avg_degree,
        seed: seed as u64,
        ..GeneratorSpec::default()
    };
    let (tensor, _) = gen_dataset(&spec).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    save_days(&tensor, &mut out).map_err(|e| e.to_string())?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct SwitchCurve {
    pub t_hat: usize,
    pub t: Vec<usize>,
    pub risk: Vec<f64>,
}

pub fn detect_json(csv: &str, folds: usize, seed: u32) -> Result<String, String> {
    let tensor = load_days(csv.as_bytes()).map_err(|e| e.to_string())?;
    let config = SolverConfig {
        folds,
        seed: seed as u64,
        ..SolverConfig::default()
    };
    let curve =
        cv_risk_curve(&tensor, &RegimeOptions::lasso(config), None).map_err(|e| e.to_string())?;
    let out = SwitchCurve {
        t_hat: detect_switch(&curve),
        t: curve.t.clone(),
        risk: curve.risk.clone(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
pub struct Graph {
    pub sections: Vec<String>,
    pub edges: Vec<Edge>,
    pub influence: Vec<(String, f64)>,
}

/// Lasso (per-line CV) on the whole day, edges with `|w| ≥ min_weight`.
pub fn graph_json(csv: &str, min_weight: f64, folds: usize) -> Result<String, String> {
    let tensor = load_days(csv.as_bytes()).map_err(|e| e.to_string())?;
    let config = SolverConfig {
        folds,
        ..SolverConfig::default()
    };
    let window = SlotWindow::full(tensor.n_slots());
    let (model, _) =
        fit(&tensor, window, &FitOptions::cv_lasso(config)).map_err(|e| e.to_string())?;
    let out = Graph {
        sections: model.sections.clone(),
        edges: export_edges(&model, min_weight),
        influence: rank_influence(&model.sections, &influence(&model)),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(
    p: usize,
    days: usize,
    switch_t: usize,
    avg_degree: f64,
    seed: u32,
) -> Result<String, JsError> {
    simulate_csv(p, days, switch_t, avg_degree, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn detect(csv: &str, folds: usize, seed: u32) -> Result<String, JsError> {
    detect_json(csv, folds, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn graph(csv: &str, min_weight: f64, folds: usize) -> Result<String, JsError> {
    graph_json(csv, min_weight, folds).map_err(|e| JsError::new(&e))
}
