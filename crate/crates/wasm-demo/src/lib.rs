//! wasm-bindgen exports for `www/index.html`. Every function takes and
//! returns plain strings or numbers; structured results are JSON. The
//! `*_json` functions hold the logic so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use anchor_core::device::snapshot_at;
use anchor_core::fleet::{default_fleet, FleetConfig};
use anchor_core::lp::{self, LpConfig, TvdMatrix};
use anchor_core::mapgen::{generate_map_set, MapSetConfig};
use anchor_core::sim::{esp, ideal_distribution, sample_noisy};
use anchor_core::{parse_circuit, tvd, DeviceModel, Distribution};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(err)
}

fn device(index: usize) -> Result<DeviceModel, String> {
    default_fleet(&FleetConfig::default())
        .into_iter()
        .nth(index)
        .ok_or_else(|| err(format!("no device {index} in the demo fleet")))
}

/// Solves the shot program for a JSON array of per-computer TVD rows.
#[wasm_bindgen]
pub fn plan_shots(rows_json: &str, epsilon: f64, total_shots: u32, target: usize) -> Result<String, JsError> {
    js(plan_shots_json(rows_json, epsilon, total_shots, target))
}

pub fn plan_shots_json(rows_json: &str, epsilon: f64, total_shots: u32, target: usize) -> Result<String, String> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(rows_json).map_err(err)?;
    let cfg = LpConfig {
        epsilon,
        target_computer: target,
    };
    to_json(&lp::plan(&TvdMatrix::new(rows), &cfg, u64::from(total_shots)).map_err(err)?)
}

#[derive(Serialize)]
struct MapRow {
    origin: anchor_core::MapOrigin,
    assignment: Vec<usize>,
    cx: usize,
    esp: f64,
}

/// The `m` candidate maps of a circuit on one demo device, with CX counts and ESP.
#[wasm_bindgen]
pub fn generate_maps(circuit: &str, device_index: usize, day: i32, m: usize, seed: u32) -> Result<String, JsError> {
    js(generate_maps_json(circuit, device_index, day, m, seed))
}

pub fn generate_maps_json(circuit: &str, device_index: usize, day: i32, m: usize, seed: u32) -> Result<String, String> {
    let c = parse_circuit(circuit).map_err(err)?;
    let model = device(device_index)?;
    let snap = snapshot_at(&model, i64::from(day));
    let maps = generate_map_set(&c, &model, i64::from(day), &MapSetConfig { m, seed: u64::from(seed) })
        .map_err(err)?;
    let rows: Vec<MapRow> = maps
        .iter()
        .map(|map| MapRow {
            origin: map.origin,
            assignment: map.assignment.clone(),
            cx: map
                .routed
                .gates()
                .iter()
                .filter(|g| matches!(g, anchor_core::Gate::Cx(..)))
                .count(),
            esp: esp(map, snap),
        })
        .collect();
    to_json(&rows)
}

#[derive(Serialize)]
struct Simulated {
    counts: anchor_core::ShotResult,
    tvd_pct: f64,
}

/// Runs `map_index` of the circuit's map set and reports counts and TVD.
#[wasm_bindgen]
pub fn simulate(
    circuit: &str,
    device_index: usize,
    day: i32,
    m: usize,
    map_index: usize,
    shots: u32,
    seed: u32,
) -> Result<String, JsError> {
    js(simulate_json(circuit, device_index, day, m, map_index, shots, seed))
}

pub fn simulate_json(
    circuit: &str,
    device_index: usize,
    day: i32,
    m: usize,
    map_index: usize,
    shots: u32,
    seed: u32,
) -> Result<String, String> {
    let c = parse_circuit(circuit).map_err(err)?;
    let model = device(device_index)?;
    let day = i64::from(day);
    let maps = generate_map_set(&c, &model, day, &MapSetConfig { m, seed: u64::from(seed) }).map_err(err)?;
    let map = maps.get(map_index).ok_or_else(|| err(format!("map index {map_index} out of range")))?;
    let counts = sample_noisy(map, snapshot_at(&model, day), u64::from(shots), u64::from(seed)).map_err(err)?;
    let ideal = ideal_distribution(&c).map_err(err)?;
    let tvd_pct = tvd(&ideal, &Distribution::from_counts(&counts));
    to_json(&Simulated { counts, tvd_pct })
}
