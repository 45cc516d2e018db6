//! The default synthetic fleet: five 12-qubit devices cut from a 27-qubit
//! heavy-hex lattice, each with its own base calibration and drift stream.

use rand_distr::{Distribution as _, LogNormal};
use serde::{Deserialize, Serialize};

use crate::device::{synth_drift, CalibrationSnapshot, CouplingGraph, DeviceModel, Edge};
use crate::seed;

/// Couplers of the 27-qubit heavy-hex layout.
pub const HEAVY_HEX_27: [(usize, usize); 28] = [
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10),
    (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16),
    (15, 18), (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23),
    (22, 25), (23, 24), (24, 25), (25, 26),
];

/// Heavy-hex qubits kept by each fleet device.
const REGIONS: [[usize; 12]; 5] = [
    [1, 2, 3, 4, 5, 7, 8, 10, 11, 12, 13, 14],
    [12, 13, 14, 15, 16, 18, 19, 21, 22, 23, 24, 25],
    [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
    [14, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26],
    [8, 10, 11, 12, 13, 14, 15, 17, 18, 21, 23, 24],
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetConfig {
    pub days: usize,
    pub drift_sigma: f64,
    pub seed: u64,
    /// Typical single-qubit, two-qubit and readout error rates.
    pub err_1q: f64,
    pub err_2q: f64,
    pub err_readout: f64,
    /// Log-scale spread of the base rates across qubits and couplers.
    pub spread: f64,
    /// Per-device multiplier on the typical rates, one per region.
    pub quality: [f64; 5],
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            days: 10,
            drift_sigma: 0.25,
            seed: 2024,
            err_1q: 4e-4,
            err_2q: 1e-2,
            err_readout: 2e-2,
            spread: 0.6,
            quality: [1.0, 0.9, 1.1, 0.95, 1.05],
        }
    }
}

/// Induced subgraph of the heavy-hex lattice on `region`, relabelled so the
/// `i`-th smallest kept qubit becomes `i`.
pub fn heavy_hex_region(region: &[usize]) -> CouplingGraph {
    let mut kept = region.to_vec();
    kept.sort_unstable();
    let local = |q: usize| kept.binary_search(&q).ok();
    let edges: Vec<(usize, usize)> = HEAVY_HEX_27
        .iter()
        .filter_map(|&(a, b)| Some((local(a)?, local(b)?)))
        .collect();
    CouplingGraph::new(kept.len(), &edges).expect("fleet regions are connected")
}

fn base_snapshot(graph: &CouplingGraph, quality: f64, cfg: &FleetConfig, seed: u64) -> CalibrationSnapshot {
    let mut rng = seed::rng(seed);
    let jitter = LogNormal::new(0.0, cfg.spread).expect("valid spread");
    let mut draw = |typical: f64| (typical * quality * jitter.sample(&mut rng)).min(0.05);
    let n = graph.num_physical();
    let err_1q: Vec<f64> = (0..n).map(|_| draw(cfg.err_1q)).collect();
    let err_readout: Vec<f64> = (0..n).map(|_| draw(cfg.err_readout)).collect();
    let err_2q = graph
        .edges()
        .iter()
        .map(|&e: &Edge| (e, draw(cfg.err_2q)))
        .collect();
    let t1_us: Vec<f64> = (0..n).map(|_| 60.0 + 80.0 * draw(1.0).min(1.0)).collect();
    let t2_us = t1_us.iter().map(|t1| 0.8 * t1).collect();
    CalibrationSnapshot {
        day: 0,
        err_1q,
        err_2q,
        err_readout,
        t1_us,
        t2_us,
        dur_1q_ns: 35.0,
        dur_2q_ns: 400.0,
    }
}

/// Five devices with `cfg.days` drifting snapshots each, stamped `1..=days`.
pub fn default_fleet(cfg: &FleetConfig) -> Vec<DeviceModel> {
    REGIONS
        .iter()
        .zip(cfg.quality)
        .enumerate()
        .map(|(i, (region, quality))| {
            let graph = heavy_hex_region(region);
            let base = base_snapshot(&graph, quality, cfg, seed::mix_all(cfg.seed, &[0, i as u64]));
            let snapshots = synth_drift(
                &base,
                cfg.days,
                cfg.drift_sigma,
                seed::mix_all(cfg.seed, &[1, i as u64]),
            );
            DeviceModel::new(format!("dev{i}"), graph, snapshots).expect("synthetic snapshots are valid")
        })
        .collect()
}
