use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PredictorError, TvdForest};
use crate::circuit::{encodable_len, encode_two_number, Circuit, Gate};
use crate::device::DeviceModel;
use crate::mapgen::{randmap, route, MapOrigin};
use crate::seed;
use crate::sim::{esp, map_ideal_distribution, sample_noisy, tvd, Distribution};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub n_circuits: usize,
    /// Inclusive logical qubit range.
    pub qubit_range: (usize, usize),
    /// Inclusive gate-count range, before routing.
    pub gate_range: (usize, usize),
    pub shots_per_label: u64,
    /// Independent noisy runs averaged into each label.
    pub label_runs: usize,
    pub seed: u64,
    /// Token capacity. `None` derives it from the generated circuits.
    pub max_len: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_circuits: 20_000,
            qubit_range: (3, 5),
            gate_range: (2, 60),
            shots_per_label: 2000,
            label_runs: 2,
            seed: 7,
            max_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub device: String,
    /// Raw flat encodings, each of length `2 * max_len`.
    pub inputs: Vec<Vec<f64>>,
    /// TVD in percent.
    pub labels: Vec<f64>,
    /// ESP of each sample under the snapshot it was labelled with; may be empty.
    pub esp: Vec<f64>,
    pub norm_mean: Vec<f64>,
    /// Zero-variance features get 1.
    pub norm_std: Vec<f64>,
    pub max_len: usize,
}

impl TrainingSet {
    pub fn from_samples(
        device: &str,
        inputs: Vec<Vec<f64>>,
        labels: Vec<f64>,
        esp: Option<Vec<f64>>,
    ) -> Self {
        assert_eq!(inputs.len(), labels.len(), "one label per input");
        let d = inputs.first().map_or(0, Vec::len);
        let n = inputs.len() as f64;
        let mut mean = vec![0.0; d];
        let mut std = vec![1.0; d];
        // column statistics over sorted values, so row order cannot change them
        for f in 0..d {
            let mut col: Vec<f64> = inputs.iter().map(|x| x[f]).collect();
            col.sort_by(f64::total_cmp);
            mean[f] = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean[f]).powi(2)).sum::<f64>() / n;
            std[f] = if var > 1e-18 { var.sqrt() } else { 1.0 };
        }
        Self {
            device: device.to_string(),
            inputs,
            labels,
            esp: esp.unwrap_or_default(),
            norm_mean: mean,
            norm_std: std,
            max_len: d / 2,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `n_gates` gates drawn uniformly from X, SX and CX on uniformly random
/// distinct qubits, then every qubit measured.
pub fn random_training_circuit(q: usize, n_gates: usize, rng: &mut seed::Rng) -> Circuit {
    let mut c = Circuit::new(q, "random").expect("q >= 1");
    for _ in 0..n_gates {
        let a = rng.random_range(0..q);
        let g = match rng.random_range(0..if q > 1 { 3 } else { 2 }) {
            0 => Gate::X(a),
            1 => Gate::Sx(a),
            _ => {
                let b = (a + rng.random_range(1..q)) % q;
                Gate::Cx(a, b)
            }
        };
        c.push(g).expect("gate is valid");
    }
    c.measure_all();
    c
}

struct Sample {
    routed: Circuit,
    label: f64,
    esp: f64,
}

fn make_sample(model: &DeviceModel, cfg: &TrainingConfig, index: usize) -> Sample {
    let base = seed::mix(cfg.seed, index as u64);
    let mut attempt = 0;
    loop {
        let s = seed::mix(base, attempt);
        let mut rng = seed::rng(s);
        let q = rng.random_range(cfg.qubit_range.0..=cfg.qubit_range.1);
        let n_gates = rng.random_range(cfg.gate_range.0..=cfg.gate_range.1);
        let c = random_training_circuit(q, n_gates, &mut rng);
        let assignment = randmap(q, model.graph(), rng.random()).expect("qubit range fits device");
        let map = route(&c, &assignment, model.graph(), model.name(), MapOrigin::Rand);
        if cfg.max_len.is_some_and(|m| encodable_len(&map.routed) > m) {
            attempt += 1;
            continue;
        }
        let snaps = model.snapshots();
        let snap = &snaps[rng.random_range(0..snaps.len())];
        let ideal = map_ideal_distribution(&map).expect("training circuits are small");
        let runs = cfg.label_runs.max(1);
        let label = (0..runs)
            .map(|r| {
                let counts = sample_noisy(&map, snap, cfg.shots_per_label, seed::mix(s, 100 + r as u64))
                    .expect("shots >= 1");
                tvd(&ideal, &Distribution::from_counts(&counts))
            })
            .sum::<f64>()
            / runs as f64;
        return Sample {
            esp: esp(&map, snap),
            routed: map.routed,
            label,
        };
    }
}

fn derive_max_len(lens: &mut [usize]) -> usize {
    if lens.is_empty() {
        return 0;
    }
    lens.sort_unstable();
    let p99 = lens[((lens.len() as f64 * 0.99).ceil() as usize).clamp(1, lens.len()) - 1];
    let max = *lens.last().expect("non-empty");
    let want = ((p99 as f64) * 1.5).ceil() as usize;
    want.max(max).div_ceil(8) * 8
}

/// Random circuits routed with random-walk maps on `model` and labelled with
/// their simulated TVD on a uniformly drawn calibration day. Deterministic
/// in `cfg.seed`.
pub fn gen_training_set(model: &DeviceModel, cfg: &TrainingConfig) -> TrainingSet {
    assert!(
        cfg.qubit_range.0 >= 1 && cfg.qubit_range.0 <= cfg.qubit_range.1,
        "invalid qubit range"
    );
    assert!(cfg.gate_range.0 <= cfg.gate_range.1, "invalid gate range");
    let samples: Vec<Sample> = (0..cfg.n_circuits)
        .into_par_iter()
        .map(|i| make_sample(model, cfg, i))
        .collect();
    let max_len = cfg.max_len.unwrap_or_else(|| {
        let mut lens: Vec<usize> = samples.iter().map(|s| encodable_len(&s.routed)).collect();
        derive_max_len(&mut lens)
    });
    let inputs = samples
        .iter()
        .map(|s| {
            encode_two_number(&s.routed, max_len)
                .expect("capacity covers every sample")
                .flat()
        })
        .collect();
    let mut ts = TrainingSet::from_samples(
        model.name(),
        inputs,
        samples.iter().map(|s| s.label).collect(),
        Some(samples.iter().map(|s| s.esp).collect()),
    );
    ts.max_len = max_len;
    if ts.is_empty() {
        ts.norm_mean = vec![0.0; 2 * max_len];
        ts.norm_std = vec![1.0; 2 * max_len];
    }
    ts
}

/// Held-out errors on the `(TVD / 100)^2` scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub n: usize,
    pub mse_forest: f64,
    /// Error of `100 * (1 - ESP)` used as a TVD estimate.
    pub mse_esp: f64,
}

pub fn evaluate(forest: &TvdForest, holdout: &TrainingSet) -> Result<Evaluation, PredictorError> {
    if holdout.is_empty() {
        return Err(PredictorError::EmptyTrainingSet);
    }
    let n = holdout.len();
    let mut se_forest = 0.0;
    for (x, y) in holdout.inputs.iter().zip(&holdout.labels) {
        let p = forest.predict_flat(x)?.mean;
        se_forest += ((p - y) / 100.0).powi(2);
    }
    let se_esp: f64 = holdout
        .esp
        .iter()
        .zip(&holdout.labels)
        .map(|(e, y)| ((100.0 * (1.0 - e) - y) / 100.0).powi(2))
        .sum();
    Ok(Evaluation {
        n,
        mse_forest: se_forest / n as f64,
        mse_esp: if holdout.esp.len() == n {
            se_esp / n as f64
        } else {
            f64::NAN
        },
    })
}
