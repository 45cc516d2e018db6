//! End-to-end runs: ANCHOR, its baselines, and the temporal and spatial
//! variability experiments.

pub mod bench;
mod report;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{decompose_to_basis, Circuit};
use crate::device::{snapshot_at, DeviceModel};
use crate::lp::{equal_split, plan, LpConfig, LpError, ShotPlan, TvdMatrix};
use crate::mapgen::{generate_map_set, optimap, randmap, route, CircuitMap, MapError, MapOrigin, MapSetConfig};
use crate::predictor::{
    confidence_filter, evaluate, fit_forest, gen_training_set, predict_ensemble, Evaluation, ForestParams,
    PredictorError, TrainingConfig, TvdForest, KEEP_FRACTION,
};
use crate::seed;
use crate::sim::{esp, ideal_distribution, sample_noisy, tvd, Distribution, ShotResult, SimError};

pub use bench::benchmark_suite;
pub use report::{
    median, metrics_summary, read_records_csv, reductions, summarize, write_records_csv,
    BaselineComparison, GroupSummary, MetricsSummary, Reduction, SummaryReport,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("report: {0}")]
    Report(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "ANCHOR")]
    Anchor,
    #[serde(rename = "RANDMAP")]
    Randmap,
    #[serde(rename = "OPTIMAP")]
    Optimap,
    #[serde(rename = "EQUALDIST")]
    EqualDist,
    #[serde(rename = "ESP_LP")]
    EspLp,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Anchor,
        Technique::Randmap,
        Technique::Optimap,
        Technique::EqualDist,
        Technique::EspLp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Technique::Anchor => "ANCHOR",
            Technique::Randmap => "RANDMAP",
            Technique::Optimap => "OPTIMAP",
            Technique::EqualDist => "EQUALDIST",
            Technique::EspLp => "ESP_LP",
        }
    }

    pub fn parse(s: &str) -> Option<Technique> {
        Technique::ALL.into_iter().find(|t| t.label().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Benchmark names to run; empty means the whole suite.
    pub circuits: Vec<String>,
    pub techniques: Vec<Technique>,
    pub total_shots: u64,
    /// Maps per device.
    pub m: usize,
    /// Devices in the LP, the target included; `None` uses all of them.
    pub k: Option<usize>,
    pub epsilon: f64,
    pub seed: u64,
    pub runs_per_cell: usize,
    /// Device index of the temporal experiment.
    pub temporal_device: usize,
    /// Days of the temporal experiment; `None` uses every calibration day.
    pub days: Option<Vec<i64>>,
    /// Day of the spatial experiment.
    pub spatial_day: i64,
    /// Fill the `wall_time_s` column; off by default so reports are reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            circuits: Vec::new(),
            techniques: Technique::ALL.to_vec(),
            total_shots: 32_000,
            m: 12,
            k: None,
            epsilon: 0.1,
            seed: 1,
            runs_per_cell: 20,
            temporal_device: 0,
            days: None,
            spatial_day: 1,
            record_wall_time: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub technique: Technique,
    pub circuit: String,
    pub device: String,
    pub day: i64,
    /// Measured TVD in percent.
    pub tvd: f64,
    pub wall_time: f64,
    pub seed: u64,
}

/// Everything a single run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    /// Merged counts over every executed map.
    pub counts: ShotResult,
    /// Shots per map of the target device, in map-set order (after filtering for ANCHOR).
    pub shots: Vec<u64>,
    /// Map indices (into the target's map set) that `shots` refers to.
    pub map_indices: Vec<usize>,
    /// The maps `shots` refers to.
    pub maps: Vec<CircuitMap>,
    pub plan: Option<ShotPlan>,
}

/// Devices with their trained predictors, index-aligned.
#[derive(Clone, Debug)]
pub struct TrainedFleet {
    pub devices: Vec<DeviceModel>,
    pub forests: Vec<TvdForest>,
}

impl TrainedFleet {
    pub fn new(devices: Vec<DeviceModel>, forests: Vec<TvdForest>) -> Result<Self, PipelineError> {
        if devices.len() != forests.len() {
            return Err(PipelineError::Config(format!(
                "{} devices but {} models",
                devices.len(),
                forests.len()
            )));
        }
        for (d, f) in devices.iter().zip(&forests) {
            if d.name() != f.device {
                return Err(PipelineError::Config(format!(
                    "model for `{}` paired with device `{}`",
                    f.device,
                    d.name()
                )));
            }
        }
        Ok(Self { devices, forests })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name() == name)
    }

    /// The target first, then the other devices in fleet order, `k` in total.
    fn lp_devices(&self, target: usize, k: Option<usize>) -> Result<Vec<usize>, PipelineError> {
        let k = k.unwrap_or(self.devices.len());
        if k < 2 || k > self.devices.len() {
            return Err(PipelineError::Config(format!(
                "k must be between 2 and {}, got {k}",
                self.devices.len()
            )));
        }
        let mut out = vec![target];
        out.extend((0..self.devices.len()).filter(|&d| d != target).take(k - 1));
        Ok(out)
    }
}

/// Seed stream for held-out evaluation sets, kept apart from the training stream.
const HOLDOUT_STREAM: u64 = 0x686f_6c64;

/// Trains one forest per device and, when `holdout > 0`, scores each on a
/// fresh held-out set with the same token capacity.
pub fn train_fleet(
    devices: Vec<DeviceModel>,
    training: &TrainingConfig,
    params: &ForestParams,
    holdout: usize,
) -> Result<(TrainedFleet, Vec<Option<Evaluation>>), PipelineError> {
    let mut forests = Vec::with_capacity(devices.len());
    let mut evals = Vec::with_capacity(devices.len());
    for d in &devices {
        let ts = gen_training_set(d, training);
        let forest = fit_forest(&ts, params)?;
        let eval = if holdout > 0 {
            let cfg = TrainingConfig {
                n_circuits: holdout,
                seed: seed::mix(training.seed, HOLDOUT_STREAM),
                max_len: Some(ts.max_len),
                ..*training
            };
            Some(evaluate(&forest, &gen_training_set(d, &cfg))?)
        } else {
            None
        };
        forests.push(forest);
        evals.push(eval);
    }
    Ok((TrainedFleet::new(devices, forests)?, evals))
}

fn map_set_seed(run_seed: u64, device: usize) -> u64 {
    seed::mix_all(run_seed, &[1, device as u64])
}

fn shot_seed(run_seed: u64, map: usize) -> u64 {
    seed::mix_all(run_seed, &[2, map as u64])
}

/// Runs `maps[j]` with `shots[j]` shots on `snapshot` and merges the counts.
fn execute(
    maps: &[&CircuitMap],
    shots: &[u64],
    model: &DeviceModel,
    day: i64,
    run_seed: u64,
    indices: &[usize],
) -> Result<ShotResult, PipelineError> {
    let snap = snapshot_at(model, day);
    let bits = maps[0].routed.gates().iter().filter(|g| matches!(g, crate::Gate::Measure(_))).count();
    let mut merged = ShotResult::empty(bits);
    for ((map, &n), &j) in maps.iter().zip(shots).zip(indices) {
        if n > 0 {
            merged.merge(&sample_noisy(map, snap, n, shot_seed(run_seed, j))?);
        }
    }
    Ok(merged)
}

fn finish(
    technique: Technique,
    c: &Circuit,
    model: &DeviceModel,
    day: i64,
    run_seed: u64,
    started: Instant,
    counts: ShotResult,
) -> Result<RunRecord, PipelineError> {
    let ideal = ideal_distribution(c)?;
    let tvd = tvd(&ideal, &Distribution::from_counts(&counts));
    Ok(RunRecord {
        technique,
        circuit: c.name().to_string(),
        device: model.name().to_string(),
        day,
        tvd,
        wall_time: started.elapsed().as_secs_f64(),
        seed: run_seed,
    })
}

fn check_circuit(c: &Circuit, cfg: &ExperimentConfig) -> Result<(), PipelineError> {
    if let Some(q) = (0..c.num_qubits()).find(|&q| !c.is_measured(q)) {
        return Err(SimError::Unmeasured(q).into());
    }
    if cfg.total_shots == 0 {
        return Err(PipelineError::Config("total_shots must be >= 1".into()));
    }
    Ok(())
}

/// A solved shot plan with the target's maps it refers to.
#[derive(Clone, Debug)]
pub struct PlannedRun {
    pub plan: ShotPlan,
    /// Indices into the target's map set, aligned with `plan.shots`.
    pub map_indices: Vec<usize>,
    pub maps: Vec<CircuitMap>,
}

/// Map sets on `k` devices, TVD estimates (forest predictions for ANCHOR,
/// `100 * (1 - ESP)` for ESP_LP) and the LP, without executing anything.
///
/// Map sets are drawn per device from `run_seed`, so EQUALDIST with the same
/// seed sees the same maps.
pub fn plan_shots(
    technique: Technique,
    c: &Circuit,
    fleet: &TrainedFleet,
    target: usize,
    cfg: &ExperimentConfig,
    day: i64,
    run_seed: u64,
) -> Result<PlannedRun, PipelineError> {
    if !matches!(technique, Technique::Anchor | Technique::EspLp) {
        return Err(PipelineError::Config(format!("{} does not plan shots", technique.label())));
    }
    check_circuit(c, cfg)?;
    let devices = fleet.lp_devices(target, cfg.k)?;
    let mut map_sets: Vec<Vec<CircuitMap>> = devices
        .iter()
        .map(|&d| {
            let ms = MapSetConfig {
                m: cfg.m,
                seed: map_set_seed(run_seed, d),
            };
            generate_map_set(c, &fleet.devices[d], day, &ms)
        })
        .collect::<Result<_, _>>()?;

    let (values, kept): (Vec<Vec<f64>>, Vec<usize>) = if technique == Technique::Anchor {
        let preds: Vec<Vec<_>> = devices
            .iter()
            .zip(&map_sets)
            .map(|(&d, maps)| {
                maps.iter()
                    .map(|m| predict_ensemble(&fleet.forests[d], m))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let variances: Vec<f64> = preds[0].iter().map(|p| p.variance).collect();
        let kept = confidence_filter(&variances, KEEP_FRACTION)?;
        let values = preds
            .iter()
            .map(|row| kept.iter().map(|&j| row[j].mean).collect())
            .collect();
        (values, kept)
    } else {
        let values = devices
            .iter()
            .zip(&map_sets)
            .map(|(&d, maps)| {
                let snap = snapshot_at(&fleet.devices[d], day);
                maps.iter().map(|m| 100.0 * (1.0 - esp(m, snap))).collect()
            })
            .collect();
        (values, (0..cfg.m).collect())
    };

    let matrix = TvdMatrix {
        values,
        computers: devices.iter().map(|&d| fleet.devices[d].name().to_string()).collect(),
        maps: kept.iter().map(|j| format!("map{j}")).collect(),
    };
    let lp_cfg = LpConfig {
        epsilon: cfg.epsilon,
        target_computer: 0,
    };
    let plan = plan(&matrix, &lp_cfg, cfg.total_shots)?;
    let mut target_maps: Vec<Option<CircuitMap>> = map_sets.swap_remove(0).into_iter().map(Some).collect();
    let maps = kept
        .iter()
        .map(|&j| target_maps[j].take().expect("kept indices are distinct"))
        .collect();
    Ok(PlannedRun {
        plan,
        map_indices: kept,
        maps,
    })
}

fn run_lp(
    technique: Technique,
    c: &Circuit,
    fleet: &TrainedFleet,
    target: usize,
    cfg: &ExperimentConfig,
    day: i64,
    run_seed: u64,
) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    let planned = plan_shots(technique, c, fleet, target, cfg, day, run_seed)?;
    let model = &fleet.devices[target];
    let refs: Vec<&CircuitMap> = planned.maps.iter().collect();
    let counts = execute(&refs, &planned.plan.shots, model, day, run_seed, &planned.map_indices)?;
    Ok(RunOutcome {
        record: finish(technique, c, model, day, run_seed, started, counts.clone())?,
        counts,
        shots: planned.plan.shots.clone(),
        map_indices: planned.map_indices,
        maps: planned.maps,
        plan: Some(planned.plan),
    })
}

/// Full ANCHOR run: map sets on `k` devices, forest predictions, confidence
/// filter on the target's predictions, LP, and execution of the target's
/// share on its `day` calibration.
pub fn run_anchor(
    c: &Circuit,
    fleet: &TrainedFleet,
    target: usize,
    cfg: &ExperimentConfig,
    day: i64,
    run_seed: u64,
) -> Result<RunOutcome, PipelineError> {
    run_lp(Technique::Anchor, c, fleet, target, cfg, day, run_seed)
}

/// RANDMAP, OPTIMAP, EQUALDIST or ESP_LP on `target` at `day`.
pub fn run_baseline(
    technique: Technique,
    c: &Circuit,
    fleet: &TrainedFleet,
    target: usize,
    cfg: &ExperimentConfig,
    day: i64,
    run_seed: u64,
) -> Result<RunOutcome, PipelineError> {
    if technique == Technique::Anchor {
        return Err(PipelineError::Config("ANCHOR is not a baseline".into()));
    }
    run_technique(technique, c, fleet, target, cfg, day, run_seed)
}

/// Dispatches to [`run_anchor`] or the matching baseline.
pub fn run_technique(
    technique: Technique,
    c: &Circuit,
    fleet: &TrainedFleet,
    target: usize,
    cfg: &ExperimentConfig,
    day: i64,
    run_seed: u64,
) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    check_circuit(c, cfg)?;
    let model = &fleet.devices[target];
    let single = |map: CircuitMap| -> Result<RunOutcome, PipelineError> {
        let counts = execute(&[&map], &[cfg.total_shots], model, day, run_seed, &[0])?;
        Ok(RunOutcome {
            record: finish(technique, c, model, day, run_seed, started, counts.clone())?,
            counts,
            shots: vec![cfg.total_shots],
            map_indices: vec![0],
            maps: vec![map],
            plan: None,
        })
    };
    match technique {
        Technique::Anchor | Technique::EspLp => run_lp(technique, c, fleet, target, cfg, day, run_seed),
        Technique::Randmap => {
            let basis = decompose_to_basis(c);
            let a = randmap(c.num_qubits(), model.graph(), seed::mix(run_seed, 3))?;
            single(route(&basis, &a, model.graph(), model.name(), MapOrigin::Rand))
        }
        Technique::Optimap => {
            let basis = decompose_to_basis(c);
            let snap = snapshot_at(model, day);
            let a = optimap(&basis, snap, model.graph(), 0.0, 0)?;
            single(route(&basis, &a, model.graph(), model.name(), MapOrigin::Opti))
        }
        Technique::EqualDist => {
            let ms = MapSetConfig {
                m: cfg.m,
                seed: map_set_seed(run_seed, target),
            };
            let maps = generate_map_set(c, model, day, &ms)?;
            let shots = equal_split(maps.len(), cfg.total_shots);
            let refs: Vec<&CircuitMap> = maps.iter().collect();
            let indices: Vec<usize> = (0..maps.len()).collect();
            let counts = execute(&refs, &shots, model, day, run_seed, &indices)?;
            Ok(RunOutcome {
                record: finish(technique, c, model, day, run_seed, started, counts.clone())?,
                counts,
                shots,
                map_indices: indices,
                maps,
                plan: None,
            })
        }
    }
}

/// The configured benchmark circuits, in suite order.
pub fn selected_circuits(cfg: &ExperimentConfig) -> Result<Vec<Circuit>, PipelineError> {
    let suite = benchmark_suite();
    if cfg.circuits.is_empty() {
        return Ok(suite);
    }
    cfg.circuits
        .iter()
        .map(|name| {
            suite
                .iter()
                .find(|c| c.name().eq_ignore_ascii_case(name))
                .cloned()
                .ok_or_else(|| PipelineError::Config(format!("unknown benchmark `{name}`")))
        })
        .collect()
}

/// Seed of one run; techniques share it so they see the same maps and shots.
pub fn run_seed(master: u64, experiment: u64, circuit: usize, cell: usize, run: usize) -> u64 {
    seed::mix_all(master, &[experiment, circuit as u64, cell as u64, run as u64])
}

const TEMPORAL: u64 = 0;
const SPATIAL: u64 = 1;

struct Job {
    circuit: usize,
    technique: Technique,
    target: usize,
    day: i64,
    seed: u64,
}

fn run_jobs(
    jobs: Vec<Job>,
    circuits: &[Circuit],
    fleet: &TrainedFleet,
    cfg: &ExperimentConfig,
) -> Result<Vec<RunRecord>, PipelineError> {
    jobs.into_par_iter()
        .map(|j| {
            run_technique(j.technique, &circuits[j.circuit], fleet, j.target, cfg, j.day, j.seed)
                .map(|o| o.record)
        })
        .collect()
}

/// Every circuit and technique on one device across all configured days.
/// Records come out circuit-major, then technique, day and run.
pub fn experiment_temporal(fleet: &TrainedFleet, cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, PipelineError> {
    let circuits = selected_circuits(cfg)?;
    let target = cfg.temporal_device;
    let model = fleet
        .devices
        .get(target)
        .ok_or_else(|| PipelineError::Config(format!("no device {target}")))?;
    let days = cfg.days.clone().unwrap_or_else(|| model.days());
    let mut jobs = Vec::new();
    for ci in 0..circuits.len() {
        for &technique in &cfg.techniques {
            for (di, &day) in days.iter().enumerate() {
                for run in 0..cfg.runs_per_cell {
                    jobs.push(Job {
                        circuit: ci,
                        technique,
                        target,
                        day,
                        seed: run_seed(cfg.seed, TEMPORAL, ci, di, run),
                    });
                }
            }
        }
    }
    run_jobs(jobs, &circuits, fleet, cfg)
}

/// Every circuit and technique on every device at `cfg.spatial_day`.
pub fn experiment_spatial(fleet: &TrainedFleet, cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, PipelineError> {
    let circuits = selected_circuits(cfg)?;
    let mut jobs = Vec::new();
    for ci in 0..circuits.len() {
        for &technique in &cfg.techniques {
            for target in 0..fleet.devices.len() {
                for run in 0..cfg.runs_per_cell {
                    jobs.push(Job {
                        circuit: ci,
                        technique,
                        target,
                        day: cfg.spatial_day,
                        seed: run_seed(cfg.seed, SPATIAL, ci, target, run),
                    });
                }
            }
        }
    }
    run_jobs(jobs, &circuits, fleet, cfg)
}
