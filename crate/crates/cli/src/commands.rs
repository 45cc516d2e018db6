use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use anchor_core::circuit::decompose_to_basis;
use anchor_core::device::snapshot_at;
use anchor_core::fleet::{default_fleet, FleetConfig};
use anchor_core::lp::{self, LpConfig, LpError, ShotPlan, TvdMatrix};
use anchor_core::mapgen::{optimap, randmap, route, MapOrigin};
use anchor_core::pipeline::{
    experiment_spatial, experiment_temporal, plan_shots, read_records_csv, train_fleet, write_records_csv,
    ExperimentConfig, RunRecord, SummaryReport, Technique, TrainedFleet,
};
use anchor_core::predictor::{ForestParams, TrainingConfig, TvdForest};
use anchor_core::sim::{ideal_distribution, sample_noisy};
use anchor_core::{load_device, parse_circuit, tvd, Circuit, DeviceModel, Distribution};

use crate::{usage, CliError};

const MODEL_SUFFIX: &str = ".forest.json";

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(CliError::Runtime)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(CliError::Runtime)
}

fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    parse_circuit(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_device_file(path: &Path) -> Result<DeviceModel, CliError> {
    load_device(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Every `*.json` device file in `dir`, by file name; the built-in fleet when `dir` is `None`.
fn load_devices(dir: Option<&Path>, fleet: &FleetConfig) -> Result<Vec<DeviceModel>, CliError> {
    let Some(dir) = dir else {
        return Ok(default_fleet(fleet));
    };
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no device files in {}", dir.display())));
    }
    paths.iter().map(|p| load_device_file(p)).collect()
}

fn load_models(dir: &Path, devices: Vec<DeviceModel>) -> Result<TrainedFleet, CliError> {
    let forests = devices
        .iter()
        .map(|d| {
            let path = dir.join(format!("{}{MODEL_SUFFIX}", d.name()));
            TvdForest::from_json(&read(&path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    TrainedFleet::new(devices, forests).map_err(|e| usage(e.to_string()))
}

fn pick_day(model: &DeviceModel, day: Option<i64>) -> Result<i64, CliError> {
    let days = model.days();
    match day {
        None => Ok(days[0]),
        Some(d) if days.contains(&d) => Ok(d),
        Some(d) => Err(usage(format!(
            "device `{}` has no calibration for day {d} (days {}..={})",
            model.name(),
            days[0],
            days[days.len() - 1]
        ))),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    println!("{text}");
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MapKind {
    Opti,
    Rand,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Circuit file in the text gate format.
    circuit: PathBuf,
    /// Device JSON file.
    #[arg(long)]
    device: PathBuf,
    /// Calibration day; the device's first day when omitted.
    #[arg(long)]
    day: Option<i64>,
    #[arg(long, default_value_t = 32_000)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise-adaptive (`opti`) or random-walk (`rand`) qubit map.
    #[arg(long, value_enum, default_value_t = MapKind::Opti)]
    map: MapKind,
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let circuit = load_circuit(&a.circuit)?;
    let model = load_device_file(&a.device)?;
    let day = pick_day(&model, a.day)?;
    if a.shots == 0 {
        return Err(usage("--shots must be at least 1"));
    }
    let snap = snapshot_at(&model, day);
    let basis = decompose_to_basis(&circuit);
    let (assignment, origin) = match a.map {
        MapKind::Opti => (optimap(&basis, snap, model.graph(), 0.0, 0), MapOrigin::Opti),
        MapKind::Rand => (randmap(basis.num_qubits(), model.graph(), a.seed), MapOrigin::Rand),
    };
    let assignment = assignment.map_err(|e| usage(e.to_string()))?;
    let map = route(&basis, &assignment, model.graph(), model.name(), origin);
    let counts = sample_noisy(&map, snap, a.shots, a.seed).context("sampling")?;
    let ideal = ideal_distribution(&circuit).context("ideal distribution")?;
    let tvd_pct = tvd(&ideal, &Distribution::from_counts(&counts));
    print_json(&json!({
        "circuit": circuit.name(),
        "device": model.name(),
        "day": day,
        "map": map.origin,
        "assignment": map.assignment,
        "shots": a.shots,
        "seed": a.seed,
        "counts": counts,
        "tvd_pct": tvd_pct,
    }))
}

#[derive(Args)]
pub struct TrainArgs {
    /// Directory of device JSON files; the built-in five-device fleet when omitted.
    #[arg(long)]
    devices: Option<PathBuf>,
    #[arg(long, default_value_t = TrainingConfig::default().n_circuits)]
    n_circuits: usize,
    /// Held-out circuits per device for the reported MSE; 0 skips evaluation.
    #[arg(long, default_value_t = 1000)]
    holdout: usize,
    #[arg(long, default_value_t = TrainingConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = ForestParams::default().n_trees)]
    trees: usize,
    #[arg(long, default_value_t = TrainingConfig::default().shots_per_label)]
    shots_per_label: u64,
    /// Output directory for `<device>.forest.json` files.
    #[arg(long)]
    out: PathBuf,
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let devices = load_devices(a.devices.as_deref(), &FleetConfig::default())?;
    if a.trees == 0 || a.shots_per_label == 0 {
        return Err(usage("--trees and --shots-per-label must be at least 1"));
    }
    let training = TrainingConfig {
        n_circuits: a.n_circuits,
        seed: a.seed,
        shots_per_label: a.shots_per_label,
        ..TrainingConfig::default()
    };
    let params = ForestParams {
        n_trees: a.trees,
        ..ForestParams::default()
    };
    let (fleet, evals) = train_fleet(devices, &training, &params, a.holdout).context("training")?;
    create_dir(&a.out)?;
    if a.devices.is_none() {
        let dir = a.out.join("devices");
        create_dir(&dir)?;
        for d in &fleet.devices {
            write(&dir.join(format!("{}.json", d.name())), d.to_json().as_bytes())?;
        }
    }
    for (f, e) in fleet.forests.iter().zip(&evals) {
        write(&a.out.join(format!("{}{MODEL_SUFFIX}", f.device)), f.to_json().as_bytes())?;
        match e {
            Some(e) => println!(
                "{}: mse {:.5} (esp proxy {:.5}) on {} held-out circuits",
                f.device, e.mse_forest, e.mse_esp, e.n
            ),
            None => println!("{}: trained", f.device),
        }
    }
    Ok(())
}

#[derive(Args)]
pub struct PlanArgs {
    /// Circuit file; not needed with --tvd-override.
    circuit: Option<PathBuf>,
    /// TVD matrix JSON (`{"values": [[...], ...]}` or a bare array of rows) used instead of predictions.
    #[arg(long)]
    tvd_override: Option<PathBuf>,
    /// Device that runs the shots: a name, or a row index with --tvd-override.
    #[arg(long)]
    target: Option<String>,
    /// Directory of device JSON files; the built-in fleet when omitted.
    #[arg(long)]
    devices: Option<PathBuf>,
    /// Directory of trained `<device>.forest.json` files.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 32_000)]
    shots: u64,
    /// Devices in the program, the target included; all when omitted.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    day: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct PlanOutput<'a> {
    #[serde(flatten)]
    plan: &'a ShotPlan,
    day: i64,
    assignments: Vec<Vec<usize>>,
}

fn log_escalation(plan: &ShotPlan) {
    for w in plan.epsilon_attempts.windows(2) {
        eprintln!("epsilon {} infeasible, relaxing to {}", w[0], w[1]);
    }
    eprintln!("epsilon used: {}", plan.epsilon_used);
}

fn read_matrix(path: &Path) -> Result<TvdMatrix, CliError> {
    let text = read(path)?;
    let bad = |e: serde_json::Error| usage(format!("{}: {e}", path.display()));
    let matrix = match serde_json::from_str::<TvdMatrix>(&text) {
        Ok(m) => m,
        Err(_) => TvdMatrix::new(serde_json::from_str::<Vec<Vec<f64>>>(&text).map_err(bad)?),
    };
    matrix.validate().map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(matrix)
}

pub fn plan(a: PlanArgs) -> Result<(), CliError> {
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        return Err(usage("--epsilon must be a non-negative number"));
    }
    if a.shots == 0 {
        return Err(usage("--shots must be at least 1"));
    }
    if let Some(path) = &a.tvd_override {
        let matrix = read_matrix(path)?;
        let target = match &a.target {
            None => 0,
            Some(t) => matrix
                .computers
                .iter()
                .position(|c| c == t)
                .or_else(|| t.parse().ok())
                .filter(|&i| i < matrix.k())
                .ok_or_else(|| usage(format!("unknown target `{t}`")))?,
        };
        let cfg = LpConfig {
            epsilon: a.epsilon,
            target_computer: target,
        };
        let plan = lp::plan(&matrix, &cfg, a.shots).context("solving the shot program")?;
        log_escalation(&plan);
        return print_json(&plan);
    }

    let circuit = load_circuit(a.circuit.as_deref().ok_or_else(|| usage("a circuit file or --tvd-override is required"))?)?;
    let models = a.models.as_deref().ok_or_else(|| usage("--models is required without --tvd-override"))?;
    let fleet = load_models(models, load_devices(a.devices.as_deref(), &FleetConfig::default())?)?;
    let target = match &a.target {
        None => 0,
        Some(t) => fleet.index_of(t).ok_or_else(|| usage(format!("unknown device `{t}`")))?,
    };
    let day = pick_day(&fleet.devices[target], a.day)?;
    let cfg = ExperimentConfig {
        total_shots: a.shots,
        m: a.m,
        k: a.k,
        epsilon: a.epsilon,
        ..ExperimentConfig::default()
    };
    let planned = match plan_shots(Technique::Anchor, &circuit, &fleet, target, &cfg, day, a.seed) {
        Err(anchor_core::pipeline::PipelineError::Lp(e @ LpError::InfeasibleAfterRetries { .. })) => {
            return Err(CliError::Runtime(e.into()))
        }
        Err(e @ anchor_core::pipeline::PipelineError::Config(_)) => return Err(usage(e.to_string())),
        Err(e @ anchor_core::pipeline::PipelineError::Map(_)) => return Err(usage(e.to_string())),
        other => other.context("planning")?,
    };
    log_escalation(&planned.plan);
    print_json(&PlanOutput {
        plan: &planned.plan,
        day,
        assignments: planned.maps.iter().map(|m| m.assignment.clone()).collect(),
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchConfig {
    experiment: ExperimentConfig,
    fleet: FleetConfig,
    training: TrainingConfig,
    forest: ForestParams,
    /// Held-out circuits per device when training in-process.
    holdout: usize,
}

#[derive(Args)]
pub struct BenchArgs {
    /// JSON with optional `experiment`, `fleet`, `training`, `forest` and `holdout` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report directory: temporal.csv, spatial.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Trained `<device>.forest.json` files; trained from the config when omitted.
    #[arg(long)]
    models: Option<PathBuf>,
    /// Directory of device JSON files; the configured synthetic fleet when omitted.
    #[arg(long)]
    devices: Option<PathBuf>,
}

#[derive(Serialize)]
struct BenchSummary {
    temporal: SummaryReport,
    spatial: SummaryReport,
    /// Both experiments pooled per circuit.
    combined: SummaryReport,
}

fn print_comparisons(title: &str, report: &SummaryReport) {
    println!("{title}");
    for c in &report.comparisons {
        println!(
            "  vs {:<9}  median cov reduction {:>7.3}  median mean-tvd reduction {:>7.3}  lower cov on {:>3.0}% of {} circuits",
            c.baseline.label(),
            c.median_cov_reduction,
            c.median_mean_tvd_reduction,
            100.0 * c.anchor_lower_cov_fraction,
            c.circuits
        );
    }
}

fn summary(records: &[RunRecord]) -> Result<SummaryReport, CliError> {
    SummaryReport::from_records(records).map_err(|e| CliError::Runtime(e.into()))
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    let cfg: BenchConfig = match &a.config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => BenchConfig::default(),
    };
    let devices = load_devices(a.devices.as_deref(), &cfg.fleet)?;
    let fleet = match &a.models {
        Some(dir) => load_models(dir, devices)?,
        None => {
            eprintln!("training {} forests on {} circuits each", devices.len(), cfg.training.n_circuits);
            let (fleet, evals) = train_fleet(devices, &cfg.training, &cfg.forest, cfg.holdout).context("training")?;
            for (f, e) in fleet.forests.iter().zip(evals.iter().flatten()) {
                eprintln!("{}: held-out mse {:.5}", f.device, e.mse_forest);
            }
            fleet
        }
    };
    let exp = &cfg.experiment;
    if exp.runs_per_cell == 0 {
        return Err(usage("runs_per_cell must be at least 1"));
    }
    let run = |r: Result<Vec<RunRecord>, _>| -> Result<Vec<RunRecord>, CliError> {
        r.map_err(|e: anchor_core::pipeline::PipelineError| match e {
            anchor_core::pipeline::PipelineError::Config(_) => usage(e.to_string()),
            e => CliError::Runtime(e.into()),
        })
    };
    let temporal = run(experiment_temporal(&fleet, exp))?;
    let spatial = run(experiment_spatial(&fleet, exp))?;

    create_dir(&a.out)?;
    for (name, recs) in [("temporal.csv", &temporal), ("spatial.csv", &spatial)] {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, recs, exp.record_wall_time).map_err(|e| CliError::Runtime(e.into()))?;
        write(&a.out.join(name), &buf)?;
    }
    let combined: Vec<RunRecord> = temporal.iter().chain(&spatial).cloned().collect();
    let report = BenchSummary {
        temporal: summary(&temporal)?,
        spatial: summary(&spatial)?,
        combined: summary(&combined)?,
    };
    let mut json = serde_json::to_vec_pretty(&report).context("serializing summary")?;
    json.push(b'\n');
    write(&a.out.join("summary.json"), &json)?;

    println!("{} temporal and {} spatial runs written to {}", temporal.len(), spatial.len(), a.out.display());
    print_comparisons("temporal", &report.temporal);
    print_comparisons("spatial", &report.spatial);
    print_comparisons("combined", &report.combined);
    Ok(())
}

#[derive(Args)]
pub struct ReportArgs {
    /// Record CSVs as written by `bench`; their rows are pooled.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    let mut records = Vec::new();
    for p in &a.csv {
        let text = read(p)?;
        records.extend(read_records_csv(text.as_bytes()).map_err(|e| usage(format!("{}: {e}", p.display())))?);
    }
    if records.is_empty() {
        return Err(usage("no records in the given files"));
    }
    let report = summary(&records)?;
    if a.json {
        return print_json(&report);
    }
    let mut out = std::io::stdout().lock();
    let mut line = |s: String| writeln!(out, "{s}").context("writing report");
    line(format!("{:<6} {:<9} {:>9} {:>9} {:>7} {:>5}", "CIRCUIT", "TECHNIQUE", "MEAN_TVD", "STD_TVD", "COV", "RUNS"))?;
    for g in &report.groups {
        line(format!(
            "{:<6} {:<9} {:>9.3} {:>9.3} {:>7.3} {:>5}",
            g.circuit,
            g.technique.label(),
            g.metrics.mean_tvd,
            g.metrics.std_tvd,
            g.metrics.cov,
            g.metrics.n_runs
        ))?;
    }
    drop(out);
    print_comparisons("ANCHOR against each baseline", &report);
    Ok(())
}
