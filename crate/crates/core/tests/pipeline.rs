use anchor_core::device::{CalibrationSnapshot, DeviceModel};
use anchor_core::fleet::{default_fleet, heavy_hex_region, FleetConfig};
use anchor_core::pipeline::{
    bench, experiment_spatial, run_anchor, run_technique, ExperimentConfig, PipelineError, RunRecord,
    Technique,
    TrainedFleet,
};
use anchor_core::predictor::{fit_forest, gen_training_set, ForestParams, TrainingConfig};
use std::sync::OnceLock;

fn tiny_training(seed: u64) -> TrainingConfig {
    TrainingConfig {
        n_circuits: 60,
        gate_range: (2, 20),
        shots_per_label: 300,
        seed,
        ..TrainingConfig::default()
    }
}

fn train(devices: Vec<DeviceModel>) -> TrainedFleet {
    let params = ForestParams {
        n_trees: 8,
        ..ForestParams::default()
    };
    let forests = devices
        .iter()
        .enumerate()
        .map(|(i, d)| fit_forest(&gen_training_set(d, &tiny_training(i as u64)), &params).unwrap())
        .collect();
    TrainedFleet::new(devices, forests).unwrap()
}

fn quiet_fleet() -> &'static TrainedFleet {
    static FLEET: OnceLock<TrainedFleet> = OnceLock::new();
    FLEET.get_or_init(|| {
        let all: Vec<usize> = (0..27).collect();
        let regions = [&all[0..12], &all[8..20], &all[15..27]];
        let devices = regions
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let g = heavy_hex_region(r);
                let snaps = (1..=2).map(|d| CalibrationSnapshot::noiseless(&g, d)).collect();
                DeviceModel::new(format!("quiet{i}"), g, snaps).unwrap()
            })
            .collect();
        train(devices)
    })
}

fn noisy_fleet() -> &'static TrainedFleet {
    static FLEET: OnceLock<TrainedFleet> = OnceLock::new();
    FLEET.get_or_init(|| train(default_fleet(&FleetConfig { days: 3, ..FleetConfig::default() })))
}

#[test]
fn noiseless_devices_reproduce_the_ideal_output() {
    let fleet = quiet_fleet();
    let cfg = ExperimentConfig::default();
    for c in [bench::bell(), bench::tof(), bench::iqft()] {
        for t in Technique::ALL {
            let out = run_technique(t, &c, fleet, 1, &cfg, 1, 11).unwrap();
            assert!(out.record.tvd <= 2.0, "{} {} tvd {}", c.name(), t.label(), out.record.tvd);
            assert_eq!(out.counts.total(), cfg.total_shots);
            assert_eq!(out.shots.iter().sum::<u64>(), cfg.total_shots);
        }
    }
}

#[test]
fn equaldist_splits_evenly_over_the_map_set() {
    let cfg = ExperimentConfig::default();
    let out = run_technique(Technique::EqualDist, &bench::cat(), quiet_fleet(), 0, &cfg, 2, 5).unwrap();
    assert_eq!(out.shots.len(), 12);
    assert_eq!(out.shots.iter().filter(|&&s| s == 2667).count(), 8);
    assert_eq!(out.shots.iter().filter(|&&s| s == 2666).count(), 4);
}

#[test]
fn anchor_picks_from_the_equaldist_map_set() {
    let fleet = noisy_fleet();
    let cfg = ExperimentConfig::default();
    let c = bench::qaoa();
    let anchor = run_anchor(&c, fleet, 2, &cfg, 2, 77).unwrap();
    let equal = run_technique(Technique::EqualDist, &c, fleet, 2, &cfg, 2, 77).unwrap();
    // the confidence filter keeps ceil(2m/3) maps
    assert_eq!(anchor.map_indices.len(), 8);
    for (map, &j) in anchor.maps.iter().zip(&anchor.map_indices) {
        assert_eq!(map.assignment, equal.maps[j].assignment);
        assert_eq!(map.origin, equal.maps[j].origin);
    }
}

#[test]
fn anchor_plan_honours_epsilon() {
    let fleet = noisy_fleet();
    for eps in [0.0, 0.1, 0.5] {
        let cfg = ExperimentConfig {
            epsilon: eps,
            ..ExperimentConfig::default()
        };
        let out = run_anchor(&bench::add(), fleet, 0, &cfg, 1, 3).unwrap();
        let plan = out.plan.unwrap();
        assert!(plan.epsilon_used >= eps);
        let e = plan.epsilon_used;
        for &a in &plan.equalized_tvd {
            for &b in &plan.equalized_tvd {
                assert!(a <= (1.0 + e) * b + 1e-9, "eps {e}: {a} vs {b}");
            }
        }
        assert_eq!(plan.computers[0], "dev0");
        assert_eq!(plan.computers.len(), 5);
    }
}

#[test]
fn runs_are_deterministic() {
    let fleet = noisy_fleet();
    let cfg = ExperimentConfig::default();
    for t in Technique::ALL {
        let a = run_technique(t, &bench::bell(), fleet, 3, &cfg, 3, 42).unwrap();
        let b = run_technique(t, &bench::bell(), fleet, 3, &cfg, 3, 42).unwrap();
        assert_eq!(a.counts, b.counts, "{}", t.label());
        assert_eq!(a.record.tvd, b.record.tvd);
    }
}

#[test]
fn k_below_two_is_rejected() {
    let cfg = ExperimentConfig {
        k: Some(1),
        ..ExperimentConfig::default()
    };
    let err = run_anchor(&bench::bell(), quiet_fleet(), 0, &cfg, 1, 1).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)));
}

#[test]
fn k_limits_the_lp_to_the_first_devices() {
    let cfg = ExperimentConfig {
        k: Some(2),
        ..ExperimentConfig::default()
    };
    let out = run_anchor(&bench::bell(), noisy_fleet(), 3, &cfg, 1, 1).unwrap();
    assert_eq!(out.plan.unwrap().computers, vec!["dev3", "dev0"]);
}

#[test]
fn zero_shots_are_rejected() {
    let cfg = ExperimentConfig {
        total_shots: 0,
        ..ExperimentConfig::default()
    };
    assert!(run_technique(Technique::Optimap, &bench::bell(), quiet_fleet(), 0, &cfg, 1, 1).is_err());
}

#[test]
fn spatial_experiment_shape_and_order() {
    let cfg = ExperimentConfig {
        circuits: vec!["tel".into(), "BELL".into()],
        techniques: vec![Technique::Optimap, Technique::Anchor],
        runs_per_cell: 2,
        total_shots: 2000,
        ..ExperimentConfig::default()
    };
    let recs = experiment_spatial(quiet_fleet(), &cfg).unwrap();
    assert_eq!(recs.len(), 2 * 2 * 3 * 2);
    assert_eq!(recs[0].circuit, "TEL");
    assert_eq!(recs[0].technique, Technique::Optimap);
    assert_eq!(recs.last().unwrap().circuit, "BELL");
    assert!(recs.iter().all(|r| r.day == 1));
    let again = experiment_spatial(quiet_fleet(), &cfg).unwrap();
    let key = |r: &RunRecord| (r.technique, r.circuit.clone(), r.device.clone(), r.tvd.to_bits(), r.seed);
    assert!(recs.iter().map(key).eq(again.iter().map(key)));
}

#[test]
fn unknown_benchmark_is_a_config_error() {
    let cfg = ExperimentConfig {
        circuits: vec!["nope".into()],
        ..ExperimentConfig::default()
    };
    assert!(matches!(
        experiment_spatial(quiet_fleet(), &cfg),
        Err(PipelineError::Config(_))
    ));
}
