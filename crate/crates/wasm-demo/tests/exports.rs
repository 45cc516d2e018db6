use anchor_wasm_demo::{generate_maps_json, plan_shots_json, simulate_json};
use serde_json::Value;

const BELL: &str = "qubits 2\nrz 0 pi/2; sx 0; rz 0 pi/2\ncx 0 1\nmeasure all\n";

#[test]
fn plan_matches_the_two_computer_example() {
    let out = plan_shots_json("[[0.12, 0.22], [0.18, 0.14]]", 0.0, 32000, 0).unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["shots"], serde_json::json!([25600, 6400]));
}

#[test]
fn plan_rejects_a_single_row() {
    assert!(plan_shots_json("[[0.1, 0.2]]", 0.1, 100, 0).is_err());
    assert!(plan_shots_json("not json", 0.1, 100, 0).is_err());
}

#[test]
fn maps_and_simulation() {
    let maps: Vec<Value> = serde_json::from_str(&generate_maps_json(BELL, 0, 1, 6, 3).unwrap()).unwrap();
    assert_eq!(maps.len(), 6);
    assert_eq!(maps[0]["origin"], "OPTI");
    assert_eq!(maps[5]["origin"], "RAND");
    let sim: Value = serde_json::from_str(&simulate_json(BELL, 0, 1, 6, 0, 4000, 3).unwrap()).unwrap();
    let total: u64 = sim["counts"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 4000);
    let t = sim["tvd_pct"].as_f64().unwrap();
    assert!((0.0..=100.0).contains(&t));
    assert_eq!(simulate_json(BELL, 0, 1, 6, 0, 4000, 3).unwrap(), simulate_json(BELL, 0, 1, 6, 0, 4000, 3).unwrap());
}

#[test]
fn bad_inputs_are_errors() {
    assert!(generate_maps_json("qubits 2\nfoo 1", 0, 1, 4, 0).is_err());
    assert!(generate_maps_json(BELL, 9, 1, 4, 0).is_err());
    assert!(simulate_json(BELL, 0, 1, 4, 4, 10, 0).is_err());
}
