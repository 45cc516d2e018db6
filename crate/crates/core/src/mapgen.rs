//! Candidate circuit maps: noise-adaptive growth (OPTI), random walks (RAND)
//! and greedy shortest-path SWAP routing.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{decompose_to_basis, Circuit, Gate};
use crate::device::{snapshot_at, CalibrationSnapshot, CouplingGraph, DeviceModel};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("circuit needs {needed} qubits but the device has {available}")]
    TooManyQubits { needed: usize, available: usize },
    #[error("map count m = {0} must be even and at least 2")]
    InvalidMapCount(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MapOrigin {
    Opti,
    Rand,
}

/// A logical circuit laid out and routed on a device.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitMap {
    pub device: String,
    /// `assignment[l]` is the physical qubit initially holding logical qubit `l`.
    pub assignment: Vec<usize>,
    /// Basis-gate circuit over the device's physical qubits; every CX is on a coupler.
    pub routed: Circuit,
    pub origin: MapOrigin,
    /// Physical position of each logical qubit after all inserted SWAPs.
    pub final_layout: Vec<usize>,
}

/// The routed circuit relabelled onto `0..q`, for simulation.
#[derive(Clone, Debug)]
pub struct CompactCircuit {
    pub circuit: Circuit,
    /// Local index to physical qubit.
    pub physical: Vec<usize>,
    /// For each measured logical qubit (in logical order), the local qubit read out.
    pub readout: Vec<usize>,
}

impl CompactCircuit {
    /// Converts a local basis-state index to the logical outcome index.
    pub fn logical_outcome(&self, local: usize) -> usize {
        self.readout
            .iter()
            .enumerate()
            .fold(0, |acc, (bit, &lq)| acc | (local >> lq & 1) << bit)
    }
}

impl CircuitMap {
    pub fn compact(&self) -> CompactCircuit {
        let n_phys = self.routed.num_qubits();
        let mut local_of = vec![usize::MAX; n_phys];
        for (i, &p) in self.assignment.iter().enumerate() {
            local_of[p] = i;
        }
        let gates = self
            .routed
            .gates()
            .iter()
            .map(|g| g.relabel(|p| local_of[p]));
        let circuit = Circuit::from_gates(self.assignment.len(), self.routed.name(), gates)
            .expect("routed gates stay inside the assignment");
        let readout = self
            .final_layout
            .iter()
            .filter(|&&p| self.routed.is_measured(p))
            .map(|&p| local_of[p])
            .collect();
        CompactCircuit {
            circuit,
            physical: self.assignment.clone(),
            readout,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "device": self.device,
            "assignment": self.assignment,
            "origin": self.origin,
            "final_layout": self.final_layout,
            "routed": self.routed.to_text(),
        })
    }
}

fn check_fits(q: usize, graph: &CouplingGraph) -> Result<(), MapError> {
    if q > graph.num_physical() {
        Err(MapError::TooManyQubits {
            needed: q,
            available: graph.num_physical(),
        })
    } else {
        Ok(())
    }
}

fn frontier(graph: &CouplingGraph, chosen: &[bool]) -> BTreeSet<usize> {
    (0..graph.num_physical())
        .filter(|&v| chosen[v])
        .flat_map(|v| graph.neighbors(v).iter().copied())
        .filter(|&n| !chosen[n])
        .collect()
}

/// Random-walk map: a uniformly random start qubit, then `q - 1` uniformly
/// random picks from the neighbours of the qubits chosen so far.
pub fn randmap(q: usize, graph: &CouplingGraph, seed: u64) -> Result<Vec<usize>, MapError> {
    check_fits(q, graph)?;
    let mut rng = seed::rng(seed);
    let mut chosen = vec![false; graph.num_physical()];
    let start = rng.random_range(0..graph.num_physical());
    chosen[start] = true;
    let mut out = vec![start];
    while out.len() < q {
        let options: Vec<usize> = frontier(graph, &chosen).into_iter().collect();
        let pick = options[rng.random_range(0..options.len())];
        chosen[pick] = true;
        out.push(pick);
    }
    Ok(out)
}

/// Index of the lowest score, or a softmax draw when `temperature > 0`.
/// Scores are compared relative to their mean so the temperature is scale-free.
fn select(scores: &[f64], temperature: f64, rng: &mut seed::Rng) -> usize {
    let (best, min) = scores
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    if temperature <= 0.0 || scores.len() == 1 {
        return best;
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let scale = temperature * mean.max(1e-12);
    let weights: Vec<f64> = scores.iter().map(|s| (-(s - min) / scale).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Noise-adaptive map.
///
/// Starts from the coupler with the lowest two-qubit error, then grows one
/// frontier qubit at a time by `err_2q(connecting edge) + err_1q + err_readout`.
/// Temperature 0 is a deterministic argmin (lowest index wins ties); a
/// positive temperature turns every choice into a seeded softmax draw. The
/// chosen qubits are then assigned to logical qubits so that CX pairs sit as
/// close as possible.
pub fn optimap(
    c: &Circuit,
    snapshot: &CalibrationSnapshot,
    graph: &CouplingGraph,
    temperature: f64,
    seed: u64,
) -> Result<Vec<usize>, MapError> {
    let q = c.num_qubits();
    check_fits(q, graph)?;
    let mut rng = seed::rng(seed);
    let n = graph.num_physical();
    let qubit_cost = |v: usize| snapshot.err_1q[v] + snapshot.err_readout[v];
    let mut chosen = vec![false; n];
    let mut order = Vec::with_capacity(q);

    if q == 1 || graph.edges().is_empty() {
        let scores: Vec<f64> = (0..n).map(qubit_cost).collect();
        let v = select(&scores, temperature, &mut rng);
        chosen[v] = true;
        order.push(v);
    } else {
        let scores: Vec<f64> = graph
            .edges()
            .iter()
            .map(|e| {
                let (a, b) = e.endpoints();
                snapshot.err_cx(a, b)
            })
            .collect();
        let (a, b) = graph.edges()[select(&scores, temperature, &mut rng)].endpoints();
        chosen[a] = true;
        chosen[b] = true;
        order.extend([a, b]);
    }
    while order.len() < q {
        let options: Vec<usize> = frontier(graph, &chosen).into_iter().collect();
        let scores: Vec<f64> = options
            .iter()
            .map(|&v| {
                let link = graph
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| chosen[u])
                    .map(|&u| snapshot.err_cx(u, v))
                    .fold(f64::INFINITY, f64::min);
                link + qubit_cost(v)
            })
            .collect();
        let v = options[select(&scores, temperature, &mut rng)];
        chosen[v] = true;
        order.push(v);
    }
    Ok(place(c, &order, graph))
}

/// Largest register for which placement searches every permutation.
const EXHAUSTIVE_PLACEMENT: usize = 7;

/// Assigns logical qubits to the physical set `subset` minimizing
/// `sum over CX of (distance - 1)` inside the induced subgraph. Ties keep the
/// lexicographically first permutation, so the identity wins when nothing is
/// gained.
fn place(c: &Circuit, subset: &[usize], graph: &CouplingGraph) -> Vec<usize> {
    let q = subset.len();
    if q > EXHAUSTIVE_PLACEMENT || q < 3 {
        return subset.to_vec();
    }
    let mut weight = vec![vec![0usize; q]; q];
    for g in c.gates() {
        if let Gate::Cx(a, b) = *g {
            weight[a.min(b)][a.max(b)] += 1;
        }
    }
    let mut allowed = vec![false; graph.num_physical()];
    subset.iter().for_each(|&p| allowed[p] = true);
    let dist: Vec<Vec<usize>> = subset
        .iter()
        .map(|&p| {
            let d = graph.distances_within(p, &allowed);
            subset.iter().map(|&o| d[o]).collect()
        })
        .collect();
    let cost = |perm: &[usize]| -> usize {
        let mut total = 0;
        for a in 0..q {
            for b in a + 1..q {
                if weight[a][b] > 0 {
                    total += weight[a][b] * (dist[perm[a]][perm[b]] - 1);
                }
            }
        }
        total
    };
    let mut perm: Vec<usize> = (0..q).collect();
    let mut best = perm.clone();
    let mut best_cost = cost(&perm);
    while best_cost > 0 && next_permutation(&mut perm) {
        let c = cost(&perm);
        if c < best_cost {
            best_cost = c;
            best.clone_from(&perm);
        }
    }
    best.iter().map(|&i| subset[i]).collect()
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Lays `c` out on `assignment` and inserts SWAPs (as three CX) so every CX
/// acts on a coupler.
///
/// For a CX whose endpoints are not adjacent, the control is walked towards
/// the target along a shortest path inside the induced subgraph, taking the
/// lowest-index next hop on ties. Measurements are deferred to the end and
/// follow the final layout.
pub fn route(
    c: &Circuit,
    assignment: &[usize],
    graph: &CouplingGraph,
    device: &str,
    origin: MapOrigin,
) -> CircuitMap {
    assert_eq!(assignment.len(), c.num_qubits(), "one physical qubit per logical qubit");
    assert!(graph.is_connected_subset(assignment), "assignment must be connected");
    let basis = decompose_to_basis(c);
    let n = graph.num_physical();
    let mut allowed = vec![false; n];
    assignment.iter().for_each(|&p| allowed[p] = true);
    let mut phys_of = assignment.to_vec();
    let mut logical_at = vec![usize::MAX; n];
    for (l, &p) in assignment.iter().enumerate() {
        logical_at[p] = l;
    }

    let mut routed = Circuit::new(n, c.name()).expect("device has qubits");
    let mut emit = |g: Gate| routed.push(g).expect("routed gate is valid");
    for g in basis.gates() {
        match *g {
            Gate::Measure(_) => {}
            Gate::Cx(a, b) => {
                loop {
                    let (pa, pb) = (phys_of[a], phys_of[b]);
                    if graph.has_edge(pa, pb) {
                        break;
                    }
                    let dist = graph.distances_within(pb, &allowed);
                    let hop = graph
                        .neighbors(pa)
                        .iter()
                        .copied()
                        .find(|&v| allowed[v] && dist[v] + 1 == dist[pa])
                        .expect("connected assignment has a shortest path");
                    emit(Gate::Cx(pa, hop));
                    emit(Gate::Cx(hop, pa));
                    emit(Gate::Cx(pa, hop));
                    let other = logical_at[hop];
                    logical_at.swap(pa, hop);
                    phys_of[a] = hop;
                    phys_of[other] = pa;
                }
                emit(Gate::Cx(phys_of[a], phys_of[b]));
            }
            other => emit(other.relabel(|l| phys_of[l])),
        }
    }
    for (l, &p) in phys_of.iter().enumerate() {
        if c.is_measured(l) {
            emit(Gate::Measure(p));
        }
    }
    CircuitMap {
        device: device.to_string(),
        assignment: assignment.to_vec(),
        routed,
        origin,
        final_layout: phys_of,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSetConfig {
    /// Maps per device; half OPTI, half RAND.
    pub m: usize,
    pub seed: u64,
}

impl MapSetConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        if self.m < 2 || self.m % 2 != 0 {
            Err(MapError::InvalidMapCount(self.m))
        } else {
            Ok(())
        }
    }
}

const DUPLICATE_ATTEMPTS: u64 = 20;

/// OPTI temperature schedule: 0, 0.5, 1.0, ...
pub fn opti_temperature(index: usize) -> f64 {
    0.5 * index as f64
}

/// The `m` candidate maps for `c` on `model` using the calibration of `day`:
/// `m/2` OPTI maps (temperatures 0, 0.5, 1.0, ...) followed by `m/2` RAND
/// maps. A map that repeats an earlier assignment is redrawn with a fresh
/// seed up to 20 times, then kept.
pub fn generate_map_set(
    c: &Circuit,
    model: &DeviceModel,
    day: i64,
    cfg: &MapSetConfig,
) -> Result<Vec<CircuitMap>, MapError> {
    cfg.validate()?;
    check_fits(c.num_qubits(), model.graph())?;
    let basis = decompose_to_basis(c);
    let snapshot = snapshot_at(model, day);
    let graph = model.graph();
    let half = cfg.m / 2;
    let mut assignments: Vec<(Vec<usize>, MapOrigin)> = Vec::with_capacity(cfg.m);

    for (origin, stream) in [(MapOrigin::Opti, 0u64), (MapOrigin::Rand, 1u64)] {
        for i in 0..half {
            let base = seed::mix_all(cfg.seed, &[stream, i as u64]);
            let mut pick = None;
            for attempt in 0..DUPLICATE_ATTEMPTS {
                let s = seed::mix(base, attempt);
                let a = match origin {
                    MapOrigin::Opti => optimap(&basis, snapshot, graph, opti_temperature(i), s)?,
                    MapOrigin::Rand => randmap(basis.num_qubits(), graph, s)?,
                };
                let duplicate = assignments.iter().any(|(prev, _)| *prev == a);
                pick = Some(a);
                if !duplicate {
                    break;
                }
            }
            assignments.push((pick.expect("at least one attempt"), origin));
        }
    }
    Ok(assignments
        .into_iter()
        .map(|(a, origin)| route(&basis, &a, graph, model.name(), origin))
        .collect())
}
