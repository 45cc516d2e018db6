//! Coupling graphs, dated calibration snapshots and the synthetic drift model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("malformed device JSON: {0}")]
    Json(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("coupling graph is disconnected")]
    Disconnected,
    #[error("{what} = {value} is outside [0, 0.5]")]
    ProbabilityOutOfRange { what: String, value: f64 },
    #[error("qubit {qubit}: T2 = {t2} exceeds 2*T1 = {}", 2.0 * t1)]
    Coherence { qubit: usize, t1: f64, t2: f64 },
    #[error("device has no calibration snapshots")]
    NoSnapshots,
    #[error("snapshot days must be strictly increasing")]
    DaysNotIncreasing,
}

/// Undirected coupler between two physical qubits, stored with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    lo: usize,
    hi: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for Edge {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("edge key `{s}` is not of the form i-j"))?;
        let a = a.trim().parse().map_err(|_| format!("bad edge key `{s}`"))?;
        let b = b.trim().parse().map_err(|_| format!("bad edge key `{s}`"))?;
        Ok(Edge::new(a, b))
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingGraph {
    num_physical: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl CouplingGraph {
    pub fn new(num_physical: usize, edges: &[(usize, usize)]) -> Result<Self, DeviceError> {
        if num_physical == 0 {
            return Err(DeviceError::Schema("num_physical must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= num_physical || b >= num_physical {
                return Err(DeviceError::Schema(format!(
                    "edge ({a},{b}) references a qubit >= num_physical {num_physical}"
                )));
            }
            if a == b {
                return Err(DeviceError::Schema(format!("self-loop on qubit {a}")));
            }
            set.insert(Edge::new(a, b));
        }
        let edges: Vec<Edge> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); num_physical];
        for e in &edges {
            adjacency[e.lo].push(e.hi);
            adjacency[e.hi].push(e.lo);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let graph = Self {
            num_physical,
            edges,
            adjacency,
        };
        let all: Vec<usize> = (0..num_physical).collect();
        if !graph.is_connected_subset(&all) {
            return Err(DeviceError::Disconnected);
        }
        Ok(graph)
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted neighbour list.
    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.num_physical && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// True when `subset` is non-empty, duplicate-free and induces a connected subgraph.
    pub fn is_connected_subset(&self, subset: &[usize]) -> bool {
        if subset.is_empty() || subset.iter().any(|&q| q >= self.num_physical) {
            return false;
        }
        let mut member = vec![false; self.num_physical];
        for &q in subset {
            if member[q] {
                return false;
            }
            member[q] = true;
        }
        let mut seen = vec![false; self.num_physical];
        let mut queue = VecDeque::from([subset[0]]);
        seen[subset[0]] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if member[v] && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == subset.len()
    }

    /// BFS distances from `from` restricted to vertices with `allowed[v]`.
    /// Unreachable vertices get `usize::MAX`.
    pub fn distances_within(&self, from: usize, allowed: &[bool]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_physical];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if allowed[v] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// One calibration cycle of a device.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSnapshot {
    pub day: i64,
    pub err_1q: Vec<f64>,
    pub err_2q: BTreeMap<Edge, f64>,
    pub err_readout: Vec<f64>,
    pub t1_us: Vec<f64>,
    pub t2_us: Vec<f64>,
    pub dur_1q_ns: f64,
    pub dur_2q_ns: f64,
}

impl CalibrationSnapshot {
    /// Snapshot with every error rate zero and generous coherence times.
    pub fn noiseless(graph: &CouplingGraph, day: i64) -> Self {
        let n = graph.num_physical();
        Self {
            day,
            err_1q: vec![0.0; n],
            err_2q: graph.edges().iter().map(|&e| (e, 0.0)).collect(),
            err_readout: vec![0.0; n],
            t1_us: vec![100.0; n],
            t2_us: vec![100.0; n],
            dur_1q_ns: 35.0,
            dur_2q_ns: 400.0,
        }
    }

    /// Two-qubit error on the coupler `(a, b)`; zero if the pair is not coupled.
    pub fn err_cx(&self, a: usize, b: usize) -> f64 {
        self.err_2q.get(&Edge::new(a, b)).copied().unwrap_or(0.0)
    }

    /// Multiplies every error probability by `factor`, clamping to 0.5.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: f64| (v * factor).clamp(0.0, 0.5);
        let mut out = self.clone();
        out.err_1q.iter_mut().for_each(|v| *v = s(*v));
        out.err_readout.iter_mut().for_each(|v| *v = s(*v));
        out.err_2q.values_mut().for_each(|v| *v = s(*v));
        out
    }

    pub fn validate(&self, graph: &CouplingGraph) -> Result<(), DeviceError> {
        let n = graph.num_physical();
        for (label, v) in [
            ("err_1q", &self.err_1q),
            ("err_readout", &self.err_readout),
            ("t1_us", &self.t1_us),
            ("t2_us", &self.t2_us),
        ] {
            if v.len() != n {
                return Err(DeviceError::Schema(format!(
                    "day {}: {label} has {} entries, expected {n}",
                    self.day,
                    v.len()
                )));
            }
        }
        let keys: Vec<Edge> = self.err_2q.keys().copied().collect();
        if keys != graph.edges() {
            return Err(DeviceError::Schema(format!(
                "day {}: err_2q keys do not match the coupling graph edges",
                self.day
            )));
        }
        let check = |what: String, value: f64| {
            if (0.0..=0.5).contains(&value) {
                Ok(())
            } else {
                Err(DeviceError::ProbabilityOutOfRange { what, value })
            }
        };
        for (q, &p) in self.err_1q.iter().enumerate() {
            check(format!("err_1q[{q}]"), p)?;
        }
        for (q, &p) in self.err_readout.iter().enumerate() {
            check(format!("err_readout[{q}]"), p)?;
        }
        for (e, &p) in &self.err_2q {
            check(format!("err_2q[{e}]"), p)?;
        }
        for q in 0..n {
            let (t1, t2) = (self.t1_us[q], self.t2_us[q]);
            if !(t1 > 0.0 && t2 > 0.0 && t1.is_finite()) {
                return Err(DeviceError::Schema(format!(
                    "qubit {q}: coherence times must be positive"
                )));
            }
            if t2 > 2.0 * t1 {
                return Err(DeviceError::Coherence { qubit: q, t1, t2 });
            }
        }
        if !(self.dur_1q_ns > 0.0 && self.dur_2q_ns > 0.0) {
            return Err(DeviceError::Schema("gate durations must be positive".into()));
        }
        Ok(())
    }
}

/// A device: a coupling graph plus a dated series of calibrations.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    name: String,
    graph: CouplingGraph,
    snapshots: Vec<CalibrationSnapshot>,
}

#[derive(Serialize, Deserialize)]
struct DeviceJson {
    name: String,
    num_physical: usize,
    edges: Vec<[usize; 2]>,
    snapshots: Vec<CalibrationSnapshot>,
}

impl DeviceModel {
    pub fn new(
        name: impl Into<String>,
        graph: CouplingGraph,
        snapshots: Vec<CalibrationSnapshot>,
    ) -> Result<Self, DeviceError> {
        if snapshots.is_empty() {
            return Err(DeviceError::NoSnapshots);
        }
        if snapshots.windows(2).any(|w| w[0].day >= w[1].day) {
            return Err(DeviceError::DaysNotIncreasing);
        }
        for s in &snapshots {
            s.validate(&graph)?;
        }
        Ok(Self {
            name: name.into(),
            graph,
            snapshots,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    pub fn snapshots(&self) -> &[CalibrationSnapshot] {
        &self.snapshots
    }

    pub fn days(&self) -> Vec<i64> {
        self.snapshots.iter().map(|s| s.day).collect()
    }

    pub fn to_json(&self) -> String {
        let doc = DeviceJson {
            name: self.name.clone(),
            num_physical: self.graph.num_physical(),
            edges: self
                .graph
                .edges()
                .iter()
                .map(|e| [e.lo, e.hi])
                .collect(),
            snapshots: self.snapshots.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("device model serializes")
    }
}

/// Parses and validates a device description.
pub fn load_device(source: &str) -> Result<DeviceModel, DeviceError> {
    let doc: DeviceJson =
        serde_json::from_str(source).map_err(|e| DeviceError::Json(e.to_string()))?;
    let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
    let graph = CouplingGraph::new(doc.num_physical, &edges)?;
    DeviceModel::new(doc.name, graph, doc.snapshots)
}

/// Calibration in effect on `day`: the latest snapshot not after `day`, or the
/// earliest snapshot when `day` precedes all of them.
pub fn snapshot_at(model: &DeviceModel, day: i64) -> &CalibrationSnapshot {
    let idx = model.snapshots.partition_point(|s| s.day <= day);
    &model.snapshots[idx.saturating_sub(1)]
}

/// Clamped multiplicative random walk over every error rate of `base`.
///
/// Day `d` (for `d = 1..=days`, stamped `base.day + d`) multiplies each rate
/// by `exp(g)`, `g ~ N(0, drift_sigma)`, then clamps it to
/// `[base/10, min(0.5, base*10)]`. Each rate draws from its own stream, so the
/// output depends only on `(base, days, drift_sigma, seed)`.
pub fn synth_drift(
    base: &CalibrationSnapshot,
    days: usize,
    drift_sigma: f64,
    seed: u64,
) -> Vec<CalibrationSnapshot> {
    assert!(drift_sigma >= 0.0 && drift_sigma.is_finite(), "drift_sigma must be >= 0");
    let normal = Normal::new(0.0, drift_sigma).expect("valid sigma");
    let walk = |stream: [u64; 2], start: f64| -> Vec<f64> {
        let mut rng = seed::rng(seed::mix_all(seed, &stream));
        let (floor, ceil) = (start / 10.0, (start * 10.0).min(0.5));
        let mut r = start;
        (0..days)
            .map(|_| {
                let g: f64 = normal.sample(&mut rng);
                r = (r * g.exp()).clamp(floor, ceil);
                r
            })
            .collect()
    };
    let one_q: Vec<Vec<f64>> = base
        .err_1q
        .iter()
        .enumerate()
        .map(|(q, &r)| walk([1, q as u64], r))
        .collect();
    let readout: Vec<Vec<f64>> = base
        .err_readout
        .iter()
        .enumerate()
        .map(|(q, &r)| walk([2, q as u64], r))
        .collect();
    let two_q: Vec<(Edge, Vec<f64>)> = base
        .err_2q
        .iter()
        .map(|(&e, &r)| (e, walk([3, ((e.lo as u64) << 32) | e.hi as u64], r)))
        .collect();

    (0..days)
        .map(|d| CalibrationSnapshot {
            day: base.day + d as i64 + 1,
            err_1q: one_q.iter().map(|w| w[d]).collect(),
            err_2q: two_q.iter().map(|(e, w)| (*e, w[d])).collect(),
            err_readout: readout.iter().map(|w| w[d]).collect(),
            ..base.clone()
        })
        .collect()
}
