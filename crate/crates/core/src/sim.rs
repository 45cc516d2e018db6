//! Exact statevector simulation, Monte-Carlo Pauli-noise sampling, TVD and ESP.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::device::CalibrationSnapshot;
use crate::mapgen::CircuitMap;
use crate::seed;

/// Largest register simulated exactly (2^14 amplitudes).
pub const MAX_SIM_QUBITS: usize = 14;

const SHOT_CHUNK: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{0} qubits exceeds the exact-simulation limit of {MAX_SIM_QUBITS}")]
    TooManyQubits(usize),
    #[error("qubit {0} is never measured")]
    Unmeasured(usize),
    #[error("shot count must be at least 1")]
    NoShots,
    #[error("probabilities must be non-negative and sum to 1")]
    NotNormalized,
}

/// Probability distribution over `num_bits`-bit outcomes. Outcome index bit
/// `l` is the value of logical qubit `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    num_bits: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(num_bits: usize, probs: Vec<f64>) -> Result<Self, SimError> {
        let total: f64 = probs.iter().sum();
        if probs.len() != 1 << num_bits || probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9
        {
            return Err(SimError::NotNormalized);
        }
        Ok(Self { num_bits, probs })
    }

    pub fn uniform(num_bits: usize) -> Self {
        let n = 1usize << num_bits;
        Self {
            num_bits,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_counts(result: &ShotResult) -> Self {
        let total = result.total as f64;
        Self {
            num_bits: result.num_bits,
            probs: result.counts.iter().map(|&c| c as f64 / total).collect(),
        }
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    /// Non-zero entries keyed by bitstring.
    pub fn entries(&self) -> Vec<(String, f64)> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (bitstring(i, self.num_bits), p))
            .collect()
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (k, v) in &entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Outcome histogram of a batch of shots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotResult {
    num_bits: usize,
    counts: Vec<u64>,
    total: u64,
}

impl ShotResult {
    pub fn empty(num_bits: usize) -> Self {
        Self {
            num_bits,
            counts: vec![0; 1 << num_bits],
            total: 0,
        }
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Adds another histogram over the same outcome space.
    pub fn merge(&mut self, other: &ShotResult) {
        assert_eq!(self.num_bits, other.num_bits, "outcome spaces differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn entries(&self) -> Vec<(String, u64)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (bitstring(i, self.num_bits), c))
            .collect()
    }
}

impl Serialize for ShotResult {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut map = s.serialize_map(Some(entries.len()))?;
        for (k, v) in &entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Qubit 0 is the leftmost character.
pub fn bitstring(outcome: usize, num_bits: usize) -> String {
    (0..num_bits)
        .map(|b| if outcome >> b & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Total variation distance in percent: `50 * sum |P(x) - Q(x)|`.
pub fn tvd(p: &Distribution, q: &Distribution) -> f64 {
    let n = p.probs.len().max(q.probs.len());
    let sum: f64 = (0..n).map(|i| (p.prob(i) - q.prob(i)).abs()).sum();
    (50.0 * sum).clamp(0.0, 100.0)
}

type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Mat2 {
    let (s, co) = (theta / 2.0).sin_cos();
    [
        [c(co, 0.0), -Complex64::from_polar(s, lambda)],
        [Complex64::from_polar(s, phi), Complex64::from_polar(co, phi + lambda)],
    ]
}

pub(crate) fn gate_matrix(g: &Gate) -> Option<Mat2> {
    Some(match *g {
        Gate::X(_) => [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        Gate::Sx(_) => [[c(0.5, 0.5), c(0.5, -0.5)], [c(0.5, -0.5), c(0.5, 0.5)]],
        Gate::Rz(_, a) => [
            [Complex64::from_polar(1.0, -a / 2.0), c(0.0, 0.0)],
            [c(0.0, 0.0), Complex64::from_polar(1.0, a / 2.0)],
        ],
        Gate::U3(_, t, p, l) => u3_matrix(t, p, l),
        Gate::Cx(..) | Gate::Measure(_) => return None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Pauli {
    I,
    X,
    Y,
    Z,
}

const PAULIS: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

#[derive(Clone, Debug)]
pub(crate) struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub(crate) fn zero(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { amps }
    }

    fn apply_1q(&mut self, q: usize, m: &Mat2) {
        let stride = 1usize << q;
        for base in (0..self.amps.len()).step_by(stride << 1) {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    fn apply_x(&mut self, q: usize) {
        let stride = 1usize << q;
        for i in 0..self.amps.len() {
            if i & stride == 0 {
                self.amps.swap(i, i | stride);
            }
        }
    }

    fn apply_cx(&mut self, ctl: usize, tgt: usize) {
        let (cm, tm) = (1usize << ctl, 1usize << tgt);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    fn apply_pauli(&mut self, q: usize, p: Pauli) {
        let m = 1usize << q;
        match p {
            Pauli::I => {}
            Pauli::X => self.apply_x(q),
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m != 0 {
                        *a = -*a;
                    }
                }
            }
            Pauli::Y => {
                let i_unit = Complex64::new(0.0, 1.0);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | m]);
                        self.amps[i] = -i_unit * a1;
                        self.amps[i | m] = i_unit * a0;
                    }
                }
            }
        }
    }

    /// Projects qubit `q` by a Born-rule draw `u` and resets it to |0>.
    fn reset(&mut self, q: usize, u: f64) {
        let m = 1usize << q;
        let p1: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let one = u < p1;
        let norm = if one { p1 } else { 1.0 - p1 }.max(f64::MIN_POSITIVE).sqrt();
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let src = if one { self.amps[i | m] } else { self.amps[i] };
                self.amps[i] = src / norm;
                self.amps[i | m] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub(crate) fn apply_gate(&mut self, g: &Gate) {
        match *g {
            Gate::X(q) => self.apply_x(q),
            Gate::Cx(ctl, tgt) => self.apply_cx(ctl, tgt),
            Gate::Measure(_) => {}
            ref other => {
                let q = other.qubits()[0];
                self.apply_1q(q, &gate_matrix(other).expect("single-qubit unitary"));
            }
        }
    }

    fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn check_size(n: usize) -> Result<(), SimError> {
    if n > MAX_SIM_QUBITS {
        Err(SimError::TooManyQubits(n))
    } else {
        Ok(())
    }
}

/// Exact output distribution of a fully measured circuit.
pub fn ideal_distribution(c: &Circuit) -> Result<Distribution, SimError> {
    check_size(c.num_qubits())?;
    if let Some(q) = (0..c.num_qubits()).find(|&q| !c.is_measured(q)) {
        return Err(SimError::Unmeasured(q));
    }
    let mut sv = StateVector::zero(c.num_qubits());
    for g in c.gates() {
        sv.apply_gate(g);
    }
    Ok(Distribution {
        num_bits: c.num_qubits(),
        probs: normalize(sv.probabilities()),
    })
}

fn normalize(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Noise-free output distribution of a routed map, over the logical bits.
pub fn map_ideal_distribution(map: &CircuitMap) -> Result<Distribution, SimError> {
    let compact = map.compact();
    check_size(compact.circuit.num_qubits())?;
    let mut sv = StateVector::zero(compact.circuit.num_qubits());
    for g in compact.circuit.gates() {
        sv.apply_gate(g);
    }
    let local = sv.probabilities();
    let mut probs = vec![0.0; 1 << compact.readout.len()];
    for (idx, p) in local.iter().enumerate() {
        probs[compact.logical_outcome(idx)] += p;
    }
    Ok(Distribution {
        num_bits: compact.readout.len(),
        probs: normalize(probs),
    })
}

/// Optional channels on top of the stochastic Pauli and readout noise.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseOptions {
    /// Stochastic reset-to-|0> after each gate with probability
    /// `1 - exp(-duration / T1)` on every qubit it touches.
    pub idle_decay: bool,
}

#[derive(Clone, Copy, Debug)]
enum SiteKind {
    OneQubit(usize),
    TwoQubit(usize, usize),
    Reset(usize),
}

/// A place where an error may strike: right after gate `after`.
#[derive(Clone, Copy, Debug)]
struct Site {
    after: usize,
    kind: SiteKind,
}

struct NoisePlan {
    ops: Vec<Gate>,
    sites: Vec<Site>,
    /// Prefix sums of hazards `-ln(1 - p)`, length `sites.len() + 1`.
    hazard: Vec<f64>,
    readout_local: Vec<usize>,
    readout_err: Vec<f64>,
    ideal_cdf: Vec<f64>,
    num_local: usize,
}

fn cdf(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

impl NoisePlan {
    fn new(map: &CircuitMap, snapshot: &CalibrationSnapshot, opts: NoiseOptions) -> Self {
        let compact = map.compact();
        let phys = &compact.physical;
        let ops: Vec<Gate> = compact
            .circuit
            .gates()
            .iter()
            .filter(|g| !matches!(g, Gate::Measure(_)))
            .copied()
            .collect();
        let mut sites = Vec::new();
        let mut probs = Vec::new();
        for (i, g) in ops.iter().enumerate() {
            match *g {
                Gate::Rz(..) => continue,
                Gate::Cx(a, b) => {
                    sites.push(Site {
                        after: i,
                        kind: SiteKind::TwoQubit(a, b),
                    });
                    probs.push(snapshot.err_cx(phys[a], phys[b]));
                }
                ref other => {
                    let q = other.qubits()[0];
                    sites.push(Site {
                        after: i,
                        kind: SiteKind::OneQubit(q),
                    });
                    probs.push(snapshot.err_1q[phys[q]]);
                }
            }
            if opts.idle_decay {
                let dur = if g.is_two_qubit() {
                    snapshot.dur_2q_ns
                } else {
                    snapshot.dur_1q_ns
                };
                for &q in g.qubits().iter() {
                    let t1_ns = snapshot.t1_us[phys[q]] * 1e3;
                    sites.push(Site {
                        after: i,
                        kind: SiteKind::Reset(q),
                    });
                    probs.push(1.0 - (-dur / t1_ns).exp());
                }
            }
        }
        let mut hazard = Vec::with_capacity(probs.len() + 1);
        hazard.push(0.0);
        let mut acc = 0.0;
        for p in probs {
            acc += -(1.0 - p.min(1.0 - 1e-15)).ln();
            hazard.push(acc);
        }
        let mut sv = StateVector::zero(compact.circuit.num_qubits());
        for g in &ops {
            sv.apply_gate(g);
        }
        Self {
            readout_err: compact
                .readout
                .iter()
                .map(|&l| snapshot.err_readout[phys[l]])
                .collect(),
            readout_local: compact.readout,
            ideal_cdf: cdf(&normalize(sv.probabilities())),
            num_local: compact.circuit.num_qubits(),
            ops,
            sites,
            hazard,
        }
    }

    /// Error events of one shot as `(site index, payload)`; the payload
    /// selects the Pauli (or is unused for resets).
    fn draw_events(&self, rng: &mut seed::Rng, events: &mut Vec<(u32, u8)>) {
        events.clear();
        let total = *self.hazard.last().unwrap_or(&0.0);
        let mut pos = 0usize;
        let mut level = 0.0;
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let e = -u.ln();
            let target = level + e;
            if e <= 0.0 || target >= total {
                break;
            }
            // first site k >= pos whose cumulative hazard reaches target
            let k = pos + self.hazard[pos + 1..].partition_point(|&h| h < target);
            if k >= self.sites.len() {
                break;
            }
            let payload = match self.sites[k].kind {
                SiteKind::OneQubit(_) => rng.random_range(1..4u8),
                SiteKind::TwoQubit(..) => rng.random_range(1..16u8),
                SiteKind::Reset(_) => 0,
            };
            events.push((k as u32, payload));
            level = self.hazard[k + 1];
            pos = k + 1;
        }
    }

    fn trajectory(&self, events: &[(u32, u8)], rng: &mut seed::Rng) -> Vec<f64> {
        let mut sv = StateVector::zero(self.num_local);
        let mut next = 0;
        for (i, g) in self.ops.iter().enumerate() {
            sv.apply_gate(g);
            while next < events.len() && self.sites[events[next].0 as usize].after == i {
                let (site, payload) = events[next];
                match self.sites[site as usize].kind {
                    SiteKind::OneQubit(q) => sv.apply_pauli(q, PAULIS[payload as usize]),
                    SiteKind::TwoQubit(a, b) => {
                        sv.apply_pauli(a, PAULIS[(payload / 4) as usize]);
                        sv.apply_pauli(b, PAULIS[(payload % 4) as usize]);
                    }
                    SiteKind::Reset(q) => sv.reset(q, rng.random::<f64>()),
                }
                next += 1;
            }
        }
        cdf(&normalize(sv.probabilities()))
    }

    fn run_chunk(&self, seed: u64, shots: std::ops::Range<usize>, num_bits: usize) -> Vec<u64> {
        let mut counts = vec![0u64; 1 << num_bits];
        let mut cache: HashMap<Vec<(u32, u8)>, Vec<f64>> = HashMap::new();
        let mut events = Vec::new();
        for s in shots {
            let mut rng = seed::rng(seed::mix(seed, s as u64));
            self.draw_events(&mut rng, &mut events);
            let has_reset = events
                .iter()
                .any(|&(k, _)| matches!(self.sites[k as usize].kind, SiteKind::Reset(_)));
            let u: f64;
            let local = if events.is_empty() {
                u = rng.random();
                self.ideal_cdf.partition_point(|&x| x <= u)
            } else if has_reset {
                let dist = self.trajectory(&events, &mut rng);
                u = rng.random();
                dist.partition_point(|&x| x <= u)
            } else {
                let dist = cache
                    .entry(events.clone())
                    .or_insert_with(|| self.trajectory(&events, &mut rng));
                u = rng.random();
                dist.partition_point(|&x| x <= u)
            };
            let mut outcome = 0usize;
            for (bit, (&lq, &p)) in self.readout_local.iter().zip(&self.readout_err).enumerate() {
                let mut v = local >> lq & 1;
                if p > 0.0 && rng.random::<f64>() < p {
                    v ^= 1;
                }
                outcome |= v << bit;
            }
            counts[outcome] += 1;
        }
        counts
    }
}

/// Monte-Carlo shots of a routed map under a calibration snapshot.
///
/// Each non-RZ gate is followed, with its calibrated error probability, by a
/// uniformly random non-identity Pauli on its qubits; each measured bit flips
/// with the qubit's readout error. Shot `s` draws from `mix(seed, s)`, so
/// the counts are independent of chunking and thread count.
pub fn sample_noisy(
    map: &CircuitMap,
    snapshot: &CalibrationSnapshot,
    shots: u64,
    seed: u64,
) -> Result<ShotResult, SimError> {
    sample_noisy_with(map, snapshot, shots, seed, NoiseOptions::default())
}

pub fn sample_noisy_with(
    map: &CircuitMap,
    snapshot: &CalibrationSnapshot,
    shots: u64,
    seed: u64,
    opts: NoiseOptions,
) -> Result<ShotResult, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    check_size(map.assignment.len())?;
    let plan = NoisePlan::new(map, snapshot, opts);
    let num_bits = plan.readout_local.len();
    let shots = shots as usize;
    let chunks: Vec<std::ops::Range<usize>> = (0..shots)
        .step_by(SHOT_CHUNK)
        .map(|start| start..(start + SHOT_CHUNK).min(shots))
        .collect();
    let partial: Vec<Vec<u64>> = chunks
        .into_par_iter()
        .map(|range| plan.run_chunk(seed, range, num_bits))
        .collect();
    let mut counts = vec![0u64; 1 << num_bits];
    for p in partial {
        for (a, b) in counts.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(ShotResult {
        num_bits,
        counts,
        total: shots as u64,
    })
}

/// Estimated success probability: product of `(1 - error)` over every non-RZ
/// gate and every measured qubit's readout.
pub fn esp(map: &CircuitMap, snapshot: &CalibrationSnapshot) -> f64 {
    map.routed
        .gates()
        .iter()
        .map(|g| match *g {
            Gate::Rz(..) => 1.0,
            Gate::Cx(a, b) => 1.0 - snapshot.err_cx(a, b),
            Gate::Measure(q) => 1.0 - snapshot.err_readout[q],
            ref other => 1.0 - snapshot.err_1q[other.qubits()[0]],
        })
        .product()
}
