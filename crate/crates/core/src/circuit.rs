//! Circuit representation, the line-oriented text format, basis decomposition
//! and the two-number gate encoding consumed by the TVD predictor.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("circuit must have at least one qubit")]
    NoQubits,
    #[error("qubit index {qubit} out of range for a {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("two-qubit gate uses qubit {0} twice")]
    RepeatedQubit(usize),
    #[error("gate on qubit {0} after it was measured")]
    GateAfterMeasure(usize),
    #[error("qubit {0} measured twice")]
    DoubleMeasure(usize),
    #[error("gate parameter is not finite")]
    NonFiniteParam,
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown gate `{name}`")]
    UnknownGate { line: usize, name: String },
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CircuitError>,
    },
    #[error("circuit has {needed} encodable gates but the model holds at most {max_len}")]
    EncodingOverflow { needed: usize, max_len: usize },
    #[error("circuit contains U3 gates; decompose to the basis first")]
    NotBasis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    X,
    Sx,
    Rz,
    Cx,
    U3,
    Measure,
}

/// Small inline list used for gate operands and parameters.
#[derive(Clone, Copy, Debug)]
pub struct Inline<T: Copy + Default, const N: usize> {
    items: [T; N],
    len: usize,
}

impl<T: Copy + Default, const N: usize> Inline<T, N> {
    fn from_slice(src: &[T]) -> Self {
        let mut items = [T::default(); N];
        items[..src.len()].copy_from_slice(src);
        Self { items, len: src.len() }
    }
}

impl<T: Copy + Default, const N: usize> Deref for Inline<T, N> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.items[..self.len]
    }
}

/// A single instruction. Angles are in radians; `Cx` is (control, target).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    X(usize),
    Sx(usize),
    Rz(usize, f64),
    Cx(usize, usize),
    /// U3(qubit, theta, phi, lambda)
    U3(usize, f64, f64, f64),
    Measure(usize),
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::Sx(_) => GateKind::Sx,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Cx(..) => GateKind::Cx,
            Gate::U3(..) => GateKind::U3,
            Gate::Measure(_) => GateKind::Measure,
        }
    }

    pub fn qubits(&self) -> Inline<usize, 2> {
        match *self {
            Gate::X(q) | Gate::Sx(q) | Gate::Rz(q, _) | Gate::U3(q, ..) | Gate::Measure(q) => {
                Inline::from_slice(&[q])
            }
            Gate::Cx(c, t) => Inline::from_slice(&[c, t]),
        }
    }

    pub fn params(&self) -> Inline<f64, 3> {
        match *self {
            Gate::Rz(_, a) => Inline::from_slice(&[a]),
            Gate::U3(_, t, p, l) => Inline::from_slice(&[t, p, l]),
            _ => Inline::from_slice(&[]),
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Cx(..))
    }

    /// Same gate with every qubit index passed through `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(f(q)),
            Gate::Sx(q) => Gate::Sx(f(q)),
            Gate::Rz(q, a) => Gate::Rz(f(q), a),
            Gate::Cx(c, t) => Gate::Cx(f(c), f(t)),
            Gate::U3(q, t, p, l) => Gate::U3(f(q), t, p, l),
            Gate::Measure(q) => Gate::Measure(f(q)),
        }
    }
}

/// An ordered gate list over `num_qubits` logical qubits.
///
/// Construction goes through [`Circuit::push`], so every stored circuit
/// satisfies the operand and measurement-ordering invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    name: String,
    num_qubits: usize,
    gates: Vec<Gate>,
    measured: Vec<bool>,
}

impl Circuit {
    pub fn new(num_qubits: usize, name: impl Into<String>) -> Result<Self, CircuitError> {
        if num_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        Ok(Self {
            name: name.into(),
            num_qubits,
            gates: Vec::new(),
            measured: vec![false; num_qubits],
        })
    }

    pub fn from_gates(
        num_qubits: usize,
        name: impl Into<String>,
        gates: impl IntoIterator<Item = Gate>,
    ) -> Result<Self, CircuitError> {
        let mut c = Self::new(num_qubits, name)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        let qubits = gate.qubits();
        for &q in qubits.iter() {
            if q >= self.num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        if let Gate::Cx(c, t) = gate {
            if c == t {
                return Err(CircuitError::RepeatedQubit(c));
            }
        }
        if gate.params().iter().any(|p| !p.is_finite()) {
            return Err(CircuitError::NonFiniteParam);
        }
        for &q in qubits.iter() {
            if self.measured[q] {
                return Err(match gate {
                    Gate::Measure(_) => CircuitError::DoubleMeasure(q),
                    _ => CircuitError::GateAfterMeasure(q),
                });
            }
        }
        if let Gate::Measure(q) = gate {
            self.measured[q] = true;
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Measures every qubit that is not measured yet.
    pub fn measure_all(&mut self) {
        for q in 0..self.num_qubits {
            if !self.measured[q] {
                self.measured[q] = true;
                self.gates.push(Gate::Measure(q));
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_measured(&self, qubit: usize) -> bool {
        self.measured.get(qubit).copied().unwrap_or(false)
    }

    pub fn all_measured(&self) -> bool {
        self.measured.iter().all(|&m| m)
    }

    pub fn is_basis(&self) -> bool {
        !self.gates.iter().any(|g| matches!(g, Gate::U3(..)))
    }

    /// Serializes to the line-oriented text format accepted by [`parse_circuit`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            let _ = writeln!(out, "name {}", self.name);
        }
        let _ = writeln!(out, "qubits {}", self.num_qubits);
        for g in &self.gates {
            let _ = match *g {
                Gate::X(q) => writeln!(out, "x {q}"),
                Gate::Sx(q) => writeln!(out, "sx {q}"),
                Gate::Rz(q, a) => writeln!(out, "rz {q} {a:?}"),
                Gate::Cx(c, t) => writeln!(out, "cx {c} {t}"),
                Gate::U3(q, t, p, l) => writeln!(out, "u3 {q} {t:?} {p:?} {l:?}"),
                Gate::Measure(q) => writeln!(out, "measure {q}"),
            };
        }
        out
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn parse_angle(tok: &str) -> Option<f64> {
    if let Ok(v) = tok.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    // [-][k*]pi[/d]
    let (sign, rest) = match tok.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, tok),
    };
    let (num, den) = match rest.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (rest, 1.0),
    };
    let scale = match num.split_once('*') {
        Some((k, "pi")) => k.parse::<f64>().ok()?,
        None if num == "pi" => 1.0,
        _ => return None,
    };
    let v = sign * scale * PI / den;
    v.is_finite().then_some(v)
}

/// Parses the line-oriented circuit format.
///
/// ```text
/// name bell        # optional label
/// qubits 2
/// sx 0
/// rz 0 pi/2
/// cx 0 1
/// measure all
/// ```
///
/// `;` may separate statements on one line and `#` starts a comment.
pub fn parse_circuit(source: &str) -> Result<Circuit, CircuitError> {
    let mut name = String::new();
    let mut circuit: Option<Circuit> = None;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("");
        for stmt in text.split(';') {
            let toks: Vec<&str> = stmt.split_whitespace().collect();
            let Some((&head, args)) = toks.split_first() else {
                continue;
            };
            let syntax = |msg: &str| CircuitError::Syntax {
                line,
                msg: msg.to_string(),
            };
            let head = head.to_ascii_lowercase();
            match head.as_str() {
                "name" => {
                    name = args.join(" ");
                    if let Some(c) = circuit.as_mut() {
                        c.set_name(name.clone());
                    }
                    continue;
                }
                "qubits" => {
                    if circuit.is_some() {
                        return Err(syntax("duplicate `qubits` header"));
                    }
                    let [n] = args else {
                        return Err(syntax("expected `qubits <n>`"));
                    };
                    let n: usize = n.parse().map_err(|_| syntax("invalid qubit count"))?;
                    circuit = Some(Circuit::new(n, name.clone()).map_err(|e| {
                        CircuitError::AtLine {
                            line,
                            source: Box::new(e),
                        }
                    })?);
                    continue;
                }
                _ => {}
            }
            let Some(c) = circuit.as_mut() else {
                return Err(syntax("gate before `qubits` header"));
            };
            let qubit = |s: &str| s.parse::<usize>().map_err(|_| syntax("invalid qubit index"));
            let angle = |s: &str| parse_angle(s).ok_or_else(|| syntax("invalid angle"));
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(syntax(&format!("`{head}` takes {n} operand(s)")))
                }
            };
            let gate = match head.as_str() {
                "x" => {
                    arity(1)?;
                    Gate::X(qubit(args[0])?)
                }
                "sx" => {
                    arity(1)?;
                    Gate::Sx(qubit(args[0])?)
                }
                "rz" => {
                    arity(2)?;
                    Gate::Rz(qubit(args[0])?, angle(args[1])?)
                }
                "cx" => {
                    arity(2)?;
                    Gate::Cx(qubit(args[0])?, qubit(args[1])?)
                }
                "u3" => {
                    arity(4)?;
                    Gate::U3(
                        qubit(args[0])?,
                        angle(args[1])?,
                        angle(args[2])?,
                        angle(args[3])?,
                    )
                }
                "measure" => {
                    arity(1)?;
                    if args[0].eq_ignore_ascii_case("all") {
                        c.measure_all();
                        continue;
                    }
                    Gate::Measure(qubit(args[0])?)
                }
                _ => {
                    return Err(CircuitError::UnknownGate {
                        line,
                        name: head.to_string(),
                    })
                }
            };
            c.push(gate).map_err(|e| CircuitError::AtLine {
                line,
                source: Box::new(e),
            })?;
        }
    }
    circuit.ok_or(CircuitError::Syntax {
        line: source.lines().count().max(1),
        msg: "missing `qubits` header".into(),
    })
}

/// Rewrites every U3 into `RZ(λ) · SX · RZ(θ+π) · SX · RZ(φ+π)` (time order),
/// which equals U3(θ, φ, λ) up to a global phase. Other gates pass through.
pub fn decompose_to_basis(c: &Circuit) -> Circuit {
    let mut out = Circuit::new(c.num_qubits, c.name.clone()).expect("source circuit is valid");
    for g in &c.gates {
        match *g {
            Gate::U3(q, theta, phi, lambda) => {
                out.gates.extend([
                    Gate::Rz(q, lambda),
                    Gate::Sx(q),
                    Gate::Rz(q, theta + PI),
                    Gate::Sx(q),
                    Gate::Rz(q, phi + PI),
                ]);
            }
            other => out.gates.push(other),
        }
    }
    out.measured = c.measured.clone();
    out
}

/// One encoded gate: `(qubit, 0)` for X/SX, `(control, target)` for CX.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateToken {
    pub first: u32,
    pub second: u32,
}

impl GateToken {
    pub const PAD: GateToken = GateToken { first: 0, second: 0 };
}

/// How qubit indices are written into tokens.
///
/// With `ZeroBased`, an X on qubit 0 encodes as `(0, 0)` and is
/// indistinguishable from padding; `OneBased` shifts every index by one so
/// the encoding is lossless. Models use `OneBased`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenIndexing {
    ZeroBased,
    #[default]
    OneBased,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncodedCircuit {
    pub tokens: Vec<GateToken>,
}

impl EncodedCircuit {
    pub fn max_len(&self) -> usize {
        self.tokens.len()
    }

    /// Row-major flattening, length `2 * max_len`.
    pub fn flat(&self) -> Vec<f64> {
        self.tokens
            .iter()
            .flat_map(|t| [t.first as f64, t.second as f64])
            .collect()
    }

    /// Tokens with trailing padding removed.
    pub fn unpadded(&self) -> &[GateToken] {
        let end = self
            .tokens
            .iter()
            .rposition(|t| *t != GateToken::PAD)
            .map_or(0, |i| i + 1);
        &self.tokens[..end]
    }
}

/// Number of gates that produce tokens (everything except RZ and MEASURE).
pub fn encodable_len(c: &Circuit) -> usize {
    c.gates
        .iter()
        .filter(|g| !matches!(g, Gate::Rz(..) | Gate::Measure(_)))
        .count()
}

/// Two-number encoding with the lossless one-based indexing.
pub fn encode_two_number(c: &Circuit, max_len: usize) -> Result<EncodedCircuit, CircuitError> {
    encode_with(c, max_len, TokenIndexing::OneBased)
}

pub fn encode_with(
    c: &Circuit,
    max_len: usize,
    indexing: TokenIndexing,
) -> Result<EncodedCircuit, CircuitError> {
    if !c.is_basis() {
        return Err(CircuitError::NotBasis);
    }
    let needed = encodable_len(c);
    if needed > max_len {
        return Err(CircuitError::EncodingOverflow { needed, max_len });
    }
    let shift = match indexing {
        TokenIndexing::ZeroBased => 0,
        TokenIndexing::OneBased => 1,
    };
    let idx = |q: usize| q as u32 + shift;
    let mut tokens = Vec::with_capacity(max_len);
    for g in &c.gates {
        match *g {
            Gate::X(q) | Gate::Sx(q) => tokens.push(GateToken {
                first: idx(q),
                second: 0,
            }),
            Gate::Cx(ctl, tgt) => tokens.push(GateToken {
                first: idx(ctl),
                second: idx(tgt),
            }),
            Gate::Rz(..) | Gate::Measure(_) | Gate::U3(..) => {}
        }
    }
    tokens.resize(max_len, GateToken::PAD);
    Ok(EncodedCircuit { tokens })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub num_1q: usize,
    pub num_2q: usize,
    pub depth: usize,
}

/// Gate counts and depth, ignoring measurements.
pub fn circuit_stats(c: &Circuit) -> CircuitStats {
    let mut stats = CircuitStats::default();
    let mut level = vec![0usize; c.num_qubits];
    for g in &c.gates {
        if matches!(g, Gate::Measure(_)) {
            continue;
        }
        let qs = g.qubits();
        if qs.len() == 2 {
            stats.num_2q += 1;
        } else {
            stats.num_1q += 1;
        }
        let next = qs.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in qs.iter() {
            level[q] = next;
        }
        stats.depth = stats.depth.max(next);
    }
    stats
}
