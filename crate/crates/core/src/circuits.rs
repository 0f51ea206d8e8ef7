//! Gate-level circuit IR and the layered ansatz family searched over by the
//! architecture search: angle embedding, one rotation layer per depth step,
//! then entanglers laid out on a topology.
//!
//! Qubit indices are plain `usize`. For logical circuits they are logical
//! qubits; after routing they are physical qubits of a coupling map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_QUBITS: usize = 2;
pub const MAX_QUBITS: usize = 12;
pub const MIN_DEPTH: usize = 1;
pub const MAX_DEPTH: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Sx,
    X,
    /// Controlled-NOT, first qubit is the control.
    Cx,
    Cz,
    Swap,
    /// Echoed cross-resonance, first qubit is the control.
    Ecr,
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateClass {
    OneQubit,
    TwoQubit,
    Measurement,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Sx,
        GateKind::X,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Swap,
        GateKind::Ecr,
        GateKind::Measure,
    ];

    pub fn class(self) -> GateClass {
        match self {
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Sx | GateKind::X => {
                GateClass::OneQubit
            }
            GateKind::Cx | GateKind::Cz | GateKind::Swap | GateKind::Ecr => GateClass::TwoQubit,
            GateKind::Measure => GateClass::Measurement,
        }
    }

    pub fn arity(self) -> usize {
        match self.class() {
            GateClass::TwoQubit => 2,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Sx => "sx",
            GateKind::X => "x",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
            GateKind::Ecr => "ecr",
            GateKind::Measure => "measure",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.to_ascii_lowercase().as_str() {
            "rx" => GateKind::Rx,
            "ry" => GateKind::Ry,
            "rz" => GateKind::Rz,
            "sx" => GateKind::Sx,
            "x" => GateKind::X,
            "cx" | "cnot" => GateKind::Cx,
            "cz" => GateKind::Cz,
            "swap" => GateKind::Swap,
            "ecr" => GateKind::Ecr,
            "measure" => GateKind::Measure,
            other => return Err(Error::UnsupportedGate(other.to_string())),
        };
        Ok(kind)
    }
}

/// Rotation angle source. A rotation is bound to a fixed value, to one
/// trainable parameter, or to one data input; never to more than one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angle {
    Fixed(f64),
    Param { index: usize, offset: f64 },
    Input { index: usize, offset: f64 },
}

impl Angle {
    pub fn param(index: usize) -> Self {
        Angle::Param { index, offset: 0.0 }
    }

    pub fn input(index: usize) -> Self {
        Angle::Input { index, offset: 0.0 }
    }

    /// Same binding with `delta` added to the angle.
    pub fn shifted(self, delta: f64) -> Self {
        match self {
            Angle::Fixed(v) => Angle::Fixed(v + delta),
            Angle::Param { index, offset } => Angle::Param {
                index,
                offset: offset + delta,
            },
            Angle::Input { index, offset } => Angle::Input {
                index,
                offset: offset + delta,
            },
        }
    }

    pub fn resolve(&self, params: &[f64], inputs: &[f64]) -> f64 {
        match *self {
            Angle::Fixed(v) => v,
            Angle::Param { index, offset } => params[index] + offset,
            Angle::Input { index, offset } => inputs[index] + offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn rotation(kind: GateKind, qubit: usize, angle: Angle) -> Self {
        debug_assert!(kind.is_rotation());
        Gate {
            kind,
            qubits: vec![qubit],
            angle: Some(angle),
        }
    }

    pub fn one(kind: GateKind, qubit: usize) -> Self {
        Gate {
            kind,
            qubits: vec![qubit],
            angle: None,
        }
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Gate {
            kind,
            qubits: vec![a, b],
            angle: None,
        }
    }

    pub fn measure(qubit: usize) -> Self {
        Gate::one(GateKind::Measure, qubit)
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::CircuitFormat(format!(
                "{} expects {} qubit(s), got {}",
                self.kind,
                self.kind.arity(),
                self.qubits.len()
            )));
        }
        if let Some(&q) = self.qubits.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::CircuitFormat(format!(
                "{} acts on qubit {q} but the circuit has {n_qubits}",
                self.kind
            )));
        }
        if self.qubits.len() == 2 && self.qubits[0] == self.qubits[1] {
            return Err(Error::CircuitFormat(format!(
                "{} acts twice on qubit {}",
                self.kind, self.qubits[0]
            )));
        }
        match (self.kind.is_rotation(), self.angle.is_some()) {
            (true, false) => Err(Error::CircuitFormat(format!(
                "{} needs an angle",
                self.kind
            ))),
            (false, true) => Err(Error::CircuitFormat(format!(
                "{} takes no angle",
                self.kind
            ))),
            _ => Ok(()),
        }
    }
}

/// A validated circuit.
///
/// Every trainable parameter slot `0..n_params` is bound by exactly one
/// rotation, and likewise for data inputs, so `n_params` is also the number
/// of trainable gates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
    n_inputs: usize,
}

#[derive(Serialize, Deserialize)]
struct RawCircuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        Circuit::from_gates(raw.n_qubits, raw.gates)
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> Self {
        RawCircuit {
            n_qubits: c.n_qubits,
            gates: c.gates,
        }
    }
}

fn check_slots(what: &str, slots: &[usize]) -> Result<()> {
    let unique: BTreeSet<usize> = slots.iter().copied().collect();
    if unique.len() != slots.len() {
        return Err(Error::CircuitFormat(format!(
            "a {what} slot is bound by more than one gate"
        )));
    }
    if let Some(&max) = unique.iter().next_back() {
        if max + 1 != slots.len() {
            return Err(Error::CircuitFormat(format!(
                "{what} slots must be numbered 0..{} without gaps",
                slots.len()
            )));
        }
    }
    Ok(())
}

impl Circuit {
    pub fn empty(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
            n_inputs: 0,
        }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut params = Vec::new();
        let mut inputs = Vec::new();
        for gate in &gates {
            gate.check(n_qubits)?;
            match gate.angle {
                Some(Angle::Param { index, .. }) => params.push(index),
                Some(Angle::Input { index, .. }) => inputs.push(index),
                _ => {}
            }
        }
        check_slots("parameter", &params)?;
        check_slots("input", &inputs)?;
        Ok(Circuit {
            n_qubits,
            n_params: params.len(),
            n_inputs: inputs.len(),
            gates,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Inserts `gates` ahead of the existing ones.
    pub fn prepend(&self, gates: Vec<Gate>) -> Result<Circuit> {
        let mut all = gates;
        all.extend(self.gates.iter().cloned());
        Circuit::from_gates(self.n_qubits, all)
    }

    pub fn counts(&self) -> GateCounts {
        gate_counts(self)
    }

    /// Line-oriented text form; see [`Circuit::parse_text`] for the grammar.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.n_qubits);
        for gate in &self.gates {
            out.push_str(gate.kind.name());
            for q in &gate.qubits {
                out.push_str(&format!(" {q}"));
            }
            if let Some(angle) = gate.angle {
                out.push(' ');
                out.push_str(&format_angle(angle));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text form:
    ///
    /// ```text
    /// # comment
    /// qubits <n>
    /// <kind> <qubit> [<qubit>] [<angle>]
    /// angle := p<slot>[(+|-)<float>] | x<slot>[(+|-)<float>] | <float>
    /// ```
    ///
    /// `p` binds a trainable parameter slot, `x` a data-input slot.
    pub fn parse_text(text: &str) -> Result<Circuit> {
        let mut n_qubits = None;
        let mut gates = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::CircuitFormat(format!("line {}: {msg}", lineno + 1));
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap_or_default();
            if head == "qubits" {
                let n = tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| err("expected `qubits <n>`"))?;
                n_qubits = Some(n);
                continue;
            }
            if n_qubits.is_none() {
                return Err(err("`qubits <n>` must come first"));
            }
            let kind: GateKind = head.parse()?;
            let rest: Vec<&str> = tokens.collect();
            let n_q = kind.arity();
            if rest.len() < n_q {
                return Err(err("missing qubit operand"));
            }
            let qubits = rest[..n_q]
                .iter()
                .map(|t| t.parse::<usize>().map_err(|_| err("bad qubit index")))
                .collect::<Result<Vec<_>>>()?;
            let angle = match &rest[n_q..] {
                [] => None,
                [a] => Some(parse_angle(a).ok_or_else(|| err("bad angle"))?),
                _ => return Err(err("too many operands")),
            };
            gates.push(Gate {
                kind,
                qubits,
                angle,
            });
        }
        let n = n_qubits.ok_or_else(|| Error::CircuitFormat("missing `qubits <n>`".into()))?;
        Circuit::from_gates(n, gates)
    }

    /// Imports the OpenQASM 2 subset restricted to [`GateKind`]: one or more
    /// `qreg`s, `rx/ry/rz(expr)`, `sx`, `x`, `cx`, `cz`, `swap`, `ecr` and
    /// `measure`. `creg`, `barrier`, `include` and the header are ignored.
    /// Angles are constant expressions over numbers and `pi`.
    pub fn from_qasm(src: &str) -> Result<Circuit> {
        let mut regs: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        let mut n_qubits = 0usize;
        let mut gates = Vec::new();
        let stripped: String = src
            .lines()
            .map(|l| l.split("//").next().unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n");
        for stmt in stripped.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let lower = stmt.to_ascii_lowercase();
            if lower.starts_with("openqasm")
                || lower.starts_with("include")
                || lower.starts_with("creg")
                || lower.starts_with("barrier")
            {
                continue;
            }
            if let Some(decl) = stmt.strip_prefix("qreg") {
                let (name, size) = parse_register(decl.trim())
                    .ok_or_else(|| Error::CircuitFormat(format!("bad qreg `{stmt}`")))?;
                regs.insert(name, (n_qubits, size));
                n_qubits += size;
                continue;
            }
            let (head, operands) = match stmt.find(|c: char| c.is_whitespace()) {
                Some(i) if !stmt[..i].contains('(') || stmt[..i].contains(')') => {
                    (&stmt[..i], stmt[i..].trim())
                }
                _ => {
                    // `rx( pi / 2 ) q[0]`: the head runs to the closing paren.
                    let close = stmt
                        .find(')')
                        .ok_or_else(|| Error::CircuitFormat(format!("bad statement `{stmt}`")))?;
                    (&stmt[..=close], stmt[close + 1..].trim())
                }
            };
            let (name, angle) = match head.find('(') {
                Some(open) => {
                    let expr = head[open + 1..].trim_end_matches(')');
                    (&head[..open], Some(eval_angle_expr(expr)?))
                }
                None => (head, None),
            };
            let kind: GateKind = name.trim().parse()?;
            let operands = operands.split("->").next().unwrap_or("");
            let targets = operands
                .split(',')
                .map(|t| resolve_qubits(t.trim(), &regs))
                .collect::<Result<Vec<_>>>()?;
            if kind == GateKind::Measure {
                for q in targets.into_iter().flatten() {
                    gates.push(Gate::measure(q));
                }
                continue;
            }
            let qubits: Vec<usize> = targets
                .into_iter()
                .map(|t| match t.as_slice() {
                    [q] => Ok(*q),
                    _ => Err(Error::CircuitFormat(format!(
                        "register broadcast is only supported for measure: `{stmt}`"
                    ))),
                })
                .collect::<Result<_>>()?;
            gates.push(Gate {
                kind,
                qubits,
                angle: angle.map(Angle::Fixed),
            });
        }
        Circuit::from_gates(n_qubits, gates)
    }
}

fn parse_register(decl: &str) -> Option<(String, usize)> {
    let open = decl.find('[')?;
    let close = decl.find(']')?;
    let size = decl[open + 1..close].trim().parse().ok()?;
    Some((decl[..open].trim().to_string(), size))
}

fn resolve_qubits(operand: &str, regs: &BTreeMap<String, (usize, usize)>) -> Result<Vec<usize>> {
    let bad = || Error::CircuitFormat(format!("unknown qubit operand `{operand}`"));
    match operand.find('[') {
        Some(open) => {
            let (base, size) = *regs.get(operand[..open].trim()).ok_or_else(bad)?;
            let idx: usize = operand[open + 1..]
                .trim_end_matches(']')
                .trim()
                .parse()
                .map_err(|_| bad())?;
            if idx >= size {
                return Err(bad());
            }
            Ok(vec![base + idx])
        }
        None => {
            let (base, size) = *regs.get(operand).ok_or_else(bad)?;
            Ok((base..base + size).collect())
        }
    }
}

/// Recursive-descent evaluator for `+ - * /`, parentheses, numbers and `pi`.
fn eval_angle_expr(expr: &str) -> Result<f64> {
    struct P<'a> {
        s: &'a [u8],
        i: usize,
    }
    impl P<'_> {
        fn ws(&mut self) {
            while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
                self.i += 1;
            }
        }
        fn expr(&mut self) -> Option<f64> {
            let mut v = self.term()?;
            loop {
                self.ws();
                match self.s.get(self.i) {
                    Some(b'+') => {
                        self.i += 1;
                        v += self.term()?;
                    }
                    Some(b'-') => {
                        self.i += 1;
                        v -= self.term()?;
                    }
                    _ => return Some(v),
                }
            }
        }
        fn term(&mut self) -> Option<f64> {
            let mut v = self.factor()?;
            loop {
                self.ws();
                match self.s.get(self.i) {
                    Some(b'*') => {
                        self.i += 1;
                        v *= self.factor()?;
                    }
                    Some(b'/') => {
                        self.i += 1;
                        v /= self.factor()?;
                    }
                    _ => return Some(v),
                }
            }
        }
        fn factor(&mut self) -> Option<f64> {
            self.ws();
            match self.s.get(self.i)? {
                b'-' => {
                    self.i += 1;
                    Some(-self.factor()?)
                }
                b'+' => {
                    self.i += 1;
                    self.factor()
                }
                b'(' => {
                    self.i += 1;
                    let v = self.expr()?;
                    self.ws();
                    (self.s.get(self.i) == Some(&b')')).then(|| {
                        self.i += 1;
                        v
                    })
                }
                _ if self.s[self.i..].starts_with(b"pi") => {
                    self.i += 2;
                    Some(std::f64::consts::PI)
                }
                _ => {
                    let start = self.i;
                    while self.i < self.s.len()
                        && (self.s[self.i].is_ascii_digit()
                            || self.s[self.i] == b'.'
                            || self.s[self.i] == b'e'
                            || ((self.s[self.i] == b'-' || self.s[self.i] == b'+')
                                && self.i > start
                                && self.s[self.i - 1] == b'e'))
                    {
                        self.i += 1;
                    }
                    std::str::from_utf8(&self.s[start..self.i])
                        .ok()?
                        .parse()
                        .ok()
                }
            }
        }
    }
    let mut p = P {
        s: expr.as_bytes(),
        i: 0,
    };
    let v = p.expr();
    p.ws();
    match v {
        Some(v) if p.i == p.s.len() => Ok(v),
        _ => Err(Error::CircuitFormat(format!(
            "bad angle expression `{expr}`"
        ))),
    }
}

fn format_angle(angle: Angle) -> String {
    let slot = |prefix: char, index: usize, offset: f64| {
        if offset == 0.0 {
            format!("{prefix}{index}")
        } else {
            format!("{prefix}{index}{offset:+}")
        }
    };
    match angle {
        Angle::Fixed(v) => format!("{v}"),
        Angle::Param { index, offset } => slot('p', index, offset),
        Angle::Input { index, offset } => slot('x', index, offset),
    }
}

fn parse_angle(token: &str) -> Option<Angle> {
    let slot = |rest: &str| -> Option<(usize, f64)> {
        let split = rest.find(['+', '-']).unwrap_or(rest.len());
        let index = rest[..split].parse().ok()?;
        let offset = if split == rest.len() {
            0.0
        } else {
            rest[split..].parse().ok()?
        };
        Some((index, offset))
    };
    if let Some(rest) = token.strip_prefix('p') {
        let (index, offset) = slot(rest)?;
        Some(Angle::Param { index, offset })
    } else if let Some(rest) = token.strip_prefix('x') {
        let (index, offset) = slot(rest)?;
        Some(Angle::Input { index, offset })
    } else {
        token.parse().ok().map(Angle::Fixed)
    }
}

/// Gate counts by class. Two-qubit gates are additionally broken down by
/// gate name so per-type durations can be applied.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub n_1q: u64,
    pub n_2q: u64,
    pub n_meas: u64,
    #[serde(default)]
    pub n_2q_by_gate: BTreeMap<String, u64>,
}

impl GateCounts {
    pub fn new(n_1q: u64, n_2q: u64, n_meas: u64) -> Self {
        GateCounts {
            n_1q,
            n_2q,
            n_meas,
            n_2q_by_gate: BTreeMap::new(),
        }
    }

    pub fn with_typed(mut self, gate: &str, count: u64) -> Self {
        self.n_2q_by_gate.insert(gate.to_string(), count);
        self
    }

    pub fn scaled(&self, k: u64) -> Self {
        GateCounts {
            n_1q: self.n_1q * k,
            n_2q: self.n_2q * k,
            n_meas: self.n_meas * k,
            n_2q_by_gate: self
                .n_2q_by_gate
                .iter()
                .map(|(g, n)| (g.clone(), n * k))
                .collect(),
        }
    }

    pub fn total(&self) -> u64 {
        self.n_1q + self.n_2q + self.n_meas
    }
}

/// Reads a circuit file: OpenQASM when the extension is `.qasm` or the text
/// starts with `OPENQASM`, the line format otherwise.
pub fn load_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_qasm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("qasm"))
        || text.trim_start().starts_with("OPENQASM");
    if is_qasm {
        Circuit::from_qasm(&text)
    } else {
        Circuit::parse_text(&text)
    }
}

pub fn gate_counts(circuit: &Circuit) -> GateCounts {
    let mut counts = GateCounts::default();
    for gate in circuit.gates() {
        match gate.kind.class() {
            GateClass::OneQubit => counts.n_1q += 1,
            GateClass::Measurement => counts.n_meas += 1,
            GateClass::TwoQubit => {
                counts.n_2q += 1;
                *counts
                    .n_2q_by_gate
                    .entry(gate.kind.name().to_string())
                    .or_default() += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Linear,
    Circular,
    Full,
    Star,
    Grid,
}

impl Topology {
    pub const ALL: [Topology; 5] = [
        Topology::Linear,
        Topology::Circular,
        Topology::Full,
        Topology::Star,
        Topology::Grid,
    ];
}

/// Rows and columns of the grid lattice for `n` qubits: `r = floor(sqrt n)`,
/// `c = ceil(n / r)`, qubits laid out row-major with the last row possibly short.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows * rows > n {
        rows -= 1;
    }
    while (rows + 1) * (rows + 1) <= n {
        rows += 1;
    }
    let rows = rows.max(1);
    (rows, n.div_ceil(rows))
}

/// Ordered entangler edges `(control, target)` of `topology` on `n` qubits.
pub fn topology_edges(topology: Topology, n: usize) -> Result<Vec<(usize, usize)>> {
    if n < 2 {
        return Err(Error::InvalidQubitCount(n));
    }
    let mut edges: Vec<(usize, usize)> = match topology {
        Topology::Linear => (0..n - 1).map(|i| (i, i + 1)).collect(),
        Topology::Circular => (0..n - 1).map(|i| (i, i + 1)).chain([(n - 1, 0)]).collect(),
        Topology::Full => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        Topology::Star => (1..n).map(|i| (0, i)).collect(),
        Topology::Grid => {
            let (_, cols) = grid_shape(n);
            let mut e = Vec::new();
            for i in 0..n {
                if (i + 1) % cols != 0 && i + 1 < n {
                    e.push((i, i + 1));
                }
                if i + cols < n {
                    e.push((i, i + cols));
                }
            }
            e
        }
    };
    let mut seen = BTreeSet::new();
    edges.retain(|&(a, b)| seen.insert((a.min(b), a.max(b))));
    Ok(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationKind {
    Rx,
    Ry,
    Rz,
}

impl RotationKind {
    pub const ALL: [RotationKind; 3] = [RotationKind::Rx, RotationKind::Ry, RotationKind::Rz];

    pub fn gate(self) -> GateKind {
        match self {
            RotationKind::Rx => GateKind::Rx,
            RotationKind::Ry => GateKind::Ry,
            RotationKind::Rz => GateKind::Rz,
        }
    }
}

/// Non-empty subset of {RX, RY, RZ}, stored as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<RotationKind>", into = "Vec<RotationKind>")]
pub struct RotationSet(u8);

impl RotationSet {
    /// All seven non-empty subsets, in mask order.
    pub fn all_subsets() -> impl Iterator<Item = RotationSet> {
        (1u8..8).map(RotationSet)
    }

    pub fn new(kinds: &[RotationKind]) -> Result<Self> {
        let mask = kinds.iter().fold(0u8, |m, k| m | (1 << *k as u8));
        if mask == 0 {
            return Err(Error::InvalidSearchPoint(
                "rotation set must not be empty".into(),
            ));
        }
        Ok(RotationSet(mask))
    }

    pub fn single(kind: RotationKind) -> Self {
        RotationSet(1 << kind as u8)
    }

    pub fn kinds(self) -> Vec<RotationKind> {
        RotationKind::ALL
            .into_iter()
            .filter(|k| self.0 & (1 << *k as u8) != 0)
            .collect()
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl TryFrom<Vec<RotationKind>> for RotationSet {
    type Error = Error;

    fn try_from(kinds: Vec<RotationKind>) -> Result<Self> {
        RotationSet::new(&kinds)
    }
}

impl From<RotationSet> for Vec<RotationKind> {
    fn from(set: RotationSet) -> Self {
        set.kinds()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    Cnot,
    Cz,
}

impl Entangler {
    pub const ALL: [Entangler; 2] = [Entangler::Cnot, Entangler::Cz];

    pub fn gate(self) -> GateKind {
        match self {
            Entangler::Cnot => GateKind::Cx,
            Entangler::Cz => GateKind::Cz,
        }
    }
}

/// Layered hardware-efficient ansatz.
///
/// Layer `l` applies rotation kind `kinds[l % kinds.len()]` to every qubit,
/// each bound to its own trainable parameter, followed by the entangler on
/// every topology edge. Every qubit is measured once at the end.
pub fn build_ansatz(
    n_qubits: usize,
    depth: usize,
    rotations: RotationSet,
    entangler: Entangler,
    topology: Topology,
) -> Result<Circuit> {
    if !(MIN_QUBITS..=MAX_QUBITS).contains(&n_qubits) {
        return Err(Error::InvalidSearchPoint(format!(
            "qubit count {n_qubits} outside [{MIN_QUBITS}, {MAX_QUBITS}]"
        )));
    }
    if !(MIN_DEPTH..=MAX_DEPTH).contains(&depth) {
        return Err(Error::InvalidSearchPoint(format!(
            "depth {depth} outside [{MIN_DEPTH}, {MAX_DEPTH}]"
        )));
    }
    if rotations.is_empty() {
        return Err(Error::InvalidSearchPoint("no rotation kinds".into()));
    }
    let kinds = rotations.kinds();
    let edges = topology_edges(topology, n_qubits)?;
    let mut gates = Vec::with_capacity(depth * (n_qubits + edges.len()) + n_qubits);
    let mut slot = 0;
    for layer in 0..depth {
        let kind = kinds[layer % kinds.len()].gate();
        for q in 0..n_qubits {
            gates.push(Gate::rotation(kind, q, Angle::param(slot)));
            slot += 1;
        }
        for &(a, b) in &edges {
            gates.push(Gate::two(entangler.gate(), a, b));
        }
    }
    gates.extend((0..n_qubits).map(Gate::measure));
    Circuit::from_gates(n_qubits, gates)
}

/// One data-bound RY per feature, feature `i` on qubit `i`.
pub fn angle_embedding(n_features: usize) -> Result<Vec<Gate>> {
    if n_features == 0 {
        return Err(Error::DimensionMismatch(
            "angle embedding needs at least one feature".into(),
        ));
    }
    Ok((0..n_features)
        .map(|i| Gate::rotation(GateKind::Ry, i, Angle::input(i)))
        .collect())
}

/// Prepends an `n_features`-wide angle embedding; one qubit per feature.
pub fn embed(circuit: &Circuit, n_features: usize) -> Result<Circuit> {
    if n_features != circuit.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "{n_features} features for a {}-qubit circuit",
            circuit.n_qubits()
        )));
    }
    circuit.prepend(angle_embedding(n_features)?)
}

/// Random circuit over {RX, RY, RZ, CX, CZ} with fixed angles.
///
/// Each of the `depth` layers visits every qubit once; a free qubit either
/// receives a random rotation or, with probability 0.3, pairs with another
/// free qubit for a two-qubit gate. All qubits are measured at the end.
pub fn random_circuit<R: Rng + ?Sized>(n_qubits: usize, depth: usize, rng: &mut R) -> Circuit {
    let mut gates = Vec::new();
    for _ in 0..depth {
        let mut free: Vec<usize> = (0..n_qubits).collect();
        while let Some(q) = free.pop() {
            if !free.is_empty() && rng.random_bool(0.3) {
                let partner = free.swap_remove(rng.random_range(0..free.len()));
                let kind = if rng.random_bool(0.5) {
                    GateKind::Cx
                } else {
                    GateKind::Cz
                };
                gates.push(Gate::two(kind, q, partner));
            } else {
                let kind = RotationKind::ALL[rng.random_range(0..3)].gate();
                let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                gates.push(Gate::rotation(kind, q, Angle::Fixed(theta)));
            }
        }
    }
    gates.extend((0..n_qubits).map(Gate::measure));
    Circuit::from_gates(n_qubits, gates).expect("random circuits are valid by construction")
}
