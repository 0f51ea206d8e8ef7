//! Device model: coupling map, native basis and calibration record.
//!
//! Backends are JSON documents (see `docs/backend-schema.md`). Durations carry
//! explicit units and are normalized to seconds on load; three presets ship
//! embedded in the crate.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuits::GateKind;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESETS: [&str; 3] = ["fake_linear7", "fake_heavyhex27", "fake_grid16"];

fn preset_source(name: &str) -> Option<&'static str> {
    match name {
        "fake_linear7" => Some(include_str!("../presets/fake_linear7.json")),
        "fake_heavyhex27" => Some(include_str!("../presets/fake_heavyhex27.json")),
        "fake_grid16" => Some(include_str!("../presets/fake_grid16.json")),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NativeTwoQubit {
    Cx,
    Cz,
    Ecr,
}

impl NativeTwoQubit {
    pub fn gate(self) -> GateKind {
        match self {
            NativeTwoQubit::Cx => GateKind::Cx,
            NativeTwoQubit::Cz => GateKind::Cz,
            NativeTwoQubit::Ecr => GateKind::Ecr,
        }
    }

    pub fn name(self) -> &'static str {
        self.gate().name()
    }
}

/// Undirected, connected qubit connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingMap {
    n_physical: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl CouplingMap {
    pub fn new(n_physical: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_physical == 0 {
            return Err(Error::InvalidBackend("coupling map has no qubits".into()));
        }
        let mut adjacency = vec![Vec::new(); n_physical];
        for &(a, b) in &edges {
            if a >= n_physical || b >= n_physical || a == b {
                return Err(Error::InvalidBackend(format!(
                    "edge ({a}, {b}) is invalid on {n_physical} qubits"
                )));
            }
            if !adjacency[a].contains(&b) {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let map = CouplingMap {
            n_physical,
            edges,
            adjacency,
        };
        let reached = map.bfs_parents(0).iter().filter(|p| p.is_some()).count();
        if reached != n_physical {
            return Err(Error::InvalidBackend(format!(
                "coupling map is disconnected: qubit 0 reaches {reached} of {n_physical} qubits"
            )));
        }
        Ok(map)
    }

    /// Path graph `0 - 1 - … - (n-1)`.
    pub fn line(n: usize) -> Result<Self> {
        CouplingMap::new(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    /// Complete graph; every pair is adjacent.
    pub fn all_to_all(n: usize) -> Result<Self> {
        CouplingMap::new(
            n,
            (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
        )
    }

    pub fn n_physical(&self) -> usize {
        self.n_physical
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    /// BFS tree from `source`; neighbors are visited lowest index first.
    fn bfs_parents(&self, source: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.n_physical];
        parent[source] = Some(source);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if parent[w].is_none() {
                    parent[w] = Some(v);
                    queue.push_back(w);
                }
            }
        }
        parent
    }

    /// Shortest path `from → to`, both endpoints included. Ties between
    /// equal-length paths go to the lowest-index neighbor.
    pub fn shortest_path(&self, from: usize, to: usize) -> Vec<usize> {
        // Search from `to` so that following parents walks forward from `from`.
        let parent = self.bfs_parents(to);
        let mut path = vec![from];
        let mut v = from;
        while v != to {
            v = parent[v].expect("coupling map is connected");
            path.push(v);
        }
        path
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.shortest_path(a, b).len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NativeBasis {
    pub one_qubit: Vec<GateKind>,
    /// Native entanglers, most preferred first.
    pub two_qubit: Vec<NativeTwoQubit>,
}

impl NativeBasis {
    pub fn preferred_two_qubit(&self) -> NativeTwoQubit {
        self.two_qubit[0]
    }

    pub fn contains(&self, kind: GateKind) -> bool {
        kind == GateKind::Measure
            || self.one_qubit.contains(&kind)
            || self.two_qubit.iter().any(|g| g.gate() == kind)
    }
}

/// Per-qubit row of raw device properties. `t1` is kept for reference only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitProperties {
    pub t1: Duration,
    pub t2: Duration,
    pub t_1q: Duration,
    pub eps_1q: f64,
    pub t_meas: Duration,
    pub eps_meas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeProperties {
    pub qubits: [usize; 2],
    pub gate: NativeTwoQubit,
    pub duration: Duration,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawCalibration {
    pub qubits: Vec<QubitProperties>,
    pub edges: Vec<EdgeProperties>,
}

/// Scalar calibration consumed by the cost model. Times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub t_1q: f64,
    pub t_2q_by_gate: BTreeMap<String, f64>,
    pub t_meas: f64,
    pub eps_1q: f64,
    pub eps_2q: f64,
    pub eps_meas: f64,
    pub t2: f64,
    pub raw: Option<RawCalibration>,
}

impl Calibration {
    /// Single-entangler calibration.
    pub fn uniform(
        gate: NativeTwoQubit,
        durations: [f64; 3],
        errors: [f64; 3],
        t2: f64,
    ) -> Result<Self> {
        let cal = Calibration {
            t_1q: durations[0],
            t_2q_by_gate: BTreeMap::from([(gate.name().to_string(), durations[1])]),
            t_meas: durations[2],
            eps_1q: errors[0],
            eps_2q: errors[1],
            eps_meas: errors[2],
            t2,
            raw: None,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn t_2q(&self, gate: &str) -> Option<f64> {
        self.t_2q_by_gate.get(gate).copied()
    }

    /// The scalar two-qubit duration; defined only when a single native
    /// entangler is calibrated.
    pub fn scalar_t_2q(&self) -> Result<f64> {
        match self.t_2q_by_gate.values().collect::<Vec<_>>().as_slice() {
            [t] => Ok(**t),
            _ => Err(Error::InvalidInput(format!(
                "{} two-qubit gate types calibrated; untyped counts are ambiguous",
                self.t_2q_by_gate.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Error::CalibrationFormat(format!("{what} = {v} is out of range"));
        let durations = [
            ("t_1q", self.t_1q),
            ("t_meas", self.t_meas),
            ("t2", self.t2),
        ];
        for (name, v) in durations
            .into_iter()
            .chain(self.t_2q_by_gate.values().map(|&v| ("t_2q", v)))
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(name, v));
            }
        }
        for (name, v) in [
            ("eps_1q", self.eps_1q),
            ("eps_2q", self.eps_2q),
            ("eps_meas", self.eps_meas),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(bad(name, v));
            }
        }
        if self.t_2q_by_gate.is_empty() {
            return Err(Error::CalibrationFormat(
                "no two-qubit gate durations".into(),
            ));
        }
        Ok(())
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Collapses raw per-qubit and per-edge tables to scalars by taking the
/// median of each column. Two-qubit durations are aggregated per gate type.
pub fn aggregate_calibration(raw: &RawCalibration) -> Result<Calibration> {
    if raw.qubits.is_empty() || raw.edges.is_empty() {
        return Err(Error::CalibrationFormat(
            "raw calibration tables must be non-empty".into(),
        ));
    }
    let column = |f: &dyn Fn(&QubitProperties) -> f64| {
        let mut v: Vec<f64> = raw.qubits.iter().map(f).collect();
        median(&mut v).expect("non-empty")
    };
    let mut by_gate: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for e in &raw.edges {
        by_gate
            .entry(e.gate.name().to_string())
            .or_default()
            .push(e.duration.seconds());
    }
    let mut errors: Vec<f64> = raw.edges.iter().map(|e| e.error).collect();
    let cal = Calibration {
        t_1q: column(&|q| q.t_1q.seconds()),
        t_2q_by_gate: by_gate
            .into_iter()
            .map(|(g, mut v)| (g, median(&mut v).expect("non-empty")))
            .collect(),
        t_meas: column(&|q| q.t_meas.seconds()),
        eps_1q: column(&|q| q.eps_1q),
        eps_2q: median(&mut errors).expect("non-empty"),
        eps_meas: column(&|q| q.eps_meas),
        t2: column(&|q| q.t2.seconds()),
        raw: Some(raw.clone()),
    };
    cal.validate()?;
    Ok(cal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "ms")]
    Millis,
    #[serde(rename = "us")]
    Micros,
    #[serde(rename = "ns")]
    Nanos,
}

/// A duration as written in a calibration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Duration {
    pub value: f64,
    pub unit: TimeUnit,
}

impl Duration {
    pub fn seconds_value(value: f64) -> Self {
        Duration {
            value,
            unit: TimeUnit::Seconds,
        }
    }

    pub fn seconds(&self) -> f64 {
        let scale = match self.unit {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Millis => 1e-3,
            TimeUnit::Micros => 1e-6,
            TimeUnit::Nanos => 1e-9,
        };
        self.value * scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendModel {
    pub name: String,
    pub coupling_map: CouplingMap,
    pub basis: NativeBasis,
    pub calibration: Calibration,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendFile {
    schema_version: u32,
    name: String,
    n_qubits: usize,
    coupling_map: Vec<[usize; 2]>,
    basis: NativeBasis,
    calibration: CalibrationFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_1q: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_2q: Option<BTreeMap<String, Duration>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_meas: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_1q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_2q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_meas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t2: Option<Duration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<RawCalibration>,
}

impl CalibrationFile {
    fn into_calibration(self) -> Result<Calibration> {
        let scalars = (
            self.t_1q,
            self.t_2q,
            self.t_meas,
            self.eps_1q,
            self.eps_2q,
            self.eps_meas,
            self.t2,
        );
        match scalars {
            (Some(t_1q), Some(t_2q), Some(t_meas), Some(e1), Some(e2), Some(em), Some(t2)) => {
                let cal = Calibration {
                    t_1q: t_1q.seconds(),
                    t_2q_by_gate: t_2q.into_iter().map(|(g, d)| (g, d.seconds())).collect(),
                    t_meas: t_meas.seconds(),
                    eps_1q: e1,
                    eps_2q: e2,
                    eps_meas: em,
                    t2: t2.seconds(),
                    raw: self.raw,
                };
                cal.validate()?;
                Ok(cal)
            }
            (None, None, None, None, None, None, None) => match &self.raw {
                Some(raw) => aggregate_calibration(raw),
                None => Err(Error::CalibrationFormat(
                    "calibration needs scalar aggregates or raw tables".into(),
                )),
            },
            _ => Err(Error::CalibrationFormat(
                "scalar calibration fields must be given all together or not at all".into(),
            )),
        }
    }

    fn from_calibration(cal: &Calibration) -> Self {
        CalibrationFile {
            t_1q: Some(Duration::seconds_value(cal.t_1q)),
            t_2q: Some(
                cal.t_2q_by_gate
                    .iter()
                    .map(|(g, &t)| (g.clone(), Duration::seconds_value(t)))
                    .collect(),
            ),
            t_meas: Some(Duration::seconds_value(cal.t_meas)),
            eps_1q: Some(cal.eps_1q),
            eps_2q: Some(cal.eps_2q),
            eps_meas: Some(cal.eps_meas),
            t2: Some(Duration::seconds_value(cal.t2)),
            raw: cal.raw.clone(),
        }
    }
}

impl BackendModel {
    pub fn n_physical(&self) -> usize {
        self.coupling_map.n_physical()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BackendFile =
            serde_json::from_str(text).map_err(|e| Error::CalibrationFormat(e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::CalibrationFormat(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.basis.two_qubit.is_empty() {
            return Err(Error::CalibrationFormat(
                "basis needs at least one two-qubit gate".into(),
            ));
        }
        if let Some(k) = file
            .basis
            .one_qubit
            .iter()
            .find(|k| k.arity() != 1 || **k == GateKind::Measure)
        {
            return Err(Error::CalibrationFormat(format!(
                "{k} is not a one-qubit gate"
            )));
        }
        let calibration = file.calibration.into_calibration()?;
        for gate in calibration.t_2q_by_gate.keys() {
            if !file.basis.two_qubit.iter().any(|g| g.name() == gate) {
                return Err(Error::CalibrationFormat(format!(
                    "calibrated two-qubit gate {gate} is not in the native basis"
                )));
            }
        }
        for g in &file.basis.two_qubit {
            if calibration.t_2q(g.name()).is_none() {
                return Err(Error::CalibrationFormat(format!(
                    "native gate {} has no calibrated duration",
                    g.name()
                )));
            }
        }
        let edges = file.coupling_map.iter().map(|&[a, b]| (a, b)).collect();
        let coupling_map = CouplingMap::new(file.n_qubits, edges)?;
        Ok(BackendModel {
            name: file.name,
            coupling_map,
            basis: file.basis,
            calibration,
        })
    }

    pub fn to_json(&self) -> String {
        let file = BackendFile {
            schema_version: SCHEMA_VERSION,
            name: self.name.clone(),
            n_qubits: self.n_physical(),
            coupling_map: self
                .coupling_map
                .edges()
                .iter()
                .map(|&(a, b)| [a, b])
                .collect(),
            basis: self.basis.clone(),
            calibration: CalibrationFile::from_calibration(&self.calibration),
        };
        serde_json::to_string_pretty(&file).expect("backend serializes")
    }

    pub fn preset(name: &str) -> Result<Self> {
        let src = preset_source(name).ok_or_else(|| {
            Error::InvalidBackend(format!(
                "unknown preset `{name}`; available: {}",
                PRESETS.join(", ")
            ))
        })?;
        BackendModel::from_json(src)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

pub fn load_backend(path: &Path) -> Result<BackendModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    BackendModel::from_json(&text)
}

/// Resolves `--backend` arguments: an existing file path, else a preset name.
pub fn resolve_backend(spec: &str) -> Result<BackendModel> {
    let path = Path::new(spec);
    if path.is_file() {
        load_backend(path)
    } else {
        BackendModel::preset(spec)
    }
}
