//! Logical → physical compilation: greedy SWAP routing on a coupling map,
//! then rewriting into a backend's native basis. Also hosts the ASAP list
//! scheduler that estimates execution windows from calibrated durations.
//!
//! Rewrite table (gates listed in application order, equalities up to global
//! phase; `H` stands for `RZ(π/2) SX RZ(π/2)`):
//!
//! | gate          | rewrite                                              |
//! |---------------|------------------------------------------------------|
//! | `RY(θ)`       | `SX, RZ(θ+π), SX, RZ(π)`                             |
//! | `RX(θ)`       | `RZ(π/2), SX, RZ(θ+π), SX, RZ(π/2)`                  |
//! | `CX(c,t)` cz  | `H(t), CZ(c,t), H(t)`                                |
//! | `CX(c,t)` ecr | `ECR(c,t), X(c), SX(t), RZ(π/2)(c)`                  |
//! | `CZ(a,b)`     | `H(b), CX(a,b), H(b)`                                |
//! | `ECR(c,t)`    | `CX(c,t), RZ(-π/2)(c), RZ(π)(t), SX(t), RZ(π)(t), X(c)` |
//! | `SWAP(a,b)`   | `CX(a,b), CX(b,a), CX(a,b)`                          |
//!
//! Native gates pass through unchanged. Rewrites are applied recursively, so
//! `SWAP` always costs exactly three native two-qubit gates.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::backend::{BackendModel, Calibration, CouplingMap, NativeBasis, NativeTwoQubit};
use crate::circuits::{gate_counts, Angle, Circuit, Gate, GateClass, GateCounts, GateKind};
use crate::error::{Error, Result};

fn rz(q: usize, angle: Angle) -> Gate {
    Gate::rotation(GateKind::Rz, q, angle)
}

fn rz_fixed(q: usize, theta: f64) -> Gate {
    rz(q, Angle::Fixed(theta))
}

fn hadamard(q: usize) -> [Gate; 3] {
    [
        rz_fixed(q, FRAC_PI_2),
        Gate::one(GateKind::Sx, q),
        rz_fixed(q, FRAC_PI_2),
    ]
}

/// One rewrite step; the output may still contain non-native gates.
fn rewrite(gate: &Gate, basis: &NativeBasis) -> Result<Vec<Gate>> {
    let unsupported = || Error::UnsupportedGate(gate.kind.name().to_string());
    let q = &gate.qubits;
    let needs = |kinds: &[GateKind]| -> Result<()> {
        if kinds.iter().all(|k| basis.one_qubit.contains(k)) {
            Ok(())
        } else {
            Err(unsupported())
        }
    };
    let out = match gate.kind {
        GateKind::Ry => {
            needs(&[GateKind::Sx, GateKind::Rz])?;
            let angle = gate.angle.expect("rotation has an angle").shifted(PI);
            vec![
                Gate::one(GateKind::Sx, q[0]),
                rz(q[0], angle),
                Gate::one(GateKind::Sx, q[0]),
                rz_fixed(q[0], PI),
            ]
        }
        GateKind::Rx => {
            needs(&[GateKind::Sx, GateKind::Rz])?;
            let angle = gate.angle.expect("rotation has an angle").shifted(PI);
            vec![
                rz_fixed(q[0], FRAC_PI_2),
                Gate::one(GateKind::Sx, q[0]),
                rz(q[0], angle),
                Gate::one(GateKind::Sx, q[0]),
                rz_fixed(q[0], FRAC_PI_2),
            ]
        }
        GateKind::Rz | GateKind::Sx | GateKind::X => return Err(unsupported()),
        GateKind::Cx => {
            let (c, t) = (q[0], q[1]);
            needs(&[GateKind::Sx, GateKind::Rz])?;
            let target = basis
                .two_qubit
                .iter()
                .copied()
                .find(|g| matches!(g, NativeTwoQubit::Cz | NativeTwoQubit::Ecr))
                .ok_or_else(unsupported)?;
            if target == NativeTwoQubit::Cz {
                let mut v = hadamard(t).to_vec();
                v.push(Gate::two(GateKind::Cz, c, t));
                v.extend(hadamard(t));
                v
            } else {
                needs(&[GateKind::X])?;
                vec![
                    Gate::two(GateKind::Ecr, c, t),
                    Gate::one(GateKind::X, c),
                    Gate::one(GateKind::Sx, t),
                    rz_fixed(c, FRAC_PI_2),
                ]
            }
        }
        GateKind::Cz => {
            needs(&[GateKind::Sx, GateKind::Rz])?;
            let (a, b) = (q[0], q[1]);
            let mut v = hadamard(b).to_vec();
            v.push(Gate::two(GateKind::Cx, a, b));
            v.extend(hadamard(b));
            v
        }
        GateKind::Ecr => {
            needs(&[GateKind::Sx, GateKind::Rz, GateKind::X])?;
            let (c, t) = (q[0], q[1]);
            vec![
                Gate::two(GateKind::Cx, c, t),
                rz_fixed(c, -FRAC_PI_2),
                rz_fixed(t, PI),
                Gate::one(GateKind::Sx, t),
                rz_fixed(t, PI),
                Gate::one(GateKind::X, c),
            ]
        }
        GateKind::Swap => {
            let (a, b) = (q[0], q[1]);
            vec![
                Gate::two(GateKind::Cx, a, b),
                Gate::two(GateKind::Cx, b, a),
                Gate::two(GateKind::Cx, a, b),
            ]
        }
        GateKind::Measure => return Err(unsupported()),
    };
    Ok(out)
}

fn lower(gate: &Gate, basis: &NativeBasis, out: &mut Vec<Gate>, budget: usize) -> Result<()> {
    if basis.contains(gate.kind) {
        out.push(gate.clone());
        return Ok(());
    }
    if budget == 0 {
        return Err(Error::UnsupportedGate(gate.kind.name().to_string()));
    }
    for g in rewrite(gate, basis)? {
        lower(&g, basis, out, budget - 1)?;
    }
    Ok(())
}

/// Rewrites every gate into `basis` using the fixed rule table. Parameter
/// and input bindings are carried onto exactly one native rotation each.
pub fn decompose_to_basis(circuit: &Circuit, basis: &NativeBasis) -> Result<Circuit> {
    let mut gates = Vec::with_capacity(circuit.gates().len() * 4);
    for gate in circuit.gates() {
        lower(gate, basis, &mut gates, 4)?;
    }
    Circuit::from_gates(circuit.n_qubits(), gates)
}

/// Output of [`route`]. `final_layout[l]` is the physical qubit holding
/// logical qubit `l` once the circuit has run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedCircuit {
    pub circuit: Circuit,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub swaps: usize,
}

/// Greedy router with the trivial initial layout (logical `i` on physical
/// `i`). A two-qubit gate on non-adjacent qubits moves its first operand
/// along the shortest path toward the second until they touch, emitting one
/// SWAP per hop.
pub fn route(circuit: &Circuit, coupling: &CouplingMap) -> Result<RoutedCircuit> {
    let n_phys = coupling.n_physical();
    if circuit.n_qubits() > n_phys {
        return Err(Error::InvalidInput(format!(
            "{}-qubit circuit does not fit on {n_phys} physical qubits",
            circuit.n_qubits()
        )));
    }
    let initial_layout: Vec<usize> = (0..circuit.n_qubits()).collect();
    let mut l2p = initial_layout.clone();
    let mut p2l: Vec<Option<usize>> = (0..n_phys)
        .map(|p| (p < circuit.n_qubits()).then_some(p))
        .collect();
    let mut gates = Vec::with_capacity(circuit.gates().len());
    let mut swaps = 0;
    for gate in circuit.gates() {
        if gate.kind.class() == GateClass::TwoQubit {
            let (pa, pb) = (l2p[gate.qubits[0]], l2p[gate.qubits[1]]);
            if !coupling.are_adjacent(pa, pb) {
                let path = coupling.shortest_path(pa, pb);
                for hop in path.windows(2).take(path.len() - 2) {
                    let (x, y) = (hop[0], hop[1]);
                    gates.push(Gate::two(GateKind::Swap, x, y));
                    swaps += 1;
                    p2l.swap(x, y);
                    for p in [x, y] {
                        if let Some(l) = p2l[p] {
                            l2p[l] = p;
                        }
                    }
                }
            }
        }
        gates.push(Gate {
            kind: gate.kind,
            qubits: gate.qubits.iter().map(|&l| l2p[l]).collect(),
            angle: gate.angle,
        });
    }
    Ok(RoutedCircuit {
        circuit: Circuit::from_gates(n_phys, gates)?,
        initial_layout,
        final_layout: l2p,
        swaps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranspiledCircuit {
    pub physical: Circuit,
    /// Counts of the basis-decomposed but unrouted circuit.
    pub logical_counts: GateCounts,
    pub physical_counts: GateCounts,
    pub initial_layout: Vec<usize>,
    pub final_layout: Vec<usize>,
    pub swaps_inserted: usize,
}

/// Routes then decomposes. `logical_counts` come from decomposing without
/// routing (all-to-all connectivity), `physical_counts` from the full
/// pipeline, so their two-qubit difference is routing overhead. Deterministic.
pub fn transpile(circuit: &Circuit, backend: &BackendModel) -> Result<TranspiledCircuit> {
    let logical = decompose_to_basis(circuit, &backend.basis)?;
    let routed = route(circuit, &backend.coupling_map)?;
    let physical = decompose_to_basis(&routed.circuit, &backend.basis)?;
    Ok(TranspiledCircuit {
        logical_counts: gate_counts(&logical),
        physical_counts: gate_counts(&physical),
        physical,
        initial_layout: routed.initial_layout,
        final_layout: routed.final_layout,
        swaps_inserted: routed.swaps,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Treat native `RZ` as a zero-duration frame change.
    pub zero_rz: bool,
}

fn gate_duration(gate: &Gate, cal: &Calibration, opts: ScheduleOptions) -> Result<f64> {
    Ok(match gate.kind.class() {
        GateClass::OneQubit if opts.zero_rz && gate.kind == GateKind::Rz => 0.0,
        GateClass::OneQubit => cal.t_1q,
        GateClass::Measurement => cal.t_meas,
        GateClass::TwoQubit => cal.t_2q(gate.kind.name()).ok_or_else(|| {
            Error::UnsupportedGate(format!("{} has no calibrated duration", gate.kind))
        })?,
    })
}

/// As-soon-as-possible list schedule: each gate starts once all of its
/// qubits are free. Returns the makespan in seconds.
pub fn asap_schedule(circuit: &Circuit, cal: &Calibration, opts: ScheduleOptions) -> Result<f64> {
    let mut free_at = vec![0.0f64; circuit.n_qubits()];
    let mut makespan = 0.0f64;
    for gate in circuit.gates() {
        let start = gate.qubits.iter().map(|&q| free_at[q]).fold(0.0, f64::max);
        let end = start + gate_duration(gate, cal, opts)?;
        for &q in &gate.qubits {
            free_at[q] = end;
        }
        makespan = makespan.max(end);
    }
    Ok(makespan)
}

/// Serial sum of every gate duration, i.e. the makespan if nothing ran in
/// parallel.
pub fn serial_duration(circuit: &Circuit, cal: &Calibration, opts: ScheduleOptions) -> Result<f64> {
    circuit
        .gates()
        .iter()
        .map(|g| gate_duration(g, cal, opts))
        .sum()
}
