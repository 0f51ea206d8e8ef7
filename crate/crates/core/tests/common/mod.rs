//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into the library's numerics: the simulator builds full
//! dense operators, the cost oracle is straight-line arithmetic, and the
//! NSGA-II oracles are quadratic brute force.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_complex::Complex64;
use qcostnas::backend::Calibration;
use qcostnas::circuits::{Angle, Circuit, GateCounts, GateKind};
use rand::Rng;

type C = Complex64;

const fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

// ---------------------------------------------------------------- dense simulator

type M2 = [[C; 2]; 2];

const ID: M2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
const PX: M2 = [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
const PY: M2 = [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]];
const PZ: M2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
const P0: M2 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
const P1: M2 = [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];

/// `exp(-i θ P / 2) = cos(θ/2) I − i sin(θ/2) P`.
fn pauli_rotation(p: M2, theta: f64) -> M2 {
    let (s, co) = (theta / 2.0).sin_cos();
    let mut m = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = ID[i][j] * co - c(0.0, 1.0) * p[i][j] * s;
        }
    }
    m
}

/// A two-qubit operator as a sum of `coefficient · A_first ⊗ B_second`.
type Terms = Vec<(C, M2, M2)>;

fn two_qubit_terms(kind: GateKind) -> Terms {
    let one = c(1.0, 0.0);
    let h = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    match kind {
        // |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ X
        GateKind::Cx => vec![(one, P0, ID), (one, P1, PX)],
        GateKind::Cz => vec![(one, P0, ID), (one, P1, PZ)],
        // (II + XX + YY + ZZ) / 2
        GateKind::Swap => {
            let half = c(0.5, 0.0);
            vec![
                (half, ID, ID),
                (half, PX, PX),
                (half, PY, PY),
                (half, PZ, PZ),
            ]
        }
        // (X ⊗ I + Y ⊗ X) / √2
        GateKind::Ecr => vec![(h, PX, ID), (h, PY, PX)],
        other => panic!("{other:?} is not a two-qubit gate"),
    }
}

/// Full `2ⁿ × 2ⁿ` operator of a gate; qubit `q` is bit `q` of the index.
fn dense_operator(n: usize, kind: GateKind, qubits: &[usize], theta: f64) -> Vec<Vec<C>> {
    let dim = 1 << n;
    let terms: Terms = match kind {
        GateKind::Rx => vec![(c(1.0, 0.0), pauli_rotation(PX, theta), ID)],
        GateKind::Ry => vec![(c(1.0, 0.0), pauli_rotation(PY, theta), ID)],
        GateKind::Rz => vec![(c(1.0, 0.0), pauli_rotation(PZ, theta), ID)],
        GateKind::X => vec![(c(1.0, 0.0), PX, ID)],
        // √X = e^{iπ/4} RX(π/2)
        GateKind::Sx => {
            let phase = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
            vec![(phase, pauli_rotation(PX, std::f64::consts::FRAC_PI_2), ID)]
        }
        GateKind::Measure => vec![(c(1.0, 0.0), ID, ID)],
        k => two_qubit_terms(k),
    };
    let a = qubits[0];
    let b = qubits.get(1).copied();
    let mut u = vec![vec![c(0.0, 0.0); dim]; dim];
    for (row, u_row) in u.iter_mut().enumerate() {
        for (col, entry) in u_row.iter_mut().enumerate() {
            let mut rest = row ^ col;
            rest &= !(1 << a);
            if let Some(b) = b {
                rest &= !(1 << b);
            }
            if rest != 0 {
                continue;
            }
            let bit = |x: usize, q: usize| (x >> q) & 1;
            *entry = terms
                .iter()
                .map(|(k, m1, m2)| {
                    let second = b.map_or(c(1.0, 0.0), |b| m2[bit(row, b)][bit(col, b)]);
                    k * m1[bit(row, a)][bit(col, a)] * second
                })
                .sum();
        }
    }
    u
}

fn resolve(angle: &Angle, params: &[f64], inputs: &[f64]) -> f64 {
    match *angle {
        Angle::Fixed(t) => t,
        Angle::Param { index, offset } => params[index] + offset,
        Angle::Input { index, offset } => inputs[index] + offset,
    }
}

/// Statevector of `circuit` from `|0…0⟩` by dense matrix products.
pub fn dense_state(circuit: &Circuit, params: &[f64], inputs: &[f64]) -> Vec<C> {
    let n = circuit.n_qubits();
    let dim = 1 << n;
    let mut psi = vec![c(0.0, 0.0); dim];
    psi[0] = c(1.0, 0.0);
    for g in circuit.gates() {
        let theta = g.angle.as_ref().map_or(0.0, |a| resolve(a, params, inputs));
        let u = dense_operator(n, g.kind, &g.qubits, theta);
        psi = u
            .iter()
            .map(|row| row.iter().zip(&psi).map(|(x, y)| x * y).sum())
            .collect();
    }
    psi
}

/// `⟨Z_q⟩` for every qubit.
pub fn dense_expect_z(circuit: &Circuit, params: &[f64], inputs: &[f64]) -> Vec<f64> {
    let psi = dense_state(circuit, params, inputs);
    (0..circuit.n_qubits())
        .map(|q| {
            psi.iter()
                .enumerate()
                .map(|(i, a)| {
                    if (i >> q) & 1 == 0 {
                        a.norm_sqr()
                    } else {
                        -a.norm_sqr()
                    }
                })
                .sum()
        })
        .collect()
}

/// Central finite-difference jacobian `(n_qubits, n_params)` of `⟨Z⟩`.
pub fn finite_difference_jacobian(
    circuit: &Circuit,
    params: &[f64],
    inputs: &[f64],
    h: f64,
) -> Vec<Vec<f64>> {
    let n_out = circuit.n_qubits();
    let mut jac = vec![vec![0.0; params.len()]; n_out];
    for j in 0..params.len() {
        let mut plus = params.to_vec();
        let mut minus = params.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let (zp, zm) = (
            dense_expect_z(circuit, &plus, inputs),
            dense_expect_z(circuit, &minus, inputs),
        );
        for q in 0..n_out {
            jac[q][j] = (zp[q] - zm[q]) / (2.0 * h);
        }
    }
    jac
}

/// `|⟨a|b⟩|`, 1 when the states agree up to global phase.
pub fn overlap(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm()
}

/// Places a logical state on physical qubits: logical `l` sits on
/// `layout[l]`, every other physical qubit is `|0⟩`.
pub fn embed_state(logical: &[C], layout: &[usize], n_physical: usize) -> Vec<C> {
    let mut out = vec![c(0.0, 0.0); 1 << n_physical];
    for (i, a) in logical.iter().enumerate() {
        let j: usize = layout
            .iter()
            .enumerate()
            .map(|(l, &p)| ((i >> l) & 1) << p)
            .sum();
        out[j] = *a;
    }
    out
}

// ---------------------------------------------------------------- cost oracles

/// Field-for-field mirror of the quantum cost breakdown.
#[derive(Debug, Clone, Copy)]
pub struct QuantumOracle {
    pub t_gate: f64,
    pub t_routing: f64,
    pub t_logical: f64,
    pub p_gate: f64,
    pub p_decoh: f64,
    pub p_fail: f64,
    pub t_eff: f64,
    pub n_eval: u64,
    pub t_quantum: f64,
    pub t_quantum_total: f64,
    pub reliability_penalty: f64,
}

fn t2q_for(cal: &BTreeMap<String, f64>, gate: &str) -> f64 {
    cal[gate]
}

/// Straight-line quantum training cost.
pub fn quantum_oracle(
    logical: &GateCounts,
    physical: &GateCounts,
    cal: &Calibration,
    n_params: u64,
    n_steps: u64,
) -> QuantumOracle {
    // gate time
    let two_q = if physical.n_2q_by_gate.is_empty() {
        let only = *cal.t_2q_by_gate.values().next().unwrap();
        physical.n_2q as f64 * only
    } else {
        physical
            .n_2q_by_gate
            .iter()
            .map(|(g, &n)| n as f64 * t2q_for(&cal.t_2q_by_gate, g))
            .sum()
    };
    let t_gate = physical.n_1q as f64 * cal.t_1q + two_q + physical.n_meas as f64 * cal.t_meas;
    // routing
    let mut t_routing = 0.0;
    if physical.n_2q_by_gate.is_empty() && logical.n_2q_by_gate.is_empty() {
        if physical.n_2q > logical.n_2q {
            t_routing =
                (physical.n_2q - logical.n_2q) as f64 * *cal.t_2q_by_gate.values().next().unwrap();
        }
    } else {
        for (g, &n) in &physical.n_2q_by_gate {
            let before = logical.n_2q_by_gate.get(g).copied().unwrap_or(0);
            if n > before {
                t_routing += (n - before) as f64 * t2q_for(&cal.t_2q_by_gate, g);
            }
        }
    }
    let t_logical = if t_gate > t_routing {
        t_gate - t_routing
    } else {
        0.0
    };
    // reliability
    let survive = (1.0 - cal.eps_1q).powf(physical.n_1q as f64)
        * (1.0 - cal.eps_2q).powf(physical.n_2q as f64)
        * (1.0 - cal.eps_meas).powf(physical.n_meas as f64);
    let p_gate = 1.0 - survive;
    let p_decoh = 1.0 - (-t_gate / cal.t2).exp();
    let p_fail = 1.0 - (1.0 - p_gate) * (1.0 - p_decoh);
    // effective time
    let t_eff = (t_logical + t_routing) / (1.0 - p_fail);
    // gradient evaluations, then steps
    let n_eval = 2 * n_params;
    let t_quantum = t_eff * n_eval as f64;
    QuantumOracle {
        t_gate,
        t_routing,
        t_logical,
        p_gate,
        p_decoh,
        p_fail,
        t_eff,
        n_eval,
        t_quantum,
        t_quantum_total: t_quantum * n_steps as f64,
        reliability_penalty: t_eff - (t_logical + t_routing),
    }
}

/// `|a − b| ≤ tol · max(|a|, |b|)`, treating two exact zeros as equal.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Random calibration with one or two native entanglers.
pub fn random_calibration<R: Rng>(rng: &mut R, natives: &[&str]) -> Calibration {
    Calibration {
        t_1q: rng.random_range(10e-9..100e-9),
        t_2q_by_gate: natives
            .iter()
            .map(|g| (g.to_string(), rng.random_range(100e-9..700e-9)))
            .collect(),
        t_meas: rng.random_range(300e-9..5e-6),
        eps_1q: rng.random_range(0.0..1e-3),
        eps_2q: rng.random_range(0.0..2e-2),
        eps_meas: rng.random_range(0.0..5e-2),
        t2: rng.random_range(20e-6..300e-6),
        raw: None,
    }
}

/// Random typed counts over `natives`; physical two-qubit counts may sit
/// above or below the logical ones.
pub fn random_count_pair<R: Rng>(rng: &mut R, natives: &[&str]) -> (GateCounts, GateCounts) {
    let draw = |rng: &mut R, extra: u64| {
        let mut g = GateCounts::new(rng.random_range(0..200) + extra, 0, rng.random_range(0..8));
        for name in natives {
            let n = rng.random_range(0..40) + extra;
            g = g.with_typed(name, n);
            g.n_2q += n;
        }
        g
    };
    let logical = draw(rng, 0);
    let extra = rng.random_range(0..6);
    let physical = draw(rng, extra);
    (logical, physical)
}

// ---------------------------------------------------------------- NSGA-II oracles

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Fronts by repeated peeling of the non-dominated remainder; each front in
/// ascending index order.
pub fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        remaining.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Crowding distance: per objective, stable sort by value then index;
/// objectives with zero range are skipped; otherwise the first and last
/// are infinite and interior points add the normalized neighbour gap.
pub fn oracle_crowding(front: &[Vec<f64>]) -> Vec<f64> {
    let n = front.len();
    let mut d = vec![0.0f64; n];
    if n == 0 {
        return d;
    }
    for k in 0..front[0].len() {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            front[a][k]
                .partial_cmp(&front[b][k])
                .unwrap()
                .then(a.cmp(&b))
        });
        let range = front[idx[n - 1]][k] - front[idx[0]][k];
        if range == 0.0 {
            continue;
        }
        d[idx[0]] = f64::INFINITY;
        d[idx[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            d[idx[w]] += (front[idx[w + 1]][k] - front[idx[w - 1]][k]) / range;
        }
    }
    d
}

/// Survivors: sort everything by (rank, −crowding, index), keep `size`,
/// return ascending.
pub fn oracle_truncation(points: &[Vec<f64>], size: usize) -> Vec<usize> {
    let fronts = brute_force_fronts(points);
    let mut key = vec![(0usize, 0.0f64); points.len()];
    for (r, f) in fronts.iter().enumerate() {
        let members: Vec<Vec<f64>> = f.iter().map(|&i| points[i].clone()).collect();
        for (&i, cd) in f.iter().zip(oracle_crowding(&members)) {
            key[i] = (r, cd);
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        key[a]
            .0
            .cmp(&key[b].0)
            .then(key[b].1.partial_cmp(&key[a].1).unwrap())
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(size).collect();
    kept.sort_unstable();
    kept
}

/// Random 4-D objective set with deliberate ties.
pub fn random_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..4)
                .map(|_| {
                    f64::from(rng.random_range(0u8..8)) / 8.0
                        + 0.01 * f64::from(rng.random_range(0u8..2))
                })
                .collect()
        })
        .collect()
}
