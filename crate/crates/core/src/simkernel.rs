//! Dense statevector simulation with exact per-qubit `<Z>` readout and two
//! gradient routes: adjoint differentiation (one forward and one backward
//! sweep) and the parameter-shift rule (two executions per parameter).
//!
//! Qubit ordering is little-endian: qubit `q` is bit `q` of the basis index.
//! Rotations follow `R_G(θ) = exp(-iθG/2)` for `G ∈ {X, Y, Z}`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;

use crate::circuits::{Angle, Circuit, Gate, GateKind};
use crate::error::{Error, Result};

pub const MAX_SIM_QUBITS: usize = 12;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy)]
enum Pauli {
    X,
    Y,
    Z,
}

impl Statevector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_SIM_QUBITS {
            return Err(Error::Capacity {
                n_qubits,
                max: MAX_SIM_QUBITS,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    fn apply_pauli(&mut self, q: usize, p: Pauli) {
        let bit = 1 << q;
        match p {
            Pauli::X => {
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            Pauli::Y => {
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        let (a, b) = (self.amps[i], self.amps[i | bit]);
                        self.amps[i] = -I * b;
                        self.amps[i | bit] = I * a;
                    }
                }
            }
            Pauli::Z => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
        }
    }

    fn apply_cx(&mut self, c: usize, t: usize) {
        let (cb, tb) = (1 << c, 1 << t);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1 << a) | (1 << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ab, bb) = (1 << a, 1 << b);
        for i in 0..self.amps.len() {
            if i & ab != 0 && i & bb == 0 {
                self.amps.swap(i, i ^ ab ^ bb);
            }
        }
    }

    /// ECR = (X_c + Y_c X_t)/√2. Hermitian, hence its own inverse.
    fn apply_ecr(&mut self, c: usize, t: usize) {
        let (cb, tb) = (1 << c, 1 << t);
        let s = FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & cb == 0 && i & tb == 0 {
                let a00 = self.amps[i];
                let a01 = self.amps[i | tb];
                let a10 = self.amps[i | cb];
                let a11 = self.amps[i | cb | tb];
                self.amps[i] = (a10 - I * a11) * s;
                self.amps[i | tb] = (a11 - I * a10) * s;
                self.amps[i | cb] = (a00 + I * a01) * s;
                self.amps[i | cb | tb] = (a01 + I * a00) * s;
            }
        }
    }

    fn apply_kind(&mut self, kind: GateKind, qubits: &[usize], theta: f64, inverse: bool) {
        let theta = if inverse { -theta } else { theta };
        match kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                self.apply_1q(qubits[0], rotation_matrix(kind, theta))
            }
            GateKind::Sx => {
                let p = Complex64::new(0.5, 0.5);
                let m = Complex64::new(0.5, -0.5);
                let mat = if inverse {
                    [[m, p], [p, m]]
                } else {
                    [[p, m], [m, p]]
                };
                self.apply_1q(qubits[0], mat)
            }
            GateKind::X => self.apply_pauli(qubits[0], Pauli::X),
            GateKind::Cx => self.apply_cx(qubits[0], qubits[1]),
            GateKind::Cz => self.apply_cz(qubits[0], qubits[1]),
            GateKind::Swap => self.apply_swap(qubits[0], qubits[1]),
            GateKind::Ecr => self.apply_ecr(qubits[0], qubits[1]),
            GateKind::Measure => {}
        }
    }

    /// Applies `gate` with its angle resolved against `params` and `inputs`.
    pub fn apply(&mut self, gate: &Gate, params: &[f64], inputs: &[f64]) {
        let theta = gate.angle.map_or(0.0, |a| a.resolve(params, inputs));
        self.apply_kind(gate.kind, &gate.qubits, theta, false);
    }

    fn unapply(&mut self, gate: &Gate, theta: f64) {
        self.apply_kind(gate.kind, &gate.qubits, theta, true);
    }
}

fn rotation_matrix(kind: GateKind, theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    let re = |x: f64| Complex64::new(x, 0.0);
    match kind {
        GateKind::Rx => [[re(c), -I * s], [-I * s, re(c)]],
        GateKind::Ry => [[re(c), re(-s)], [re(s), re(c)]],
        GateKind::Rz => [
            [Complex64::new(c, -s), re(0.0)],
            [re(0.0), Complex64::new(c, s)],
        ],
        _ => unreachable!("not a rotation"),
    }
}

fn generator(kind: GateKind) -> Pauli {
    match kind {
        GateKind::Rx => Pauli::X,
        GateKind::Ry => Pauli::Y,
        GateKind::Rz => Pauli::Z,
        _ => unreachable!("not a rotation"),
    }
}

fn check_bindings(circuit: &Circuit, params: &[f64], inputs: &[f64]) -> Result<()> {
    if params.len() != circuit.n_params() || inputs.len() != circuit.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "circuit binds {} params and {} inputs, got {} and {}",
            circuit.n_params(),
            circuit.n_inputs(),
            params.len(),
            inputs.len()
        )));
    }
    Ok(())
}

/// Evolves `|0…0⟩` through `circuit`. Measurements do not touch the state.
pub fn run(circuit: &Circuit, params: &[f64], inputs: &[f64]) -> Result<Statevector> {
    check_bindings(circuit, params, inputs)?;
    let mut state = Statevector::zero(circuit.n_qubits())?;
    for gate in circuit.gates() {
        state.apply(gate, params, inputs);
    }
    Ok(state)
}

/// Per-qubit `⟨Z_q⟩`.
pub fn expect_z(state: &Statevector) -> Vec<f64> {
    let mut out = vec![0.0; state.n_qubits];
    for (i, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        for (q, z) in out.iter_mut().enumerate() {
            if i >> q & 1 == 0 {
                *z += p;
            } else {
                *z -= p;
            }
        }
    }
    out
}

/// Jacobian of the per-qubit `⟨Z⟩` outputs with respect to the trainable
/// parameters, shape `(n_outputs, n_params)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult {
    pub jacobian: Vec<Vec<f64>>,
    /// Circuit executions spent producing the jacobian.
    pub executions: usize,
}

impl GradientResult {
    pub fn shape(&self) -> (usize, usize) {
        (
            self.jacobian.len(),
            self.jacobian.first().map_or(0, Vec::len),
        )
    }
}

/// Parameter-shift rule: every trainable rotation is evaluated at `θ ± π/2`
/// and `∂⟨Z⟩/∂θ = (⟨Z⟩₊ − ⟨Z⟩₋) / 2`.
pub fn grad_parameter_shift(
    circuit: &Circuit,
    params: &[f64],
    inputs: &[f64],
) -> Result<GradientResult> {
    check_bindings(circuit, params, inputs)?;
    let n_out = circuit.n_qubits();
    let mut jacobian = vec![vec![0.0; circuit.n_params()]; n_out];
    let mut executions = 0;
    let mut gates = circuit.gates().to_vec();
    for idx in 0..gates.len() {
        let Some(Angle::Param { index, .. }) = gates[idx].angle else {
            continue;
        };
        if !gates[idx].kind.is_rotation() {
            return Err(Error::UnsupportedGradient(format!(
                "parameter {index} drives a non-rotation gate"
            )));
        }
        let original = gates[idx].angle;
        let mut shifted = |delta: f64| -> Result<Vec<f64>> {
            gates[idx].angle = original.map(|a| a.shifted(delta));
            let c = Circuit::from_gates(circuit.n_qubits(), gates.clone())?;
            executions += 1;
            Ok(expect_z(&run(&c, params, inputs)?))
        };
        let plus = shifted(FRAC_PI_2)?;
        let minus = shifted(-FRAC_PI_2)?;
        gates[idx].angle = original;
        for (row, (p, m)) in jacobian.iter_mut().zip(plus.iter().zip(&minus)) {
            row[index] += (p - m) / 2.0;
        }
    }
    Ok(GradientResult {
        jacobian,
        executions,
    })
}

/// Outputs and both jacobians (parameters and data inputs) from a single
/// adjoint sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointJacobians {
    pub expectations: Vec<f64>,
    /// `(n_outputs, n_params)`
    pub params: Vec<Vec<f64>>,
    /// `(n_outputs, n_inputs)`
    pub inputs: Vec<Vec<f64>>,
}

/// Adjoint differentiation of every per-qubit `⟨Z⟩` output.
///
/// Keeps one forward state and one back-propagated observable state per
/// output, walking the gate list once in reverse.
pub fn adjoint_jacobians(
    circuit: &Circuit,
    params: &[f64],
    inputs: &[f64],
) -> Result<AdjointJacobians> {
    let mut psi = run(circuit, params, inputs)?;
    let n_out = circuit.n_qubits();
    let expectations = expect_z(&psi);
    let mut lambdas: Vec<Statevector> = (0..n_out)
        .map(|q| {
            let mut l = psi.clone();
            l.apply_pauli(q, Pauli::Z);
            l
        })
        .collect();
    let mut d_params = vec![vec![0.0; circuit.n_params()]; n_out];
    let mut d_inputs = vec![vec![0.0; circuit.n_inputs()]; n_out];
    let mut scratch = psi.clone();
    for gate in circuit.gates().iter().rev() {
        if gate.kind == GateKind::Measure {
            continue;
        }
        let theta = gate.angle.map_or(0.0, |a| a.resolve(params, inputs));
        match gate.angle {
            Some(Angle::Param { index, .. }) | Some(Angle::Input { index, .. }) => {
                scratch.amps.copy_from_slice(&psi.amps);
                scratch.apply_pauli(gate.qubits[0], generator(gate.kind));
                let target = match gate.angle {
                    Some(Angle::Param { .. }) => &mut d_params,
                    _ => &mut d_inputs,
                };
                for (k, lambda) in lambdas.iter().enumerate() {
                    target[k][index] += lambda.inner(&scratch).im;
                }
            }
            _ => {}
        }
        psi.unapply(gate, theta);
        for lambda in &mut lambdas {
            lambda.unapply(gate, theta);
        }
    }
    Ok(AdjointJacobians {
        expectations,
        params: d_params,
        inputs: d_inputs,
    })
}

/// Vector-jacobian product of the per-qubit `⟨Z⟩` outputs against
/// `cotangent`, i.e. the gradient of `Σ_k c_k ⟨Z_k⟩` with respect to the
/// parameters and the inputs. One forward and one backward sweep.
pub fn adjoint_vjp(
    circuit: &Circuit,
    params: &[f64],
    inputs: &[f64],
    cotangent: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if cotangent.len() != circuit.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "cotangent has {} entries for {} outputs",
            cotangent.len(),
            circuit.n_qubits()
        )));
    }
    let mut psi = run(circuit, params, inputs)?;
    let mut lambda = psi.clone();
    for (i, a) in lambda.amps.iter_mut().enumerate() {
        let w: f64 = cotangent
            .iter()
            .enumerate()
            .map(|(q, c)| if i >> q & 1 == 0 { *c } else { -*c })
            .sum();
        *a *= w;
    }
    let mut d_params = vec![0.0; circuit.n_params()];
    let mut d_inputs = vec![0.0; circuit.n_inputs()];
    let mut scratch = psi.clone();
    for gate in circuit.gates().iter().rev() {
        if gate.kind == GateKind::Measure {
            continue;
        }
        let theta = gate.angle.map_or(0.0, |a| a.resolve(params, inputs));
        if let Some(Angle::Param { index, .. } | Angle::Input { index, .. }) = gate.angle {
            scratch.amps.copy_from_slice(&psi.amps);
            scratch.apply_pauli(gate.qubits[0], generator(gate.kind));
            let g = lambda.inner(&scratch).im;
            match gate.angle {
                Some(Angle::Param { .. }) => d_params[index] += g,
                _ => d_inputs[index] += g,
            }
        }
        psi.unapply(gate, theta);
        lambda.unapply(gate, theta);
    }
    Ok((d_params, d_inputs))
}

/// Adjoint gradient with respect to the trainable parameters.
pub fn grad_adjoint(circuit: &Circuit, params: &[f64], inputs: &[f64]) -> Result<GradientResult> {
    let jac = adjoint_jacobians(circuit, params, inputs)?;
    Ok(GradientResult {
        jacobian: jac.params,
        executions: 1,
    })
}
