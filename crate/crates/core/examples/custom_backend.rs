//! Describe a device in JSON, load it and cost a circuit on it.

use qcostnas::backend::BackendModel;
use qcostnas::circuits::{build_ansatz, Entangler, RotationKind, RotationSet, Topology};
use qcostnas::qcost::{quantum_training_cost, TrainingPlan};
use qcostnas::transpiler::transpile;

const RING5: &str = r#"{
  "schema_version": 1,
  "name": "ring5_cz",
  "n_qubits": 5,
  "coupling_map": [[0, 1], [1, 2], [2, 3], [3, 4], [4, 0]],
  "basis": {"one_qubit": ["rz", "sx", "x"], "two_qubit": ["cz"]},
  "calibration": {
    "t_1q": {"value": 40, "unit": "ns"},
    "t_2q": {"cz": {"value": 0.25, "unit": "us"}},
    "t_meas": {"value": 1.5, "unit": "us"},
    "eps_1q": 0.0005,
    "eps_2q": 0.008,
    "eps_meas": 0.015,
    "t2": {"value": 80, "unit": "us"}
  }
}"#;

fn main() -> qcostnas::Result<()> {
    let backend = BackendModel::from_json(RING5)?;
    let ry = RotationSet::single(RotationKind::Ry);
    for topology in [
        Topology::Linear,
        Topology::Circular,
        Topology::Star,
        Topology::Full,
    ] {
        let circuit = build_ansatz(5, 2, ry, Entangler::Cnot, topology)?;
        let t = transpile(&circuit, &backend)?;
        let plan = TrainingPlan {
            n_params: circuit.n_params() as u64,
            n_steps: 100,
        };
        let q = quantum_training_cost(&t, &backend.calibration, plan)?;
        println!(
            "{:<10} swaps {:>2}  cz {:>3}  p_fail {:.3}  t_eff {:.3} us",
            format!("{topology:?}"),
            t.swaps_inserted,
            t.physical_counts.n_2q,
            q.p_fail,
            q.t_eff * 1e6
        );
    }
    Ok(())
}
