//! Quantum and classical training cost of one hybrid model on every preset backend.
//!
//! ```text
//! cargo run --example cost_breakdown
//! ```

use qcostnas::backend::BackendModel;
use qcostnas::ccost::{classical_cost, total_cost};
use qcostnas::circuits::{Entangler, RotationKind, RotationSet, Topology};
use qcostnas::hybrid::{count_spec_parameters, fixed_cnn, ModelSpec, QuantumSpec};
use qcostnas::qcost::{quantum_training_cost, TrainingPlan};
use qcostnas::transpiler::transpile;

const N_STEPS: u64 = 500;
const BATCH: usize = 32;
const PHI: f64 = 1e9;

fn main() -> qcostnas::Result<()> {
    let quantum = QuantumSpec {
        n_qubits: 4,
        depth: 2,
        rotations: RotationSet::new(&[RotationKind::Ry, RotationKind::Rz])?,
        entangler: Entangler::Cnot,
        topology: Topology::Circular,
    };
    let spec = ModelSpec::new(fixed_cnn(), quantum, 4);
    let circuit = quantum.circuit()?;
    let n_params = circuit.n_params() as u64;

    let classical = classical_cost(spec.classical_step_flops(BATCH)? as f64, PHI, N_STEPS)?;
    println!("model parameters      {}", count_spec_parameters(&spec)?);
    println!("circuit parameters    {n_params}");
    println!("classical FLOPs/step  {:.3e}", classical.f_candidate);
    println!(
        "classical time        {:.4} s\n",
        classical.t_classical_total
    );

    println!(
        "{:<16} {:>6} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "backend", "swaps", "t_logical", "t_routing", "penalty", "t_eff", "total"
    );
    for name in ["fake_linear7", "fake_grid16", "fake_heavyhex27"] {
        let backend = BackendModel::preset(name)?;
        let t = transpile(&circuit, &backend)?;
        let q = quantum_training_cost(
            &t,
            &backend.calibration,
            TrainingPlan {
                n_params,
                n_steps: N_STEPS,
            },
        )?;
        println!(
            "{:<16} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4}",
            name,
            t.swaps_inserted,
            q.t_logical,
            q.t_routing,
            q.reliability_penalty,
            q.t_eff,
            total_cost(&classical, &q),
        );
    }
    Ok(())
}
