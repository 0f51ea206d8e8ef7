//! Parameter-shift and adjoint Jacobians of the same ansatz agree; the adjoint
//! pass needs a single forward execution.

use qcostnas::circuits::{build_ansatz, embed, Entangler, RotationKind, RotationSet, Topology};
use qcostnas::simkernel::{expect_z, grad_adjoint, grad_parameter_shift, run};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qcostnas::Result<()> {
    let rotations = RotationSet::new(&[RotationKind::Rx, RotationKind::Ry])?;
    let circuit = embed(
        &build_ansatz(3, 2, rotations, Entangler::Cz, Topology::Full)?,
        3,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params: Vec<f64> = (0..circuit.n_params())
        .map(|_| rng.random_range(-3.0..3.0))
        .collect();
    let inputs = [0.3, -0.7, 1.1];

    println!("<Z> = {:?}", expect_z(&run(&circuit, &params, &inputs)?));
    let shift = grad_parameter_shift(&circuit, &params, &inputs)?;
    let adjoint = grad_adjoint(&circuit, &params, &inputs)?;
    let worst = shift
        .jacobian
        .iter()
        .flatten()
        .zip(adjoint.jacobian.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("jacobian shape       {:?}", shift.shape());
    println!("shift executions     {}", shift.executions);
    println!("adjoint executions   {}", adjoint.executions);
    println!("max |difference|     {worst:.2e}");
    Ok(())
}
