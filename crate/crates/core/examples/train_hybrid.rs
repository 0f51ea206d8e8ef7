//! Train one hybrid CNN + circuit model on the synthetic template dataset.

use qcostnas::circuits::{Entangler, RotationKind, RotationSet, Topology};
use qcostnas::hybrid::{
    fit, fixed_cnn, make_dataset, HybridModel, ModelSpec, QuantumSpec, TrainConfig,
};

fn main() -> qcostnas::Result<()> {
    let data = make_dataset(4, 40, 1)?;
    let quantum = QuantumSpec {
        n_qubits: 3,
        depth: 1,
        rotations: RotationSet::single(RotationKind::Ry),
        entangler: Entangler::Cnot,
        topology: Topology::Linear,
    };
    let mut model = HybridModel::new(ModelSpec::new(fixed_cnn(), quantum, data.n_classes), 5)?;
    let report = fit(
        &mut model,
        &data,
        &TrainConfig {
            epochs: 6,
            ..TrainConfig::default()
        },
    )?;

    for r in &report.history {
        println!(
            "epoch {:>2}  loss {:.4}  val acc {:.3}",
            r.epoch, r.train_loss, r.val_accuracy
        );
    }
    println!(
        "best {:.3} after {} steps (early stop: {})",
        report.accuracy, report.n_steps, report.early_stopped
    );
    Ok(())
}
