// Transpile a circuit file and compare the serial gate time with the ASAP makespan.
//
//   cargo run --example transpile_and_schedule -- [circuit] [backend]

use std::path::PathBuf;

use qcostnas::backend::resolve_backend;
use qcostnas::circuits::load_circuit;
use qcostnas::qcost::gate_execution_time;
use qcostnas::transpiler::{asap_schedule, transpile, ScheduleOptions};

fn main() -> qcostnas::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/data/ring4.txt"
        ))
    });
    let backend = resolve_backend(&args.next().unwrap_or_else(|| "fake_linear7".into()))?;

    let circuit = load_circuit(&path)?;
    let t = transpile(&circuit, &backend)?;
    println!("{} on {}", path.display(), backend.name);
    println!("  logical 2q   {:?}", t.logical_counts.n_2q_by_gate);
    println!("  physical 2q  {:?}", t.physical_counts.n_2q_by_gate);
    println!("  swaps        {}", t.swaps_inserted);
    println!(
        "  layout       {:?} -> {:?}",
        t.initial_layout, t.final_layout
    );

    let serial = gate_execution_time(&t.physical_counts, &backend.calibration)?;
    for zero_rz in [false, true] {
        let makespan = asap_schedule(
            &t.physical,
            &backend.calibration,
            ScheduleOptions { zero_rz },
        )?;
        println!(
            "  zero_rz={zero_rz:<5}  serial {:.3} us  makespan {:.3} us  gap {:.1}%",
            serial * 1e6,
            makespan * 1e6,
            100.0 * (serial - makespan) / serial
        );
    }
    Ok(())
}
