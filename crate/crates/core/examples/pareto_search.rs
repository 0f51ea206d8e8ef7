//! A short architecture search, followed by export and the routing ablation.
//!
//! ```text
//! cargo run --release --example pareto_search -- [fixed|variable] [out-dir]
//! ```

use std::path::PathBuf;

use qcostnas::nas::{run_search, DatasetConfig, SearchConfig, SearchMode};
use qcostnas::report::{archive_normalization, cmd_ablate, cmd_export_pareto, ExportFormat};

fn main() -> qcostnas::Result<()> {
    let mut args = std::env::args().skip(1);
    let mode = match args.next().as_deref() {
        Some("variable") => SearchMode::Variable,
        _ => SearchMode::Fixed,
    };
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("qcostnas-example-out"));

    let config = SearchConfig {
        mode,
        generations: 4,
        population: 8,
        dataset: DatasetConfig {
            n_classes: 3,
            samples_per_class: 30,
            seed: 1,
        },
        ..SearchConfig::default()
    };
    let archive = run_search(&config)?;

    let norm = archive_normalization(&archive);
    for g in 0..archive.generations.len() {
        println!(
            "generation {g}: normalized HV {:.4}",
            norm.hypervolume(&archive.generation_front(g))?
        );
    }
    println!("\nfinal front");
    for e in archive.front() {
        println!(
            "  {:<32} acc {:.3}  quantum {:.3e} s  classical {:.3e} s  params {}",
            e.label, e.accuracy, e.objectives[1], e.objectives[2], e.params_total
        );
    }

    let written = cmd_export_pareto(
        &archive,
        &[ExportFormat::Csv, ExportFormat::Json, ExportFormat::Svg],
        &out,
    )?;
    println!("\nwrote {} files to {}", written.len(), out.display());
    print!("\n{}", cmd_ablate(&archive).to_csv()?);
    Ok(())
}
