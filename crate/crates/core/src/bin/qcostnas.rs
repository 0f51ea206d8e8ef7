use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcostnas::backend::resolve_backend;
use qcostnas::circuits::load_circuit;
use qcostnas::hybrid::measure_reference_throughput;
use qcostnas::nas::{run_search_with, EvalContext, Genome, ParetoArchive, SearchConfig};
use qcostnas::qcost::{quantum_training_cost, TrainingPlan};
use qcostnas::report::{
    archive_normalization, cmd_ablate, cmd_export_pareto, cmd_validate_scheduler, write_text,
    ExportFormat, ValidationConfig,
};
use qcostnas::transpiler::{asap_schedule, transpile, ScheduleOptions};
use qcostnas::{Error, Result};

const DEFAULT_BACKEND: &str = "fake_linear7";

/// Time-based hardware cost models and architecture search for hybrid
/// quantum-classical networks.
///
/// Exit codes: 0 success, 2 usage, 3 i/o, 4 malformed json/csv/circuit,
/// 5 calibration, 6 backend, 7 unsupported gate or gradient, 8 invalid
/// input or architecture, 9 simulator capacity, 10 saturated reliability,
/// 11 diverged training.
#[derive(Parser)]
#[command(name = "qcostnas", version)]
struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Backend preset name or calibration JSON path.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TranspileReport {
    Counts,
    Schedule,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum training cost breakdown of a circuit.
    Estimate {
        #[arg(long)]
        circuit: PathBuf,
        /// Trainable parameters; defaults to the circuit's parameter slots.
        #[arg(long)]
        params: Option<u64>,
        #[arg(long, default_value_t = 1)]
        steps: u64,
    },
    /// Routes and decomposes a circuit for the backend.
    Transpile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "counts")]
        report: TranspileReport,
        /// Schedule RZ as a zero-duration frame change.
        #[arg(long)]
        zero_rz: bool,
    },
    /// Measures the classical throughput on the reference network.
    CalibrateClassical {
        #[arg(long, default_value = "fixed-cnn")]
        reference: String,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Trains and costs one genome.
    TrainOne {
        /// Genome JSON, inline or as a file path.
        #[arg(long)]
        genome: String,
        /// Search configuration supplying dataset, training and throughput.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for dataset and trained-model JSON snapshots.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Runs the NSGA-II search and writes the archive and its exports.
    Search {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compares analytical gate time with an ASAP schedule on random circuits.
    ValidateScheduler {
        #[arg(long, default_value_t = 100)]
        n_circuits: usize,
        #[arg(long, default_value_t = 2)]
        min_qubits: usize,
        #[arg(long, default_value_t = 5)]
        max_qubits: usize,
        #[arg(long, default_value_t = 50)]
        min_depth: usize,
        #[arg(long, default_value_t = 600)]
        max_depth: usize,
        #[arg(long)]
        zero_rz: bool,
    },
    /// Per-step quantum time decomposition of the final front.
    Ablate {
        #[arg(long)]
        archive: PathBuf,
    },
    /// Exports an archive as CSV, JSON and SVG.
    Export {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "csv,json,svg")]
        format: Vec<String>,
    },
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    emit_text(&text, out)
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_genome(arg: &str) -> Result<Genome> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?
    } else {
        arg.to_string()
    };
    Ok(serde_json::from_str(&text)?)
}

fn search_config(cli: &Cli, path: Option<&Path>) -> Result<SearchConfig> {
    let mut cfg = match path {
        Some(p) => SearchConfig::load(p)?,
        None => SearchConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(b) = &cli.backend {
        cfg.backend = b.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let backend_name = cli
        .backend
        .clone()
        .unwrap_or_else(|| DEFAULT_BACKEND.to_string());
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Estimate {
            circuit,
            params,
            steps,
        } => {
            let backend = resolve_backend(&backend_name)?;
            let c = load_circuit(circuit)?;
            let t = transpile(&c, &backend)?;
            let plan = TrainingPlan {
                n_params: params.unwrap_or(c.n_params() as u64),
                n_steps: *steps,
            };
            emit_json(&quantum_training_cost(&t, &backend.calibration, plan)?, out)
        }
        Command::Transpile {
            input,
            report,
            zero_rz,
        } => {
            let backend = resolve_backend(&backend_name)?;
            let c = load_circuit(input)?;
            let t = transpile(&c, &backend)?;
            let mut value = serde_json::json!({
                "backend": backend.name,
                "logical_counts": t.logical_counts,
                "physical_counts": t.physical_counts,
                "swaps_inserted": t.swaps_inserted,
                "initial_layout": t.initial_layout,
                "final_layout": t.final_layout,
            });
            if let TranspileReport::Schedule = report {
                let opts = ScheduleOptions { zero_rz: *zero_rz };
                value["makespan_s"] =
                    asap_schedule(&t.physical, &backend.calibration, opts)?.into();
                value["physical_circuit"] = t.physical.to_text().into();
            }
            emit_json(&value, out)
        }
        Command::CalibrateClassical {
            reference,
            batch,
            warmup,
            runs,
        } => {
            if reference != "fixed-cnn" {
                return Err(Error::Usage(format!(
                    "unknown reference network '{reference}'; use fixed-cnn"
                )));
            }
            let throughput =
                measure_reference_throughput(*batch, *warmup, *runs, cli.seed.unwrap_or(0))?;
            emit_json(&throughput, out)
        }
        Command::TrainOne {
            genome,
            config,
            snapshot,
        } => {
            let genome = parse_genome(genome)?;
            let ctx = EvalContext::new(&search_config(&cli, config.as_deref())?)?;
            let (eval, model) = ctx.train_genome(&genome)?;
            if let Some(dir) = snapshot {
                write_text(
                    &dir.join("dataset.json"),
                    &serde_json::to_string_pretty(&ctx.dataset)?,
                )?;
                write_text(
                    &dir.join("model.json"),
                    &serde_json::to_string_pretty(&model.snapshot())?,
                )?;
            }
            emit_json(&eval, out)
        }
        Command::Search { config } => {
            let cfg = search_config(&cli, config.as_deref())?;
            let ctx = EvalContext::new(&cfg)?;
            let archive = run_search_with(&ctx)?;
            let dir = out.unwrap_or(Path::new("qcostnas-out"));
            cmd_export_pareto(
                &archive,
                &[ExportFormat::Csv, ExportFormat::Json, ExportFormat::Svg],
                dir,
            )?;
            let norm = archive_normalization(&archive);
            let front: Vec<_> = archive.front().iter().map(|e| e.objectives).collect();
            println!(
                "{} evaluations, {} on the final front, normalized hypervolume {:.6}; wrote {}",
                archive.evaluations.len(),
                archive.final_front.len(),
                norm.hypervolume(&front)?,
                dir.display()
            );
            Ok(())
        }
        Command::ValidateScheduler {
            n_circuits,
            min_qubits,
            max_qubits,
            min_depth,
            max_depth,
            zero_rz,
        } => {
            let backend = resolve_backend(&backend_name)?;
            let cfg = ValidationConfig {
                n_circuits: *n_circuits,
                min_qubits: *min_qubits,
                max_qubits: *max_qubits,
                min_depth: *min_depth,
                max_depth: *max_depth,
                seed: cli.seed.unwrap_or(0),
                zero_rz: *zero_rz,
            };
            let report = cmd_validate_scheduler(&backend, &cfg)?;
            emit_text(&report.to_csv()?, out)?;
            eprintln!("{}", serde_json::to_string(&report.summary)?);
            Ok(())
        }
        Command::Ablate { archive } => {
            let archive = ParetoArchive::load(archive)?;
            emit_text(&cmd_ablate(&archive).to_csv()?, out)
        }
        Command::Export { archive, format } => {
            let formats = format
                .iter()
                .map(|f| f.parse())
                .collect::<Result<Vec<ExportFormat>>>()?;
            let archive = ParetoArchive::load(archive)?;
            let dir = out.unwrap_or(Path::new("."));
            for path in cmd_export_pareto(&archive, &formats, dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
