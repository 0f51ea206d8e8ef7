//! The `qcostnas` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qcostnas"));
    c.env_remove("QCOSTNAS_CACHE_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn qcostnas")
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples/data")
        .join(name)
}

fn json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn estimate_reports_the_breakdown() {
    let circuit = data("ring4.txt");
    let v = json(&run(&[
        "estimate",
        "--circuit",
        circuit.to_str().unwrap(),
        "--steps",
        "10",
    ]));
    assert_eq!(v["n_eval"], 8);
    let sum = v["t_logical"].as_f64().unwrap()
        + v["t_routing"].as_f64().unwrap()
        + v["reliability_penalty"].as_f64().unwrap();
    assert!((sum - v["t_eff"].as_f64().unwrap()).abs() <= 1e-12 * sum);
    let total = v["t_quantum_total"].as_f64().unwrap();
    let doubled = json(&run(&[
        "estimate",
        "--circuit",
        circuit.to_str().unwrap(),
        "--steps",
        "20",
    ]));
    assert_eq!(doubled["t_quantum_total"].as_f64().unwrap(), 2.0 * total);
}

#[test]
fn transpile_counts_and_schedule() {
    let qasm = data("bell.qasm");
    let v = json(&run(&[
        "transpile",
        "--in",
        qasm.to_str().unwrap(),
        "--report",
        "schedule",
    ]));
    assert!(
        v["physical_counts"]["n_2q"].as_u64().unwrap()
            >= v["logical_counts"]["n_2q"].as_u64().unwrap()
    );
    assert!(v["makespan_s"].as_f64().unwrap() > 0.0);
    let counts = json(&run(&[
        "transpile",
        "--in",
        qasm.to_str().unwrap(),
        "--backend",
        "fake_grid16",
    ]));
    assert_eq!(counts["backend"], "fake_grid16");
    assert!(counts.get("makespan_s").is_none());
}

#[test]
fn validate_scheduler_is_reproducible() {
    let args = [
        "validate-scheduler",
        "--n-circuits",
        "5",
        "--max-depth",
        "80",
        "--seed",
        "9",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("# qcostnas validation v1"));
    assert_eq!(text.lines().count(), 2 + 5);
}

#[test]
fn search_then_ablate_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"mode": "variable", "generations": 2, "population": 4,
            "dataset": {"n_classes": 2, "samples_per_class": 20}}"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let s = run(&[
        "search",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    for f in [
        "archive.json",
        "pareto.csv",
        "front.csv",
        "pareto_accuracy_vs_quantum.svg",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let archive = out.join("archive.json");
    let ablation = run(&["ablate", "--archive", archive.to_str().unwrap()]);
    assert!(ablation.status.success());
    assert!(String::from_utf8(ablation.stdout)
        .unwrap()
        .starts_with("# qcostnas ablation v1"));

    let again = dir.path().join("again");
    let e = run(&[
        "export",
        "--archive",
        archive.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(e.status.success());
    assert_eq!(
        std::fs::read(out.join("pareto.csv")).unwrap(),
        std::fs::read(again.join("pareto.csv")).unwrap()
    );
}

#[test]
fn train_one_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"dataset": {"n_classes": 2, "samples_per_class": 20}, "training": {"epochs": 2}}"#,
    )
    .unwrap();
    let genome = r#"{"n_qubits": 2, "depth": 1, "rotations": ["ry"], "entangler": "cnot", "topology": "linear", "classical": null}"#;
    let snap = dir.path().join("snap");
    let out = run(&[
        "train-one",
        "--genome",
        genome,
        "--config",
        config.to_str().unwrap(),
        "--snapshot",
        snap.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["label"], "q2-d1-ry-cnot-linear");
    assert!(snap.join("model.json").is_file() && snap.join("dataset.json").is_file());
}

#[test]
fn errors_map_to_exit_codes() {
    let circuit = data("ring4.txt");
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(
        code(&["export", "--archive", "x.json", "--format", "png"]),
        2
    );
    assert_eq!(
        code(&["ablate", "--archive", "/definitely/not/here.json"]),
        3
    );
    assert_eq!(
        code(&[
            "estimate",
            "--circuit",
            circuit.to_str().unwrap(),
            "--backend",
            "nowhere"
        ]),
        6
    );
    assert_eq!(code(&["calibrate-classical", "--reference", "resnet"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
}
