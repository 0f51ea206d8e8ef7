//! Search, archive, export and ablation working together on a small run.

mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use qcostnas::nas::{
    run_search_with, DatasetConfig, EvalContext, ParetoArchive, SearchConfig, SearchMode,
};
use qcostnas::report::{
    archive_normalization, cmd_ablate, cmd_export_pareto, front_csv, hypervolume, pareto_csv,
    ExportFormat, NORMALIZED_REFERENCE,
};

fn small_config(mode: SearchMode) -> SearchConfig {
    SearchConfig {
        mode,
        seed: 7,
        generations: 3,
        population: 6,
        dataset: DatasetConfig {
            n_classes: 2,
            samples_per_class: 20,
            seed: 3,
        },
        ..SearchConfig::default()
    }
}

fn archive() -> &'static ParetoArchive {
    static ARCHIVE: OnceLock<ParetoArchive> = OnceLock::new();
    ARCHIVE.get_or_init(|| {
        let ctx = EvalContext::new(&small_config(SearchMode::Variable))
            .unwrap()
            .with_cache_dir(None);
        run_search_with(&ctx).unwrap()
    })
}

/// CSV body rows, skipping the schema comment and header.
fn data_rows(csv: &str) -> Vec<Vec<String>> {
    let body: String = csv.lines().skip(1).collect::<Vec<_>>().join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn archive_shape() {
    let a = archive();
    assert_eq!(a.generations.len(), 3);
    assert!(a.generations.iter().all(|g| g.members.len() == 6));
    assert!(!a.final_front.is_empty());
    for g in &a.generations {
        assert!(g.members.iter().any(|m| m.rank == 1));
        for m in &g.members {
            assert!(a.evaluations.contains_key(&m.key));
        }
    }
}

#[test]
fn pareto_csv_rows_and_flags() {
    let a = archive();
    let text = pareto_csv(a).unwrap();
    assert!(text.starts_with("# qcostnas pareto v1\n"));
    let rows = data_rows(&text);
    let expected: usize = a.generations.iter().map(|g| g.members.len()).sum();
    assert_eq!(rows.len(), expected);
    // Columns: generation, rank, crowding, final_front, key, ...
    let flagged: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r[3] == "1")
        .map(|r| r[4].as_str())
        .collect();
    let front: BTreeSet<&str> = a.final_front.iter().map(String::as_str).collect();
    assert!(flagged.is_subset(&front));
    let front_rows = data_rows(&front_csv(a).unwrap());
    let listed: BTreeSet<&str> = front_rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(listed, front);
}

#[test]
fn final_front_is_nondominated_over_everything() {
    let a = archive();
    let front: BTreeSet<&String> = a.final_front.iter().collect();
    for e in a.evaluations.values() {
        let dominated = a
            .evaluations
            .values()
            .any(|o| common::dominates(&o.objectives, &e.objectives));
        assert_eq!(!dominated, front.contains(&e.key), "{}", e.label);
    }
}

#[test]
fn export_is_byte_identical_and_round_trips() {
    let a = archive();
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let all = [ExportFormat::Csv, ExportFormat::Json, ExportFormat::Svg];
    let w1 = cmd_export_pareto(a, &all, d1.path()).unwrap();
    let w2 = cmd_export_pareto(a, &all, d2.path()).unwrap();
    assert_eq!(w1.len(), w2.len());
    for (p1, p2) in w1.iter().zip(&w2) {
        assert_eq!(p1.file_name(), p2.file_name());
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
    let svgs = w1
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .count();
    assert_eq!(svgs, 4);

    let loaded = ParetoArchive::load(&d1.path().join("archive.json")).unwrap();
    assert_eq!(&loaded, a);
    assert_eq!(pareto_csv(&loaded).unwrap(), pareto_csv(a).unwrap());
    assert_eq!(cmd_ablate(&loaded), cmd_ablate(a));
}

#[test]
fn ablation_rows() {
    let a = archive();
    let report = cmd_ablate(a);
    assert_eq!(report.rows.len(), a.final_front.len());
    for w in report.rows.windows(2) {
        assert!(w[0].t_eff >= w[1].t_eff);
    }
    for r in &report.rows {
        let sum = r.t_logical + r.t_routing + r.reliability_penalty;
        assert!(common::rel_close(sum, r.t_eff, 1e-12));
        if r.topology == "linear" {
            assert_eq!(r.t_routing, 0.0);
        }
    }
    let empty = ParetoArchive {
        final_front: vec![],
        ..a.clone()
    };
    assert!(cmd_ablate(&empty).rows.is_empty());
}

#[test]
fn hypervolume_improves_over_generation_zero() {
    let a = archive();
    let norm = archive_normalization(a);
    let front: Vec<_> = a.front().iter().map(|e| e.objectives).collect();
    let gen0 = norm.hypervolume(&a.generation_front(0)).unwrap();
    let last = norm.hypervolume(&front).unwrap();
    assert!(last >= gen0);
    assert!(last <= NORMALIZED_REFERENCE.iter().product::<f64>());
    let scaled: Vec<_> = front.iter().map(|p| norm.apply(p)).collect();
    assert_eq!(hypervolume(&scaled, &NORMALIZED_REFERENCE).unwrap(), last);
}

#[test]
fn disk_cache_reproduces_the_search() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(SearchMode::Fixed);
    let cold = run_search_with(
        &EvalContext::new(&cfg)
            .unwrap()
            .with_cache_dir(Some(dir.path().into())),
    )
    .unwrap();
    let entries = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(entries, cold.evaluations.len());
    let warm = run_search_with(
        &EvalContext::new(&cfg)
            .unwrap()
            .with_cache_dir(Some(dir.path().into())),
    )
    .unwrap();
    assert_eq!(cold, warm);

    // A different dataset seed must not hit the same entries.
    let other = SearchConfig {
        dataset: DatasetConfig {
            seed: 4,
            ..cfg.dataset
        },
        ..cfg
    };
    let ctx = EvalContext::new(&other)
        .unwrap()
        .with_cache_dir(Some(dir.path().into()));
    run_search_with(&ctx).unwrap();
    assert!(std::fs::read_dir(dir.path()).unwrap().count() > entries);
}

#[test]
fn fixed_mode_shares_one_classical_stack() {
    let ctx = EvalContext::new(&small_config(SearchMode::Fixed))
        .unwrap()
        .with_cache_dir(None);
    let a = run_search_with(&ctx).unwrap();
    let flops: BTreeSet<u64> = a
        .evaluations
        .values()
        .map(|e| e.classical.f_candidate.to_bits())
        .collect();
    assert_eq!(flops.len(), 1);
    for e in a.evaluations.values() {
        assert!(e.genome.classical.is_none());
        assert_eq!(e.objectives[0], 1.0 - e.accuracy);
        assert_eq!(e.objectives[3], e.params_total as f64);
    }
}
