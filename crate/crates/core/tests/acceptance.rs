//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use qcostnas::backend::{BackendModel, Calibration, CouplingMap, NativeBasis, NativeTwoQubit};
use qcostnas::ccost::{
    classical_cost, count_flops, Activation, ClassicalLayerSpec, Padding, Pooling, Shape,
};
use qcostnas::circuits::{
    build_ansatz, embed, random_circuit, Entangler, GateKind, RotationSet, Topology, MAX_QUBITS,
};
use qcostnas::nas::{
    crowding_distance, environmental_selection, fast_nondominated_sort, run_search_with,
    EvalContext, ParetoArchive, SearchConfig, SearchMode,
};
use qcostnas::qcost::{quantum_training_cost_counts, TrainingPlan};
use qcostnas::report::{
    ablate, archive_normalization, cmd_ablate, cmd_validate_scheduler, front_csv, pareto_csv,
    ValidationConfig,
};
use qcostnas::simkernel::{expect_z, grad_adjoint, grad_parameter_shift, run};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Runs `body`, folds the runtime limit into the verdict and prints the line.
fn criterion(n: u32, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = o.pass && in_time;
    let timing = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!(
            "{:.2}s exceeds {:.0}s",
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        )
    };
    println!(
        "{} criterion {n}: {title} [{}; {timing}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

// ---------------------------------------------------------------- 1

fn quantum_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let native_sets: [&[&str]; 4] = [&["ecr"], &["cz"], &["cx"], &["ecr", "cz"]];
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut untyped = 0;
    for _ in 0..500 {
        let natives = *native_sets.choose(&mut rng).unwrap();
        let cal = random_calibration(&mut rng, natives);
        let (mut logical, mut physical) = random_count_pair(&mut rng, natives);
        if natives.len() == 1 && rng.random_bool(0.3) {
            logical.n_2q_by_gate.clear();
            physical.n_2q_by_gate.clear();
            untyped += 1;
        }
        let plan = TrainingPlan {
            n_params: rng.random_range(0..64),
            n_steps: rng.random_range(0..5000),
        };
        let got = quantum_training_cost_counts(&logical, &physical, &cal, plan).expect("cost");
        let want = quantum_oracle(&logical, &physical, &cal, plan.n_params, plan.n_steps);
        let pairs = [
            (got.t_gate, want.t_gate),
            (got.t_routing, want.t_routing),
            (got.t_logical, want.t_logical),
            (got.p_gate, want.p_gate),
            (got.p_decoh, want.p_decoh),
            (got.p_fail, want.p_fail),
            (got.t_eff, want.t_eff),
            (got.t_quantum, want.t_quantum),
            (got.t_quantum_total, want.t_quantum_total),
            (got.reliability_penalty, want.reliability_penalty),
        ];
        let ok = got.n_eval == want.n_eval && pairs.iter().all(|&(a, b)| rel_close(a, b, 1e-12));
        for (a, b) in pairs {
            if a != b {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
            }
        }
        failures += usize::from(!ok);
    }
    outcome(
        failures == 0,
        format!("500 tuples ({untyped} untyped), {failures} mismatches, worst relative error {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- 2

fn conv_extent(size: usize, k: usize, stride: usize, same: bool) -> usize {
    if same {
        size.div_ceil(stride)
    } else {
        (size - k) / stride + 1
    }
}

fn classical_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = 0;
    for _ in 0..100 {
        let f = rng.random_range(1e3..1e12);
        let phi = rng.random_range(1e6..1e13);
        let steps = rng.random_range(0..100_000u64);
        let got = classical_cost(f, phi, steps).expect("cost");
        let t = f / phi;
        let ok = rel_close(got.t_classical, t, 1e-12)
            && rel_close(got.t_classical_total, t * steps as f64, 1e-12)
            && got.f_candidate == f
            && got.phi_device == phi;
        failures += usize::from(!ok);
    }
    // FLOP counting against hand arithmetic on single conv layers.
    let mut flop_failures = 0;
    for _ in 0..100 {
        let (in_ch, out_ch) = (rng.random_range(1..8), rng.random_range(1..32));
        let k = *[1usize, 3, 5].choose(&mut rng).unwrap();
        let stride = rng.random_range(1..3);
        let same = rng.random_bool(0.5);
        let (h, w) = (rng.random_range(k + 1..20), rng.random_range(k + 1..20));
        let act = rng.random_bool(0.5).then_some(Activation::Relu);
        let pool = rng.random_bool(0.5).then_some(Pooling::Max);
        let drop = rng.random_bool(0.5).then_some(0.1);
        let layer = ClassicalLayerSpec::Conv {
            in_ch,
            out_ch,
            kernel: k,
            stride,
            padding: if same { Padding::Same } else { Padding::Valid },
            activation: act,
            pooling: pool,
            dropout: drop,
        };
        let (ho, wo) = (
            conv_extent(h, k, stride, same),
            conv_extent(w, k, stride, same),
        );
        if pool.is_some() && (ho < 2 || wo < 2) {
            continue;
        }
        let conv_out = (out_ch * ho * wo) as u64;
        let final_out = if pool.is_some() {
            (out_ch * (ho / 2) * (wo / 2)) as u64
        } else {
            conv_out
        };
        let mut want = 2 * (k * k * in_ch) as u64 * conv_out;
        want += if act.is_some() { conv_out } else { 0 };
        want += if pool.is_some() { final_out } else { 0 };
        want += if drop.is_some() { final_out } else { 0 };
        let got = count_flops(
            &[layer],
            Shape::Image {
                channels: in_ch,
                height: h,
                width: w,
            },
        )
        .expect("flops");
        flop_failures += usize::from(got != want);
    }
    outcome(
        failures == 0 && flop_failures == 0,
        format!("100 cost tuples, {failures} mismatches; 100 conv FLOP counts, {flop_failures} mismatches"),
    )
}

// ---------------------------------------------------------------- 3

const VALIDATION_SEED: u64 = 2024;

fn validation_csvs() -> (String, String, bool, String) {
    let backend = BackendModel::preset("fake_linear7").expect("preset");
    let cfg = ValidationConfig {
        seed: VALIDATION_SEED,
        ..ValidationConfig::default()
    };
    let plain = cmd_validate_scheduler(&backend, &cfg).expect("validation");
    let zero = cmd_validate_scheduler(
        &backend,
        &ValidationConfig {
            zero_rz: true,
            ..cfg
        },
    )
    .expect("validation");
    let bounded = plain
        .rows
        .iter()
        .chain(&zero.rows)
        .all(|r| r.t_gate >= r.makespan && r.gap >= 0.0);
    let ranges_ok = plain
        .rows
        .iter()
        .all(|r| (2..=5).contains(&r.n_qubits) && (50..=600).contains(&r.depth));
    let increased = zero.summary.mean_gap > plain.summary.mean_gap;
    let detail = format!(
        "{} circuits; T_gate >= makespan on all: {bounded}; mean gap {:.4} -> {:.4} with zero_rz",
        plain.rows.len(),
        plain.summary.mean_gap,
        zero.summary.mean_gap
    );
    (
        plain.to_csv().expect("csv"),
        zero.to_csv().expect("csv"),
        bounded && increased && ranges_ok && plain.rows.len() == 100,
        detail,
    )
}

// ---------------------------------------------------------------- 4

fn gradient_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let subsets: Vec<RotationSet> = RotationSet::all_subsets().collect();
    let mut worst = [0.0f64; 3];
    let mut worst_forward = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=6);
        let depth = rng.random_range(1..=30 / n);
        let rotations = *subsets.choose(&mut rng).unwrap();
        let entangler = *Entangler::ALL.choose(&mut rng).unwrap();
        let topology = *Topology::ALL.choose(&mut rng).unwrap();
        let ansatz = build_ansatz(n, depth, rotations, entangler, topology).expect("ansatz");
        let circuit = embed(&ansatz, n).expect("embed");
        assert!(circuit.n_params() <= 30);
        let params: Vec<f64> = (0..circuit.n_params())
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();

        let forward = expect_z(&run(&circuit, &params, &inputs).expect("run"));
        let dense = dense_expect_z(&circuit, &params, &inputs);
        for (a, b) in forward.iter().zip(&dense) {
            worst_forward = worst_forward.max((a - b).abs());
        }
        let shift = grad_parameter_shift(&circuit, &params, &inputs)
            .expect("shift")
            .jacobian;
        let adjoint = grad_adjoint(&circuit, &params, &inputs)
            .expect("adjoint")
            .jacobian;
        let fd = finite_difference_jacobian(&circuit, &params, &inputs, 1e-5);
        for (slot, (a, b)) in [(&shift, &adjoint), (&shift, &fd), (&adjoint, &fd)]
            .into_iter()
            .enumerate()
        {
            for (ra, rb) in a.iter().zip(b.iter()) {
                for (x, y) in ra.iter().zip(rb) {
                    worst[slot] = worst[slot].max((x - y).abs());
                }
            }
        }
    }
    outcome(
        worst.iter().all(|&w| w <= 1e-6) && worst_forward <= 1e-10,
        format!(
            "50 ansatz; max |shift-adjoint| {:.1e}, |shift-fd| {:.1e}, |adjoint-fd| {:.1e}; forward vs dense {:.1e}",
            worst[0], worst[1], worst[2], worst_forward
        ),
    )
}

// ---------------------------------------------------------------- 5

/// Six-qubit ring with native CZ.
fn ring_cz_backend() -> BackendModel {
    let edges = (0..6).map(|i| (i, (i + 1) % 6)).collect();
    BackendModel {
        name: "ring6_cz".into(),
        coupling_map: CouplingMap::new(6, edges).expect("coupling"),
        basis: NativeBasis {
            one_qubit: vec![GateKind::Rz, GateKind::Sx, GateKind::X],
            two_qubit: vec![NativeTwoQubit::Cz],
        },
        calibration: Calibration::uniform(
            NativeTwoQubit::Cz,
            [35e-9, 250e-9, 1e-6],
            [1e-4, 5e-3, 1e-2],
            100e-6,
        )
        .expect("calibration"),
    }
}

fn transpiler_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let backends = [
        BackendModel::preset("fake_linear7").expect("preset"),
        ring_cz_backend(),
    ];
    let mut worst = 0.0f64;
    let mut count_ok = true;
    let mut swaps = 0;
    for i in 0..50 {
        let backend = &backends[i % 2];
        assert!(backend.n_physical() <= MAX_QUBITS);
        let n = rng.random_range(2..=5);
        let depth = rng.random_range(1..=12);
        let circuit = random_circuit(n, depth, &mut rng);
        let t = qcostnas::transpiler::transpile(&circuit, backend).expect("transpile");
        let logical = dense_state(&circuit, &[], &[]);
        let physical = dense_state(&t.physical, &[], &[]);
        let expected = embed_state(&logical, &t.final_layout, backend.n_physical());
        worst = worst.max((1.0 - overlap(&expected, &physical)).abs());
        count_ok &= t.physical_counts.n_2q >= circuit.counts().n_2q
            && t.physical_counts.n_2q >= t.logical_counts.n_2q;
        swaps += t.swaps_inserted;
    }
    outcome(
        worst <= 1e-10 && count_ok,
        format!("50 circuits on linear7/ecr and ring6/cz, {swaps} swaps; max |1-|<expected|physical>|| {worst:.1e}; 2q counts never shrink: {count_ok}"),
    )
}

// ---------------------------------------------------------------- 6

fn nsga_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mut sort_bad, mut crowd_bad, mut trunc_bad) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.random_range(1..=50);
        let points = random_points(&mut rng, n);
        let fronts = fast_nondominated_sort(&points);
        let oracle = brute_force_fronts(&points);
        sort_bad += usize::from(fronts != oracle);
        for f in &oracle {
            let members: Vec<Vec<f64>> = f.iter().map(|&i| points[i].clone()).collect();
            let got = crowding_distance(&members);
            let want = oracle_crowding(&members);
            let same = got
                .iter()
                .zip(&want)
                .all(|(a, b)| a == b || (a - b).abs() <= 1e-12);
            crowd_bad += usize::from(!same);
        }
        let size = rng.random_range(0..=n);
        trunc_bad +=
            usize::from(environmental_selection(&points, size) != oracle_truncation(&points, size));
    }
    outcome(
        sort_bad + crowd_bad + trunc_bad == 0,
        format!("200 sets; sort mismatches {sort_bad}, crowding mismatches {crowd_bad}, truncation mismatches {trunc_bad}"),
    )
}

// ---------------------------------------------------------------- 7

const SEARCH_SEED: u64 = 1;

fn search(mode: SearchMode) -> ParetoArchive {
    let cfg = SearchConfig {
        mode,
        seed: SEARCH_SEED,
        generations: 8,
        population: 12,
        ..SearchConfig::default()
    };
    let ctx = EvalContext::new(&cfg)
        .expect("context")
        .with_cache_dir(None);
    run_search_with(&ctx).expect("search")
}

struct SearchArtifacts {
    fixed: ParetoArchive,
    variable: ParetoArchive,
}

impl SearchArtifacts {
    fn csvs(&self) -> Vec<String> {
        [&self.fixed, &self.variable]
            .into_iter()
            .flat_map(|a| {
                [
                    pareto_csv(a).expect("csv"),
                    front_csv(a).expect("csv"),
                    cmd_ablate(a).to_csv().expect("csv"),
                ]
            })
            .collect()
    }
}

fn hypervolume_progress(a: &ParetoArchive) -> (f64, f64) {
    let norm = archive_normalization(a);
    let final_front: Vec<_> = a.front().iter().map(|e| e.objectives).collect();
    let gen0 = a.generation_front(0);
    (
        norm.hypervolume(&gen0).expect("hv"),
        norm.hypervolume(&final_front).expect("hv"),
    )
}

fn distinct_classical(a: &ParetoArchive) -> usize {
    a.front()
        .iter()
        .map(|e| e.objectives[2].to_bits())
        .collect::<BTreeSet<_>>()
        .len()
}

fn end_to_end(art: &SearchArtifacts) -> Outcome {
    let (f0, f1) = hypervolume_progress(&art.fixed);
    let (v0, v1) = hypervolume_progress(&art.variable);
    let fixed_distinct = distinct_classical(&art.fixed);
    let variable_distinct = distinct_classical(&art.variable);
    let complete = art.fixed.generations.len() == 8 && art.variable.generations.len() == 8;
    let early: usize = [&art.fixed, &art.variable]
        .iter()
        .map(|a| a.evaluations.values().filter(|e| e.early_stopped).count())
        .sum();
    outcome(
        complete && f1 >= f0 && v1 >= v0 && fixed_distinct == 1 && variable_distinct >= 2,
        format!(
            "fixed: HV {f0:.4} -> {f1:.4}, {} evaluations, front {}, distinct classical costs {fixed_distinct}; \
             variable: HV {v0:.4} -> {v1:.4}, {} evaluations, front {}, distinct classical costs {variable_distinct}; \
             early stops {early}",
            art.fixed.evaluations.len(),
            art.fixed.final_front.len(),
            art.variable.evaluations.len(),
            art.variable.final_front.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn ablation_identity(art: &SearchArtifacts) -> Outcome {
    let mut rows = 0;
    let mut identity = true;
    for a in [&art.fixed, &art.variable] {
        for r in cmd_ablate(a).rows {
            rows += 1;
            let sum = r.t_logical + r.t_routing + r.reliability_penalty;
            identity &= rel_close(sum, r.t_eff, 1e-12)
                && r.t_logical >= 0.0
                && r.t_routing >= 0.0
                && r.reliability_penalty >= 0.0;
        }
    }
    let every: Vec<_> = art
        .fixed
        .evaluations
        .values()
        .chain(art.variable.evaluations.values())
        .collect();
    let all = ablate(&every);
    let full_routed = all
        .rows
        .iter()
        .filter(|r| r.topology == "full" && r.t_routing > 0.0)
        .count();
    let linear_free = all
        .rows
        .iter()
        .filter(|r| r.topology == "linear" && r.t_routing == 0.0)
        .count();
    let linear_total = all.rows.iter().filter(|r| r.topology == "linear").count();
    outcome(
        rows > 0 && identity && full_routed > 0 && linear_free > 0,
        format!(
            "{rows} front rows satisfy the identity: {identity}; full-topology rows with routing > 0: {full_routed}; \
             linear rows with zero routing: {linear_free}/{linear_total}"
        ),
    )
}

// ---------------------------------------------------------------- main

fn main() {
    let mut all = true;
    all &= criterion(
        1,
        "quantum cost model matches straight-line oracle",
        Duration::from_secs(1),
        quantum_oracle_equivalence,
    );
    all &= criterion(
        2,
        "classical cost model matches hand arithmetic",
        Duration::from_secs(1),
        classical_oracle_equivalence,
    );

    let mut first_validation = None;
    all &= criterion(
        3,
        "scheduler validation on 100 random circuits",
        Duration::from_secs(30),
        || {
            let (plain, zero, pass, detail) = validation_csvs();
            first_validation = Some((plain, zero));
            outcome(pass, detail)
        },
    );
    all &= criterion(
        4,
        "parameter-shift, adjoint and finite differences agree",
        Duration::from_secs(60),
        gradient_agreement,
    );
    all &= criterion(
        5,
        "transpiled circuits preserve semantics",
        Duration::from_secs(60),
        transpiler_semantics,
    );
    all &= criterion(
        6,
        "NSGA-II sort, crowding and truncation match oracles",
        Duration::from_secs(10),
        nsga_oracles,
    );

    let mut artifacts = None;
    all &= criterion(
        7,
        "fixed and variable searches, 8 generations x 12",
        Duration::from_secs(15 * 60),
        || {
            let art = SearchArtifacts {
                fixed: search(SearchMode::Fixed),
                variable: search(SearchMode::Variable),
            };
            let o = end_to_end(&art);
            artifacts = Some(art);
            o
        },
    );
    let art = artifacts.expect("criterion 7 ran");
    all &= criterion(
        8,
        "ablation identity and routing by topology",
        Duration::MAX,
        || ablation_identity(&art),
    );

    all &= criterion(
        9,
        "re-runs reproduce byte-identical CSVs",
        Duration::MAX,
        || {
            let (plain, zero, _, _) = validation_csvs();
            let (p0, z0) = first_validation.as_ref().expect("criterion 3 ran");
            let validation_same = &plain == p0 && &zero == z0;
            let again = SearchArtifacts {
                fixed: search(SearchMode::Fixed),
                variable: search(SearchMode::Variable),
            };
            let first = art.csvs();
            let second = again.csvs();
            let identical = first.iter().zip(&second).filter(|(a, b)| a == b).count();
            outcome(
            validation_same && identical == first.len(),
            format!(
                "validation CSVs identical: {validation_same}; search CSVs identical: {identical}/{}",
                first.len()
            ),
        )
        },
    );

    if !all {
        std::process::exit(1);
    }
}
