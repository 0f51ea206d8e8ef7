//! Reports behind the command line: scheduler validation, cost ablation,
//! Pareto exports and the hypervolume indicator.
//!
//! CSV files start with a `# qcostnas <kind> v<N>` comment line that names
//! the column schema version.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::BackendModel;
use crate::circuits::random_circuit;
use crate::nas::{Evaluation, Objectives, ParetoArchive, N_OBJECTIVES};
use crate::qcost::gate_execution_time;
use crate::transpiler::{asap_schedule, transpile, ScheduleOptions};
use crate::{Error, Result};

pub const CSV_SCHEMA_VERSION: u32 = 1;

fn csv_text(kind: &str, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(format!("# qcostnas {kind} v{CSV_SCHEMA_VERSION}\n")
        + &String::from_utf8(body).expect("utf8 csv"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- hypervolume

fn hv2(points: &mut [[f64; 2]], reference: [f64; 2]) -> f64 {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut volume = 0.0;
    let mut best_y = reference[1];
    for p in points.iter() {
        if p[1] < best_y {
            volume += (reference[0] - p[0]) * (best_y - p[1]);
            best_y = p[1];
        }
    }
    volume
}

fn hv_rec(points: &mut [Vec<f64>], reference: &[f64]) -> f64 {
    let d = reference.len();
    if points.is_empty() {
        return 0.0;
    }
    if d == 1 {
        let min = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return reference[0] - min;
    }
    if d == 2 {
        let mut flat: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
        return hv2(&mut flat, [reference[0], reference[1]]);
    }
    points.sort_by(|a, b| a[d - 1].total_cmp(&b[d - 1]));
    let mut volume = 0.0;
    for i in 0..points.len() {
        let lo = points[i][d - 1];
        let hi = if i + 1 < points.len() {
            points[i + 1][d - 1]
        } else {
            reference[d - 1]
        };
        if hi > lo {
            let mut slice: Vec<Vec<f64>> =
                points[..=i].iter().map(|p| p[..d - 1].to_vec()).collect();
            volume += (hi - lo) * hv_rec(&mut slice, &reference[..d - 1]);
        }
    }
    volume
}

/// Exact hypervolume dominated by `points` and bounded by `reference`, by
/// recursive slicing along the last objective. Every point must lie inside
/// the reference box.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P], reference: &[f64]) -> Result<f64> {
    let mut pts = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref();
        if p.len() != reference.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}-D point for a {}-D reference",
                p.len(),
                reference.len()
            )));
        }
        if p.iter()
            .zip(reference)
            .any(|(x, r)| !x.is_finite() || x > r)
        {
            return Err(Error::InvalidInput(format!(
                "point {p:?} lies outside the reference box"
            )));
        }
        pts.push(p.to_vec());
    }
    Ok(hv_rec(&mut pts, reference))
}

/// Per-objective ranges used to map objectives into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: Objectives,
    pub hi: Objectives,
}

/// Reference point for normalized objectives.
pub const NORMALIZED_REFERENCE: [f64; N_OBJECTIVES] = [1.1; N_OBJECTIVES];

impl Normalization {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Objectives>) -> Self {
        let mut lo = [f64::INFINITY; N_OBJECTIVES];
        let mut hi = [f64::NEG_INFINITY; N_OBJECTIVES];
        for p in points {
            for k in 0..N_OBJECTIVES {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Normalization { lo, hi }
    }

    /// Objectives with zero range map to 0.
    pub fn apply(&self, p: &Objectives) -> Objectives {
        std::array::from_fn(|k| {
            let range = self.hi[k] - self.lo[k];
            if range > 0.0 {
                (p[k] - self.lo[k]) / range
            } else {
                0.0
            }
        })
    }

    pub fn hypervolume(&self, points: &[Objectives]) -> Result<f64> {
        let scaled: Vec<Objectives> = points.iter().map(|p| self.apply(p)).collect();
        hypervolume(&scaled, &NORMALIZED_REFERENCE)
    }
}

/// Normalization over every evaluation in the archive.
pub fn archive_normalization(archive: &ParetoArchive) -> Normalization {
    Normalization::from_points(archive.evaluations.values().map(|e| &e.objectives))
}

// ---------------------------------------------------------------- scheduler validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub index: usize,
    pub n_qubits: usize,
    pub depth: usize,
    pub physical_gates: usize,
    pub t_gate: f64,
    pub makespan: f64,
    /// `(t_gate - makespan) / t_gate`, 0 for an empty circuit.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub n_circuits: usize,
    pub mean_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub mean_t_gate: f64,
    pub mean_makespan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub backend: String,
    pub seed: u64,
    pub zero_rz: bool,
    pub rows: Vec<ValidationRow>,
    pub summary: ValidationSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub n_circuits: usize,
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub min_depth: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub zero_rz: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_circuits: 100,
            min_qubits: 2,
            max_qubits: 5,
            min_depth: 50,
            max_depth: 600,
            seed: 0,
            zero_rz: false,
        }
    }
}

/// Compares the analytical gate time with an ASAP schedule on seeded random
/// circuits transpiled for `backend`. The circuits depend only on the seed
/// and ranges, not on `zero_rz`.
pub fn cmd_validate_scheduler(
    backend: &BackendModel,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    if cfg.min_qubits == 0 || cfg.min_qubits > cfg.max_qubits || cfg.min_depth > cfg.max_depth {
        return Err(Error::InvalidInput(format!(
            "empty validation ranges in {cfg:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = ScheduleOptions {
        zero_rz: cfg.zero_rz,
    };
    let mut rows = Vec::with_capacity(cfg.n_circuits);
    for index in 0..cfg.n_circuits {
        let n_qubits = rng.random_range(cfg.min_qubits..=cfg.max_qubits);
        let depth = rng.random_range(cfg.min_depth..=cfg.max_depth);
        let circuit = random_circuit(n_qubits, depth, &mut rng);
        let t = transpile(&circuit, backend)?;
        let t_gate = gate_execution_time(&t.physical_counts, &backend.calibration)?;
        let makespan = asap_schedule(&t.physical, &backend.calibration, opts)?;
        let gap = if t_gate > 0.0 {
            (t_gate - makespan) / t_gate
        } else {
            0.0
        };
        rows.push(ValidationRow {
            index,
            n_qubits,
            depth,
            physical_gates: t.physical.gates().len(),
            t_gate,
            makespan,
            gap,
        });
    }
    let n = rows.len().max(1) as f64;
    let summary = ValidationSummary {
        n_circuits: rows.len(),
        mean_gap: rows.iter().map(|r| r.gap).sum::<f64>() / n,
        min_gap: rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min),
        max_gap: rows.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max),
        mean_t_gate: rows.iter().map(|r| r.t_gate).sum::<f64>() / n,
        mean_makespan: rows.iter().map(|r| r.makespan).sum::<f64>() / n,
    };
    Ok(ValidationReport {
        backend: backend.name.clone(),
        seed: cfg.seed,
        zero_rz: cfg.zero_rz,
        rows,
        summary,
    })
}

impl ValidationReport {
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.index.to_string(),
                    r.n_qubits.to_string(),
                    r.depth.to_string(),
                    r.physical_gates.to_string(),
                    r.t_gate.to_string(),
                    r.makespan.to_string(),
                    r.gap.to_string(),
                ]
            })
            .collect();
        csv_text(
            "validation",
            &[
                "index",
                "n_qubits",
                "depth",
                "physical_gates",
                "t_gate_s",
                "makespan_s",
                "gap",
            ],
            &rows,
        )
    }
}

// ---------------------------------------------------------------- ablation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub key: String,
    pub label: String,
    pub n_qubits: usize,
    pub depth: usize,
    pub topology: String,
    pub swaps_inserted: usize,
    pub reliability_saturated: bool,
    pub t_logical: f64,
    pub t_routing: f64,
    pub reliability_penalty: f64,
    /// Per-step effective time, the sum of the three components.
    pub t_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Per-step quantum time split into logical, routing and reliability parts
/// for `evaluations`, largest total first. The gradient-evaluation
/// multiplier is left out because it scales every row alike.
pub fn ablate(evaluations: &[&Evaluation]) -> AblationReport {
    let mut rows: Vec<AblationRow> = evaluations
        .iter()
        .map(|e| AblationRow {
            key: e.key.clone(),
            label: e.label.clone(),
            n_qubits: e.genome.n_qubits,
            depth: e.genome.depth,
            topology: format!("{:?}", e.genome.topology).to_lowercase(),
            swaps_inserted: e.swaps_inserted,
            reliability_saturated: e.reliability_saturated,
            t_logical: e.quantum.t_logical,
            t_routing: e.quantum.t_routing,
            reliability_penalty: e.quantum.reliability_penalty,
            t_eff: e.quantum.t_eff,
        })
        .collect();
    rows.sort_by(|a, b| b.t_eff.total_cmp(&a.t_eff).then_with(|| a.key.cmp(&b.key)));
    AblationReport { rows }
}

/// Ablation of the archive's final front.
pub fn cmd_ablate(archive: &ParetoArchive) -> AblationReport {
    ablate(&archive.front())
}

impl AblationReport {
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.label.clone(),
                    r.n_qubits.to_string(),
                    r.depth.to_string(),
                    r.topology.clone(),
                    r.swaps_inserted.to_string(),
                    u8::from(r.reliability_saturated).to_string(),
                    r.t_logical.to_string(),
                    r.t_routing.to_string(),
                    r.reliability_penalty.to_string(),
                    r.t_eff.to_string(),
                ]
            })
            .collect();
        csv_text(
            "ablation",
            &[
                "label",
                "n_qubits",
                "depth",
                "topology",
                "swaps",
                "saturated",
                "t_logical_s",
                "t_routing_s",
                "reliability_penalty_s",
                "t_eff_s",
            ],
            &rows,
        )
    }
}

// ---------------------------------------------------------------- export

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExportFormat {
    Csv,
    Json,
    Svg,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            "svg" => Ok(ExportFormat::Svg),
            other => Err(Error::Usage(format!(
                "unknown export format '{other}'; use csv, json or svg"
            ))),
        }
    }
}

const EVAL_HEADER: [&str; 17] = [
    "key",
    "label",
    "accuracy",
    "obj_error",
    "obj_t_quantum_total_s",
    "obj_t_classical_total_s",
    "obj_params_total",
    "n_qubits",
    "depth",
    "topology",
    "n_steps",
    "t_logical_s",
    "t_routing_s",
    "reliability_penalty_s",
    "t_eff_s",
    "total_cost_s",
    "saturated",
];

fn eval_fields(e: &Evaluation) -> Vec<String> {
    vec![
        e.key.clone(),
        e.label.clone(),
        e.accuracy.to_string(),
        e.objectives[0].to_string(),
        e.objectives[1].to_string(),
        e.objectives[2].to_string(),
        e.objectives[3].to_string(),
        e.genome.n_qubits.to_string(),
        e.genome.depth.to_string(),
        format!("{:?}", e.genome.topology).to_lowercase(),
        e.n_steps.to_string(),
        e.quantum.t_logical.to_string(),
        e.quantum.t_routing.to_string(),
        e.quantum.reliability_penalty.to_string(),
        e.quantum.t_eff.to_string(),
        (e.objectives[1] + e.objectives[2]).to_string(),
        u8::from(e.reliability_saturated).to_string(),
    ]
}

/// Every generation's population, one row per member.
pub fn pareto_csv(archive: &ParetoArchive) -> Result<String> {
    let mut header = vec!["generation", "rank", "crowding", "final_front"];
    header.extend(EVAL_HEADER);
    let mut rows = Vec::new();
    for g in &archive.generations {
        for m in &g.members {
            let mut row = vec![
                g.index.to_string(),
                m.rank.to_string(),
                m.crowding.to_string(),
                u8::from(archive.final_front.contains(&m.key)).to_string(),
            ];
            row.extend(eval_fields(archive.evaluation(&m.key)));
            rows.push(row);
        }
    }
    csv_text("pareto", &header, &rows)
}

/// The final non-dominated set.
pub fn front_csv(archive: &ParetoArchive) -> Result<String> {
    let rows: Vec<Vec<String>> = archive.front().into_iter().map(eval_fields).collect();
    csv_text("front", &EVAL_HEADER, &rows)
}

struct Axis {
    name: &'static str,
    value: fn(&Evaluation) -> f64,
}

const ACCURACY: Axis = Axis {
    name: "accuracy",
    value: |e| e.accuracy,
};
const PAIRS: [(&str, Axis); 4] = [
    (
        "quantum",
        Axis {
            name: "T_quantum_total (s)",
            value: |e| e.objectives[1],
        },
    ),
    (
        "classical",
        Axis {
            name: "T_classical_total (s)",
            value: |e| e.objectives[2],
        },
    ),
    (
        "params",
        Axis {
            name: "Params_total",
            value: |e| e.objectives[3],
        },
    ),
    (
        "total",
        Axis {
            name: "C_total (s)",
            value: |e| e.objectives[1] + e.objectives[2],
        },
    ),
];

/// Purple to yellow.
fn generation_color(g: usize, n: usize) -> String {
    let t = if n > 1 {
        g as f64 / (n - 1) as f64
    } else {
        1.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(68.0, 253.0),
        lerp(1.0, 231.0),
        lerp(84.0, 37.0)
    )
}

/// Scatter of one cost axis against accuracy; generations are color coded
/// and final-front members drawn in red.
pub fn pareto_svg(archive: &ParetoArchive, x: &str) -> Result<String> {
    let Some((_, axis)) = PAIRS.iter().find(|(n, _)| *n == x) else {
        return Err(Error::Usage(format!("unknown plot axis '{x}'")));
    };
    let (w, h, m) = (640.0, 480.0, 70.0);
    let evals: Vec<&Evaluation> = archive.evaluations.values().collect();
    let xs: Vec<f64> = evals.iter().map(|e| (axis.value)(e)).collect();
    let (x_lo, x_hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |v: f64| m + (v - x_lo) / x_span * (w - 2.0 * m);
    let py = |acc: f64| h - m - acc * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{y}" stroke="black"/>"#,
        y = h - m,
        x2 = w - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 20.0,
        axis.name
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle">{}</text>"#,
        h / 2.0,
        h / 2.0,
        ACCURACY.name
    );
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{}" text-anchor="middle">{x_lo:.3e}</text>"#,
        h - m + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_hi:.3e}</text>"#,
        w - m,
        h - m + 16.0
    );
    for (v, label) in [(0.0, "0"), (1.0, "1")] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#,
            m - 6.0,
            py(v) + 4.0
        );
    }
    let n_gen = archive.generations.len();
    for g in &archive.generations {
        let color = generation_color(g.index, n_gen);
        for member in &g.members {
            let e = archive.evaluation(&member.key);
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}" fill-opacity="0.7"/>"#,
                px((axis.value)(e)),
                py((ACCURACY.value)(e))
            );
        }
    }
    for e in archive.front() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="red" stroke-width="2"/>"#,
            px((axis.value)(e)),
            py((ACCURACY.value)(e))
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the requested formats into `dir` and returns the written paths.
/// CSV: `pareto.csv` (every generation) and `front.csv`; JSON:
/// `archive.json`; SVG: `pareto_accuracy_vs_<axis>.svg`.
pub fn cmd_export_pareto(
    archive: &ParetoArchive,
    formats: &[ExportFormat],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            ExportFormat::Csv => {
                emit("pareto.csv".into(), pareto_csv(archive)?)?;
                emit("front.csv".into(), front_csv(archive)?)?;
            }
            ExportFormat::Json => emit(
                "archive.json".into(),
                serde_json::to_string_pretty(archive)? + "\n",
            )?,
            ExportFormat::Svg => {
                for (name, _) in &PAIRS {
                    emit(
                        format!("pareto_accuracy_vs_{name}.svg"),
                        pareto_svg(archive, name)?,
                    )?;
                }
            }
        }
    }
    Ok(written)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hypervolume_examples() {
        let v = hypervolume(&[[0.5; 4]], &[1.0; 4]).unwrap();
        assert!((v - 0.0625).abs() < 1e-15);
        let with_dominated =
            hypervolume(&[[0.5; 4], [0.7; 4], [0.5, 0.9, 0.5, 0.6]], &[1.0; 4]).unwrap();
        assert_eq!(with_dominated, v);
        assert_eq!(hypervolume::<[f64; 4]>(&[], &[1.0; 4]).unwrap(), 0.0);
        assert!(matches!(
            hypervolume(&[[1.5, 0.0]], &[1.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
        // Two overlapping boxes in 2-D: 0.5 + 0.5 - 0.25.
        let v = hypervolume(&[[0.0, 0.5], [0.5, 0.0]], &[1.0, 1.0]).unwrap();
        assert!((v - 0.75).abs() < 1e-15);
    }

    fn brute_force_hv(points: &[[f64; 3]], reference: [f64; 3], grid: usize) -> f64 {
        // Midpoint-free exact count on a lattice of integer coordinates.
        let mut count = 0;
        for x in 0..grid {
            for y in 0..grid {
                for z in 0..grid {
                    let c = [x as f64, y as f64, z as f64];
                    if points.iter().any(|p| (0..3).all(|k| p[k] <= c[k]))
                        && (0..3).all(|k| c[k] < reference[k])
                    {
                        count += 1;
                    }
                }
            }
        }
        count as f64
    }

    proptest! {
        #[test]
        fn hypervolume_matches_lattice_count(pts in prop::collection::vec(prop::array::uniform3(0u8..6), 1..8)) {
            let pts: Vec<[f64; 3]> = pts.iter().map(|p| p.map(f64::from)).collect();
            let v = hypervolume(&pts, &[6.0; 3]).unwrap();
            prop_assert_eq!(v, brute_force_hv(&pts, [6.0; 3], 6));
        }

        #[test]
        fn hypervolume_axis_permutation(pts in prop::collection::vec(prop::array::uniform4(0.0..1.0f64), 1..12)) {
            let reference = [1.0, 1.2, 1.4, 1.6];
            let a = hypervolume(&pts, &reference).unwrap();
            let perm = [2, 0, 3, 1];
            let permuted: Vec<[f64; 4]> = pts.iter().map(|p| perm.map(|k| p[k])).collect();
            let b = hypervolume(&permuted, &perm.map(|k| reference[k])).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn normalization_maps_into_unit_box() {
        let pts = [[0.1, 5.0, 2.0, 10.0], [0.3, 1.0, 2.0, 30.0]];
        let n = Normalization::from_points(&pts);
        assert_eq!(n.apply(&pts[0]), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(n.apply(&pts[1]), [1.0, 0.0, 0.0, 1.0]);
        assert!(n.hypervolume(&pts).unwrap() > 0.0);
    }

    #[test]
    fn validation_bound_and_determinism() {
        let b = BackendModel::preset("fake_linear7").unwrap();
        let cfg = ValidationConfig {
            n_circuits: 8,
            min_depth: 5,
            max_depth: 40,
            seed: 3,
            ..Default::default()
        };
        let r = cmd_validate_scheduler(&b, &cfg).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r
            .rows
            .iter()
            .all(|row| row.t_gate >= row.makespan && row.gap >= 0.0));
        assert_eq!(
            r.to_csv().unwrap(),
            cmd_validate_scheduler(&b, &cfg).unwrap().to_csv().unwrap()
        );
        assert!(r
            .to_csv()
            .unwrap()
            .starts_with("# qcostnas validation v1\n"));
        let z = cmd_validate_scheduler(
            &b,
            &ValidationConfig {
                zero_rz: true,
                ..cfg
            },
        )
        .unwrap();
        assert!(z.summary.mean_gap > r.summary.mean_gap);
    }

    #[test]
    fn single_qubit_circuits_have_no_gap() {
        let b = BackendModel::preset("fake_linear7").unwrap();
        let cfg = ValidationConfig {
            n_circuits: 5,
            min_qubits: 1,
            max_qubits: 1,
            min_depth: 3,
            max_depth: 30,
            ..Default::default()
        };
        for row in cmd_validate_scheduler(&b, &cfg).unwrap().rows {
            assert!((row.t_gate - row.makespan).abs() <= 1e-12 * row.t_gate);
        }
    }

    #[test]
    fn export_format_parsing() {
        assert_eq!("CSV".parse::<ExportFormat>().unwrap(), ExportFormat::Csv);
        assert!(matches!(
            "png".parse::<ExportFormat>(),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn generation_colors_span_the_ramp() {
        assert_eq!(generation_color(0, 8), "#440154");
        assert_eq!(generation_color(7, 8), "#fde725");
    }
}
