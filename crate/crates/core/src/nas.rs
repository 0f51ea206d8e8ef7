//! NSGA-II search over hybrid architectures.
//!
//! Four minimized objectives per genome: `1 - accuracy`, total quantum
//! training time, total classical training time and the parameter count.
//! Evaluations are pure functions of `(genome, config)`, so they are cached
//! by phenotype and may run in parallel without changing results.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{resolve_backend, BackendModel};
use crate::ccost::{
    classical_cost, Activation, ClassicalCost, ClassicalLayerSpec, Padding, Pooling, Throughput,
    CHANNEL_CHOICES, KERNEL_CHOICES,
};
use crate::circuits::{
    Entangler, GateCounts, RotationSet, Topology, MAX_DEPTH, MAX_QUBITS, MIN_DEPTH, MIN_QUBITS,
};
use crate::hybrid::{
    count_all_parameters, fit, fixed_cnn, make_dataset, Dataset, HybridModel, ModelSpec,
    QuantumSpec, TrainConfig, DROPOUT_RATE,
};
use crate::qcost::{quantum_training_cost_clamped, QuantumCostBreakdown, TrainingPlan};
use crate::transpiler::transpile;
use crate::{Error, Result};

pub const DEFAULT_MUTATION_RATE: f64 = 0.4;
pub const MAX_CONV_LAYERS: usize = 3;
pub const N_OBJECTIVES: usize = 4;

pub type Objectives = [f64; N_OBJECTIVES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Fixed,
    Variable,
}

// ---------------------------------------------------------------- genome

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvGene {
    /// Index into [`CHANNEL_CHOICES`].
    pub channels: usize,
    /// Index into [`KERNEL_CHOICES`].
    pub kernel: usize,
    pub activation: Activation,
    pub pooling: bool,
    pub dropout: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassicalGenes {
    pub n_conv: usize,
    /// Only the first `n_conv` slots are expressed.
    pub layers: [ConvGene; MAX_CONV_LAYERS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub n_qubits: usize,
    pub depth: usize,
    pub rotations: RotationSet,
    pub entangler: Entangler,
    pub topology: Topology,
    pub classical: Option<ClassicalGenes>,
}

/// Inclusive gene ranges for the quantum part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumBounds {
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub min_depth: usize,
    pub max_depth: usize,
}

impl Default for QuantumBounds {
    fn default() -> Self {
        QuantumBounds {
            min_qubits: MIN_QUBITS,
            max_qubits: MAX_QUBITS,
            min_depth: MIN_DEPTH,
            max_depth: MAX_DEPTH,
        }
    }
}

impl QuantumBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = MIN_QUBITS <= self.min_qubits
            && self.min_qubits <= self.max_qubits
            && self.max_qubits <= MAX_QUBITS
            && MIN_DEPTH <= self.min_depth
            && self.min_depth <= self.max_depth
            && self.max_depth <= MAX_DEPTH;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSearchPoint(format!(
                "bounds {self:?} outside the search space"
            )))
        }
    }

    /// Caps the qubit range at the device size.
    pub fn for_backend(mut self, backend: &BackendModel) -> Result<Self> {
        self.max_qubits = self.max_qubits.min(backend.n_physical());
        self.validate()?;
        Ok(self)
    }
}

fn uniform<T: Copy, R: Rng + ?Sized>(choices: &[T], rng: &mut R) -> T {
    choices[rng.random_range(0..choices.len())]
}

fn random_rotations<R: Rng + ?Sized>(rng: &mut R) -> RotationSet {
    let all: Vec<RotationSet> = RotationSet::all_subsets().collect();
    uniform(&all, rng)
}

fn random_conv<R: Rng + ?Sized>(rng: &mut R) -> ConvGene {
    ConvGene {
        channels: rng.random_range(0..CHANNEL_CHOICES.len()),
        kernel: rng.random_range(0..KERNEL_CHOICES.len()),
        activation: uniform(&Activation::ALL, rng),
        pooling: rng.random_bool(0.5),
        dropout: rng.random_bool(0.5),
    }
}

/// Uniform sample of every gene within `bounds`.
pub fn random_genome<R: Rng + ?Sized>(
    mode: SearchMode,
    bounds: &QuantumBounds,
    rng: &mut R,
) -> Genome {
    let n_qubits = rng.random_range(bounds.min_qubits..=bounds.max_qubits);
    let depth = rng.random_range(bounds.min_depth..=bounds.max_depth);
    let rotations = random_rotations(rng);
    let entangler = uniform(&Entangler::ALL, rng);
    let topology = uniform(&Topology::ALL, rng);
    let classical = match mode {
        SearchMode::Fixed => None,
        SearchMode::Variable => Some(ClassicalGenes {
            n_conv: rng.random_range(1..=MAX_CONV_LAYERS),
            layers: [random_conv(rng), random_conv(rng), random_conv(rng)],
        }),
    };
    Genome {
        n_qubits,
        depth,
        rotations,
        entangler,
        topology,
        classical,
    }
}

fn pick<T, R: Rng + ?Sized>(a: T, b: T, rng: &mut R) -> T {
    if rng.random_bool(0.5) {
        a
    } else {
        b
    }
}

/// Uniform crossover: every gene comes from either parent with equal odds.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    let classical = match (&a.classical, &b.classical) {
        (Some(x), Some(y)) => {
            let n_conv = pick(x.n_conv, y.n_conv, rng);
            let mut layers = x.layers;
            for (slot, (p, q)) in layers.iter_mut().zip(x.layers.iter().zip(&y.layers)) {
                *slot = ConvGene {
                    channels: pick(p.channels, q.channels, rng),
                    kernel: pick(p.kernel, q.kernel, rng),
                    activation: pick(p.activation, q.activation, rng),
                    pooling: pick(p.pooling, q.pooling, rng),
                    dropout: pick(p.dropout, q.dropout, rng),
                };
            }
            Some(ClassicalGenes { n_conv, layers })
        }
        _ => None,
    };
    Genome {
        n_qubits: pick(a.n_qubits, b.n_qubits, rng),
        depth: pick(a.depth, b.depth, rng),
        rotations: pick(a.rotations, b.rotations, rng),
        entangler: pick(a.entangler, b.entangler, rng),
        topology: pick(a.topology, b.topology, rng),
        classical,
    }
}

/// One ±1 step inside `[lo, hi]`, reflecting at the bounds.
fn step<R: Rng + ?Sized>(v: usize, lo: usize, hi: usize, rng: &mut R) -> usize {
    if lo >= hi {
        return lo;
    }
    let v = v.clamp(lo, hi);
    if v == lo {
        v + 1
    } else if v == hi {
        v - 1
    } else if rng.random_bool(0.5) {
        v + 1
    } else {
        v - 1
    }
}

/// Each gene is perturbed independently with probability `p_m`: ordinal
/// genes move one step, categorical genes are resampled uniformly.
pub fn mutate<R: Rng + ?Sized>(
    g: &Genome,
    p_m: f64,
    bounds: &QuantumBounds,
    rng: &mut R,
) -> Genome {
    let mut out = *g;
    let hit = |rng: &mut R| p_m > 0.0 && rng.random_bool(p_m.min(1.0));
    if hit(rng) {
        out.n_qubits = step(g.n_qubits, bounds.min_qubits, bounds.max_qubits, rng);
    }
    if hit(rng) {
        out.depth = step(g.depth, bounds.min_depth, bounds.max_depth, rng);
    }
    if hit(rng) {
        out.rotations = random_rotations(rng);
    }
    if hit(rng) {
        out.entangler = uniform(&Entangler::ALL, rng);
    }
    if hit(rng) {
        out.topology = uniform(&Topology::ALL, rng);
    }
    if let Some(c) = &mut out.classical {
        if hit(rng) {
            c.n_conv = step(c.n_conv, 1, MAX_CONV_LAYERS, rng);
        }
        for layer in &mut c.layers {
            if hit(rng) {
                layer.channels = step(layer.channels, 0, CHANNEL_CHOICES.len() - 1, rng);
            }
            if hit(rng) {
                layer.kernel = step(layer.kernel, 0, KERNEL_CHOICES.len() - 1, rng);
            }
            if hit(rng) {
                layer.activation = uniform(&Activation::ALL, rng);
            }
            if hit(rng) {
                layer.pooling = rng.random_bool(0.5);
            }
            if hit(rng) {
                layer.dropout = rng.random_bool(0.5);
            }
        }
    }
    out.n_qubits = out.n_qubits.clamp(bounds.min_qubits, bounds.max_qubits);
    out.depth = out.depth.clamp(bounds.min_depth, bounds.max_depth);
    out
}

impl Genome {
    pub fn quantum_spec(&self) -> QuantumSpec {
        QuantumSpec {
            n_qubits: self.n_qubits,
            depth: self.depth,
            rotations: self.rotations,
            entangler: self.entangler,
            topology: self.topology,
        }
    }

    /// The convolution stack this genome expresses, or `fixed` when it has
    /// no classical genes.
    pub fn classical_stack(&self, fixed: &[ClassicalLayerSpec]) -> Vec<ClassicalLayerSpec> {
        let Some(c) = &self.classical else {
            return fixed.to_vec();
        };
        let mut in_ch = 1;
        c.layers[..c.n_conv.clamp(1, MAX_CONV_LAYERS)]
            .iter()
            .map(|l| {
                let out_ch = CHANNEL_CHOICES[l.channels];
                let spec = ClassicalLayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel: KERNEL_CHOICES[l.kernel],
                    stride: 1,
                    padding: Padding::Same,
                    activation: Some(l.activation),
                    pooling: l.pooling.then_some(Pooling::Avg),
                    dropout: l.dropout.then_some(DROPOUT_RATE),
                };
                in_ch = out_ch;
                spec
            })
            .collect()
    }

    pub fn model_spec(&self, fixed: &[ClassicalLayerSpec], n_classes: usize) -> ModelSpec {
        ModelSpec::new(self.classical_stack(fixed), self.quantum_spec(), n_classes)
    }

    /// Canonical phenotype: unexpressed classical slots are dropped, so
    /// genomes that build the same network share a key.
    pub fn key(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            n_qubits: usize,
            depth: usize,
            rotations: RotationSet,
            entangler: Entangler,
            topology: Topology,
            conv: Option<&'a [ConvGene]>,
        }
        let conv = self
            .classical
            .as_ref()
            .map(|c| &c.layers[..c.n_conv.clamp(1, MAX_CONV_LAYERS)]);
        serde_json::to_string(&Canonical {
            n_qubits: self.n_qubits,
            depth: self.depth,
            rotations: self.rotations,
            entangler: self.entangler,
            topology: self.topology,
            conv,
        })
        .expect("genome keys serialize")
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        let rot: String = self
            .rotations
            .kinds()
            .iter()
            .map(|k| format!("{k:?}").to_lowercase())
            .collect::<Vec<_>>()
            .join("+");
        let mut s = format!(
            "q{}-d{}-{}-{:?}-{:?}",
            self.n_qubits, self.depth, rot, self.entangler, self.topology
        )
        .to_lowercase();
        if let Some(c) = &self.classical {
            for l in &c.layers[..c.n_conv.clamp(1, MAX_CONV_LAYERS)] {
                s.push_str(&format!(
                    "|c{}k{}{}{}{}",
                    CHANNEL_CHOICES[l.channels],
                    KERNEL_CHOICES[l.kernel],
                    format!("{:?}", l.activation).to_lowercase(),
                    if l.pooling { "p" } else { "" },
                    if l.dropout { "d" } else { "" },
                ));
            }
        }
        s
    }
}

// ---------------------------------------------------------------- NSGA-II

/// `a` dominates `b`: no worse in every objective, better in at least one.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut better = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        better |= x < y;
    }
    better
}

/// Fronts of point indices, best first. Each front is in ascending index
/// order; identical points share a front.
pub fn fast_nondominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut dom_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if dominates(b, a) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dom_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::take(&mut current));
        current = next;
    }
    fronts
}

/// Crowding distance of every point in `front`. Per objective the extreme
/// points get `+inf` and interior points add the gap between their
/// neighbours divided by the objective's range. Objectives with zero range
/// contribute nothing. Ties sort by position in `front`.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    let m = front[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let val = |i: usize| front[i].as_ref()[k];
        order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        let (lo, hi) = (val(order[0]), val(order[n - 1]));
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n.saturating_sub(1) {
            let i = order[w];
            if dist[i].is_finite() {
                dist[i] += (val(order[w + 1]) - val(order[w - 1])) / range;
            }
        }
    }
    dist
}

/// Front rank (0 = best) and crowding distance of every point.
pub fn rank_and_crowding<P: AsRef<[f64]>>(points: &[P]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    for (r, front) in fast_nondominated_sort(points).into_iter().enumerate() {
        let members: Vec<&[f64]> = front.iter().map(|&i| points[i].as_ref()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&members)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// `true` when `a` beats `b` in a crowded-comparison tournament.
fn crowded_better(rank: &[usize], crowd: &[f64], a: usize, b: usize) -> bool {
    rank[a] < rank[b] || (rank[a] == rank[b] && crowd[a] > crowd[b])
}

/// Binary tournament with replacement; the first draw wins ties.
pub fn tournament<R: Rng + ?Sized>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    if crowded_better(rank, crowd, b, a) {
        b
    } else {
        a
    }
}

/// Indices of the `size` survivors of `points`: whole fronts in rank order,
/// the last partial front truncated by descending crowding distance (ties by
/// index). Returned in ascending index order.
pub fn environmental_selection<P: AsRef<[f64]>>(points: &[P], size: usize) -> Vec<usize> {
    let mut chosen = Vec::with_capacity(size);
    for front in fast_nondominated_sort(points) {
        if chosen.len() + front.len() <= size {
            chosen.extend(front);
            continue;
        }
        let members: Vec<&[f64]> = front.iter().map(|&i| points[i].as_ref()).collect();
        let d = crowding_distance(&members);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
        chosen.extend(order[..size - chosen.len()].iter().map(|&k| front[k]));
        break;
    }
    chosen.sort_unstable();
    chosen
}

/// Variation operators used to build offspring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub mutation_rate: f64,
    pub bounds: QuantumBounds,
}

/// `count` offspring, each from two tournament winners via crossover then
/// mutation.
pub fn make_offspring<R: Rng + ?Sized>(
    parents: &[Genome],
    objectives: &[Objectives],
    count: usize,
    variation: &Variation,
    rng: &mut R,
) -> Vec<Genome> {
    let (rank, crowd) = rank_and_crowding(objectives);
    (0..count)
        .map(|_| {
            let a = tournament(&rank, &crowd, rng);
            let b = tournament(&rank, &crowd, rng);
            let child = crossover(&parents[a], &parents[b], rng);
            mutate(&child, variation.mutation_rate, &variation.bounds, rng)
        })
        .collect()
}

/// One NSGA-II generation: offspring, evaluation, then environmental
/// selection over parents and offspring. `evaluate` maps genomes to their
/// objective vectors.
pub fn next_generation<R, F>(
    parents: &[(Genome, Objectives)],
    variation: &Variation,
    rng: &mut R,
    mut evaluate: F,
) -> Result<Vec<(Genome, Objectives)>>
where
    R: Rng + ?Sized,
    F: FnMut(&[Genome]) -> Result<Vec<Objectives>>,
{
    let genomes: Vec<Genome> = parents.iter().map(|p| p.0).collect();
    let objectives: Vec<Objectives> = parents.iter().map(|p| p.1).collect();
    let offspring = make_offspring(&genomes, &objectives, parents.len(), variation, rng);
    let scored = evaluate(&offspring)?;
    let merged: Vec<(Genome, Objectives)> = parents
        .iter()
        .copied()
        .chain(offspring.into_iter().zip(scored))
        .collect();
    let points: Vec<Objectives> = merged.iter().map(|m| m.1).collect();
    Ok(environmental_selection(&points, parents.len())
        .into_iter()
        .map(|i| merged[i])
        .collect())
}

// ---------------------------------------------------------------- search

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_classes: usize,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_classes: 4,
            samples_per_class: 40,
            seed: 1,
        }
    }
}

/// Source of the classical throughput `Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThroughputSource {
    /// A fixed `Φ` in FLOPs per second.
    Fixed(f64),
    /// A file written by `calibrate-classical`.
    File(PathBuf),
    /// Time the reference model at startup. Not reproducible across machines.
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Feature extractor used in fixed mode.
    pub fixed_cnn: Vec<ClassicalLayerSpec>,
    pub bounds: QuantumBounds,
    /// Preset name or path to a backend file.
    pub backend: String,
    pub seed: u64,
    pub generations: usize,
    pub population: usize,
    pub mutation_rate: f64,
    pub dataset: DatasetConfig,
    pub training: TrainConfig,
    pub throughput: ThroughputSource,
    /// Evaluate each generation on the rayon pool.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::Fixed,
            fixed_cnn: fixed_cnn(),
            bounds: QuantumBounds::default(),
            backend: "fake_linear7".into(),
            seed: 1,
            generations: 8,
            population: 12,
            mutation_rate: DEFAULT_MUTATION_RATE,
            dataset: DatasetConfig::default(),
            training: TrainConfig::default(),
            throughput: ThroughputSource::Fixed(1e9),
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.population < 2 || self.generations < 1 {
            return Err(Error::InvalidInput(format!(
                "population {} and generations {} must be at least 2 and 1",
                self.population, self.generations
            )));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidInput(format!(
                "mutation rate {}",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

/// Everything measured for one genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub key: String,
    pub label: String,
    pub genome: Genome,
    pub accuracy: f64,
    pub objectives: Objectives,
    pub params_total: usize,
    pub n_steps: u64,
    pub epochs_run: usize,
    pub early_stopped: bool,
    pub diverged: bool,
    /// `p_fail` was clamped below 1 to keep the objective finite.
    pub reliability_saturated: bool,
    pub logical_counts: GateCounts,
    pub physical_counts: GateCounts,
    pub swaps_inserted: usize,
    pub quantum: QuantumCostBreakdown,
    pub classical: ClassicalCost,
}

/// Shared, read-only inputs of every evaluation.
pub struct EvalContext {
    pub config: SearchConfig,
    pub backend: BackendModel,
    pub bounds: QuantumBounds,
    pub dataset: Dataset,
    pub throughput: Throughput,
    fingerprint: String,
    cache_dir: Option<PathBuf>,
}

fn sha_hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn derived_seed(seed: u64, key: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(key.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl EvalContext {
    /// Loads the backend, builds the dataset and resolves the throughput.
    /// The evaluation cache directory comes from `QCOSTNAS_CACHE_DIR`.
    pub fn new(config: &SearchConfig) -> Result<Self> {
        config.validate()?;
        let backend = resolve_backend(&config.backend)?;
        let bounds = config.bounds.for_backend(&backend)?;
        let dataset = make_dataset(
            config.dataset.n_classes,
            config.dataset.samples_per_class,
            config.dataset.seed,
        )?;
        let throughput = match &config.throughput {
            ThroughputSource::Fixed(phi) => Throughput::fixed(*phi)?,
            ThroughputSource::File(path) => Throughput::load(path)?,
            ThroughputSource::Measure => crate::hybrid::measure_reference_throughput(
                config.training.batch_size,
                3,
                10,
                config.seed,
            )?,
        };
        let fingerprint = sha_hex(&[
            &serde_json::to_string(&(
                &config.fixed_cnn,
                config.seed,
                &config.dataset,
                &config.training,
                throughput.phi_device,
            ))?,
            &backend.to_json(),
        ]);
        let cache_dir = std::env::var_os("QCOSTNAS_CACHE_DIR").map(PathBuf::from);
        Ok(EvalContext {
            config: config.clone(),
            backend,
            bounds,
            dataset,
            throughput,
            fingerprint,
            cache_dir,
        })
    }

    pub fn with_cache_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }

    fn cache_path(&self, key: &str) -> Option<PathBuf> {
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("{}.json", sha_hex(&[&self.fingerprint, key]))))
    }

    /// Trains and costs `genome`. Divergence and saturated reliability are
    /// recorded rather than returned as errors.
    pub fn evaluate(&self, genome: &Genome) -> Result<Evaluation> {
        let key = genome.key();
        if let Some(path) = self.cache_path(&key) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                if let Ok(hit) = serde_json::from_str::<Evaluation>(&text) {
                    if hit.key == key {
                        return Ok(hit);
                    }
                }
            }
        }
        let (eval, _) = self.train_genome(genome)?;
        if let Some(path) = self.cache_path(&eval.key) {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let text = serde_json::to_string(&eval)?;
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(eval)
    }

    /// Trains and costs `genome`, bypassing the cache, and also returns the
    /// trained model.
    pub fn train_genome(&self, genome: &Genome) -> Result<(Evaluation, HybridModel)> {
        let key = genome.key();
        let cfg = &self.config;
        let spec = genome.model_spec(&cfg.fixed_cnn, self.dataset.n_classes);
        let seed = derived_seed(cfg.seed, &key);
        let mut model = HybridModel::new(spec.clone(), seed)?;
        let train_cfg = TrainConfig {
            seed: seed ^ 0x9e37_79b9_7f4a_7c15,
            ..cfg.training
        };
        let report = fit(&mut model, &self.dataset, &train_cfg)?;
        let diverged = report.diverged_at.is_some();

        let circuit = spec.quantum.circuit()?;
        let transpiled = transpile(&circuit, &self.backend)?;
        let plan = TrainingPlan {
            n_params: circuit.n_params() as u64,
            n_steps: report.n_steps,
        };
        let (quantum, saturated) = quantum_training_cost_clamped(
            &transpiled.logical_counts,
            &transpiled.physical_counts,
            &self.backend.calibration,
            plan,
        )?;
        let flops = spec.classical_step_flops(cfg.training.batch_size)? as f64;
        let classical = classical_cost(flops, self.throughput.phi_device, report.n_steps)?;
        let params_total = count_all_parameters(&model);
        let accuracy = if diverged { 0.0 } else { report.accuracy };
        let eval = Evaluation {
            label: genome.label(),
            key,
            genome: *genome,
            accuracy,
            objectives: [
                1.0 - accuracy,
                quantum.t_quantum_total,
                classical.t_classical_total,
                params_total as f64,
            ],
            params_total,
            n_steps: report.n_steps,
            epochs_run: report.epochs_run,
            early_stopped: report.early_stopped,
            diverged,
            reliability_saturated: saturated,
            logical_counts: transpiled.logical_counts,
            physical_counts: transpiled.physical_counts,
            swaps_inserted: transpiled.swaps_inserted,
            quantum,
            classical,
        };
        Ok((eval, model))
    }
}

/// One population member as archived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub key: String,
    /// Front rank within the generation, 1 = non-dominated.
    pub rank: usize,
    /// Boundary points are infinite, stored as `"inf"` in JSON.
    #[serde(with = "extended_float")]
    pub crowding: f64,
}

/// JSON has no infinity; `+inf` round-trips through the string `"inf"`.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub index: usize,
    pub members: Vec<Member>,
}

/// Search history: every generation's population plus the evaluations they
/// reference, and the final non-dominated set over everything evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub mode: SearchMode,
    pub backend: String,
    pub seed: u64,
    pub phi_device: f64,
    pub generations: Vec<Generation>,
    /// Unique evaluations by key.
    pub evaluations: BTreeMap<String, Evaluation>,
    /// Keys of the final front, sorted by objectives then key.
    pub final_front: Vec<String>,
}

impl ParetoArchive {
    pub fn evaluation(&self, key: &str) -> &Evaluation {
        &self.evaluations[key]
    }

    pub fn front(&self) -> Vec<&Evaluation> {
        self.final_front
            .iter()
            .map(|k| &self.evaluations[k])
            .collect()
    }

    /// Objective vectors of a generation's rank-1 members.
    pub fn generation_front(&self, index: usize) -> Vec<Objectives> {
        self.generations[index]
            .members
            .iter()
            .filter(|m| m.rank == 1)
            .map(|m| self.evaluations[&m.key].objectives)
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Non-dominated members of `evals`, sorted by objectives then key.
pub fn nondominated(evals: &[&Evaluation]) -> Vec<String> {
    let points: Vec<Objectives> = evals.iter().map(|e| e.objectives).collect();
    let mut front: Vec<&Evaluation> = fast_nondominated_sort(&points)
        .first()
        .map(|f| f.iter().map(|&i| evals[i]).collect())
        .unwrap_or_default();
    front.sort_by(|a, b| {
        a.objectives
            .iter()
            .zip(&b.objectives)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.key.cmp(&b.key))
    });
    front.into_iter().map(|e| e.key.clone()).collect()
}

struct Evaluator<'a> {
    ctx: &'a EvalContext,
    seen: HashMap<String, Evaluation>,
}

impl Evaluator<'_> {
    fn run(&mut self, genomes: &[Genome]) -> Result<Vec<Evaluation>> {
        let mut todo: Vec<Genome> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for g in genomes {
            let k = g.key();
            if !self.seen.contains_key(&k) && queued.insert(k) {
                todo.push(*g);
            }
        }
        let fresh: Vec<Result<Evaluation>> = if self.ctx.config.parallel {
            todo.par_iter().map(|g| self.ctx.evaluate(g)).collect()
        } else {
            todo.iter().map(|g| self.ctx.evaluate(g)).collect()
        };
        for e in fresh {
            let e = e?;
            log::debug!("evaluated {} acc={:.3}", e.label, e.accuracy);
            self.seen.insert(e.key.clone(), e);
        }
        Ok(genomes
            .iter()
            .map(|g| self.seen[&g.key()].clone())
            .collect())
    }
}

fn record(index: usize, population: &[Evaluation]) -> Generation {
    let points: Vec<Objectives> = population.iter().map(|e| e.objectives).collect();
    let (rank, crowd) = rank_and_crowding(&points);
    Generation {
        index,
        members: population
            .iter()
            .enumerate()
            .map(|(i, e)| Member {
                key: e.key.clone(),
                rank: rank[i] + 1,
                crowding: crowd[i],
            })
            .collect(),
    }
}

/// Runs the full search. The backend, dataset and throughput are resolved
/// before any training starts.
pub fn run_search(config: &SearchConfig) -> Result<ParetoArchive> {
    let ctx = EvalContext::new(config)?;
    run_search_with(&ctx)
}

pub fn run_search_with(ctx: &EvalContext) -> Result<ParetoArchive> {
    let cfg = &ctx.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let variation = Variation {
        mutation_rate: cfg.mutation_rate,
        bounds: ctx.bounds,
    };
    let mut evaluator = Evaluator {
        ctx,
        seen: HashMap::new(),
    };

    let initial: Vec<Genome> = (0..cfg.population)
        .map(|_| random_genome(cfg.mode, &ctx.bounds, &mut rng))
        .collect();
    let mut population = evaluator.run(&initial)?;
    let mut generations = vec![record(0, &population)];
    log::info!("generation 0 evaluated");

    for g in 1..cfg.generations {
        let genomes: Vec<Genome> = population.iter().map(|e| e.genome).collect();
        let objectives: Vec<Objectives> = population.iter().map(|e| e.objectives).collect();
        let offspring = make_offspring(&genomes, &objectives, cfg.population, &variation, &mut rng);
        let children = evaluator.run(&offspring)?;
        let merged: Vec<Evaluation> = population.into_iter().chain(children).collect();
        let points: Vec<Objectives> = merged.iter().map(|e| e.objectives).collect();
        population = environmental_selection(&points, cfg.population)
            .into_iter()
            .map(|i| merged[i].clone())
            .collect();
        generations.push(record(g, &population));
        log::info!(
            "generation {g} evaluated ({} unique genomes so far)",
            evaluator.seen.len()
        );
    }

    let evaluations: BTreeMap<String, Evaluation> = evaluator.seen.into_iter().collect();
    let all: Vec<&Evaluation> = evaluations.values().collect();
    let final_front = nondominated(&all);
    Ok(ParetoArchive {
        mode: cfg.mode,
        backend: ctx.backend.name.clone(),
        seed: cfg.seed,
        phi_device: ctx.throughput.phi_device,
        generations,
        evaluations,
        final_front,
    })
}
