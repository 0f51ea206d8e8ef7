//! Hybrid networks: a small CNN, a projection onto the qubit count, an
//! angle-embedded variational circuit read out as per-qubit `⟨Z⟩`, and a
//! linear classification head. Includes the synthetic 8×8 dataset and a
//! seeded Adam trainer.
//!
//! All trainable weights live in one flat vector; every layer addresses its
//! slice by offset. Gradients use the same layout.

use std::f64::consts::PI;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ccost::{
    count_flops, stack_output_shape, training_step_flops, Activation, ClassicalLayerSpec, Padding,
    Pooling, Shape, Throughput,
};
use crate::circuits::{build_ansatz, embed, Circuit, Entangler, RotationSet, Topology};
use crate::simkernel::{adjoint_vjp, expect_z, run};
use crate::{Error, Result};

pub const IMAGE_SIDE: usize = 8;
pub const IMAGE_SHAPE: Shape = Shape::Image {
    channels: 1,
    height: IMAGE_SIDE,
    width: IMAGE_SIDE,
};
pub const DROPOUT_RATE: f64 = 0.1;
pub const NOISE_SIGMA: f64 = 0.5;

// ---------------------------------------------------------------- dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Row-major pixels.
    pub pixels: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub n_classes: usize,
    pub input: Shape,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

impl Dataset {
    pub fn new(
        n_classes: usize,
        input: Shape,
        train: Vec<Sample>,
        validation: Vec<Sample>,
    ) -> Result<Self> {
        for s in train.iter().chain(&validation) {
            if s.pixels.len() != input.len() || s.label >= n_classes {
                return Err(Error::DimensionMismatch(format!(
                    "sample with {} values and label {} does not fit {} classes of {:?}",
                    s.pixels.len(),
                    s.label,
                    n_classes,
                    input
                )));
            }
        }
        Ok(Dataset {
            n_classes,
            input,
            train,
            validation,
        })
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn template(class: usize, r: usize, c: usize) -> f64 {
    let n = IMAGE_SIDE;
    let on = match class {
        0 => r.is_multiple_of(2),
        1 => c.is_multiple_of(2),
        2 => r.abs_diff(c) <= 1,
        3 => (r + c).abs_diff(n - 1) <= 1,
        4 => r == 0 || c == 0 || r == n - 1 || c == n - 1,
        5 => (2..6).contains(&r) && (2..6).contains(&c),
        6 => (r / 2 + c / 2).is_multiple_of(2),
        7 => (3..5).contains(&r) || (3..5).contains(&c),
        8 => r < n / 2,
        _ => c < n / 2,
    };
    if on {
        1.0
    } else {
        0.0
    }
}

/// Seeded synthetic images: one fixed 8×8 pattern per class plus Gaussian
/// pixel noise. The split is stratified, 80/20 within every class.
pub fn make_dataset(n_classes: usize, samples_per_class: usize, seed: u64) -> Result<Dataset> {
    if !(2..=10).contains(&n_classes) {
        return Err(Error::InvalidInput(format!(
            "{n_classes} classes; expected 2..=10"
        )));
    }
    if samples_per_class < 20 {
        return Err(Error::InvalidInput(format!(
            "{samples_per_class} samples per class; at least 20 required"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    let n_val = samples_per_class / 5;
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for class in 0..n_classes {
        for i in 0..samples_per_class {
            let amplitude = rng.random_range(0.8..1.2);
            let pixels = (0..IMAGE_SIDE * IMAGE_SIDE)
                .map(|p| {
                    amplitude * template(class, p / IMAGE_SIDE, p % IMAGE_SIDE)
                        + noise.sample(&mut rng)
                })
                .collect();
            let s = Sample {
                pixels,
                label: class,
            };
            if i < n_val {
                validation.push(s);
            } else {
                train.push(s);
            }
        }
    }
    train.shuffle(&mut rng);
    validation.shuffle(&mut rng);
    Dataset::new(n_classes, IMAGE_SHAPE, train, validation)
}

// ---------------------------------------------------------------- model spec

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantumSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub rotations: RotationSet,
    pub entangler: Entangler,
    pub topology: Topology,
}

impl QuantumSpec {
    /// Angle embedding followed by the ansatz.
    pub fn circuit(&self) -> Result<Circuit> {
        let ansatz = build_ansatz(
            self.n_qubits,
            self.depth,
            self.rotations,
            self.entangler,
            self.topology,
        )?;
        embed(&ansatz, self.n_qubits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: Shape,
    /// Convolution and dense layers before the projection.
    pub classical: Vec<ClassicalLayerSpec>,
    /// Dense map from the flattened classical output to `n_qubits` values.
    /// Without it the flattened output must already have `n_qubits` entries.
    pub projection: bool,
    pub quantum: QuantumSpec,
    pub n_classes: usize,
}

/// The fixed-mode feature extractor: one 16-channel 3×3 convolution, ReLU,
/// 2×2 max pooling and dropout 0.1.
pub fn fixed_cnn() -> Vec<ClassicalLayerSpec> {
    vec![ClassicalLayerSpec::Conv {
        in_ch: 1,
        out_ch: 16,
        kernel: 3,
        stride: 1,
        padding: Padding::Same,
        activation: Some(Activation::Relu),
        pooling: Some(Pooling::Max),
        dropout: Some(DROPOUT_RATE),
    }]
}

impl ModelSpec {
    pub fn new(classical: Vec<ClassicalLayerSpec>, quantum: QuantumSpec, n_classes: usize) -> Self {
        ModelSpec {
            input: IMAGE_SHAPE,
            classical,
            projection: true,
            quantum,
            n_classes,
        }
    }

    /// Forward FLOPs of the classical feature extractor for one sample. The
    /// projection and head are not counted.
    pub fn classical_forward_flops(&self) -> Result<u64> {
        count_flops(&self.classical, self.input)
    }

    /// FLOPs of one optimizer step on a batch of `batch_size`.
    pub fn classical_step_flops(&self, batch_size: usize) -> Result<u64> {
        Ok(training_step_flops(self.classical_forward_flops()?) * batch_size as u64)
    }
}

// ---------------------------------------------------------------- layers

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    k: usize,
    stride: usize,
    in_h: usize,
    in_w: usize,
    conv_h: usize,
    conv_w: usize,
    pad_top: usize,
    pad_left: usize,
    activation: Option<Activation>,
    pooling: Option<Pooling>,
    dropout: Option<f64>,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct DenseLayer {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv(ConvLayer),
    Dense(DenseLayer),
}

enum Cache {
    Conv {
        cols: Vec<f64>,
        pre: Vec<f64>,
        act: Vec<f64>,
        pool_src: Vec<usize>,
        mask: Option<Vec<f64>>,
    },
    Dense {
        input: Vec<f64>,
    },
}

fn same_padding(size: usize, k: usize, stride: usize) -> (usize, usize) {
    let out = size.div_ceil(stride);
    let total = ((out - 1) * stride + k).saturating_sub(size);
    (out, total / 2)
}

fn activate(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::Silu => z / (1.0 + (-z).exp()),
        Activation::Tanh => z.tanh(),
    }
}

fn activate_grad(a: Activation, z: f64, y: f64) -> f64 {
    match a {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Silu => {
            let s = 1.0 / (1.0 + (-z).exp());
            s * (1.0 + z * (1.0 - s))
        }
        Activation::Tanh => 1.0 - y * y,
    }
}

impl ConvLayer {
    fn out_hw(&self) -> (usize, usize) {
        match self.pooling {
            Some(_) => (self.conv_h / 2, self.conv_w / 2),
            None => (self.conv_h, self.conv_w),
        }
    }

    fn forward<R: Rng>(&self, p: &[f64], x: &[f64], rng: Option<&mut R>) -> (Vec<f64>, Cache) {
        let (ch, cw) = (self.conv_h, self.conv_w);
        let (n_pix, n_red) = (ch * cw, self.in_ch * self.k * self.k);
        let cols = self.im2col(x);
        let mut pre: Vec<f64> = (0..self.out_ch)
            .flat_map(|o| std::iter::repeat_n(p[self.b_off + o], n_pix))
            .collect();
        // pre[out_ch × n_pix] += W[out_ch × n_red] · cols[n_red × n_pix]
        gemm(
            (self.out_ch, n_red, n_pix),
            (
                &p[self.w_off..self.w_off + self.out_ch * n_red],
                n_red as isize,
                1,
            ),
            (&cols, n_pix as isize, 1),
            (&mut pre, n_pix as isize, 1),
        );
        let act: Vec<f64> = match self.activation {
            Some(a) => pre.iter().map(|&z| activate(a, z)).collect(),
            None => pre.clone(),
        };
        let (oh, ow) = self.out_hw();
        let (mut out, pool_src) = match self.pooling {
            None => (act.clone(), Vec::new()),
            Some(kind) => {
                let mut out = vec![0.0; self.out_ch * oh * ow];
                let mut src = vec![0; out.len()];
                for o in 0..self.out_ch {
                    for py in 0..oh {
                        for px in 0..ow {
                            let idx = [(0, 0), (0, 1), (1, 0), (1, 1)]
                                .map(|(dy, dx)| (o * ch + 2 * py + dy) * cw + 2 * px + dx);
                            let dst = (o * oh + py) * ow + px;
                            match kind {
                                Pooling::Max => {
                                    let best = idx
                                        .into_iter()
                                        .reduce(|a, b| if act[b] > act[a] { b } else { a })
                                        .unwrap();
                                    out[dst] = act[best];
                                    src[dst] = best;
                                }
                                Pooling::Avg => {
                                    out[dst] = idx.iter().map(|&i| act[i]).sum::<f64>() / 4.0;
                                }
                            }
                        }
                    }
                }
                (out, src)
            }
        };
        let mask = match (self.dropout, rng) {
            (Some(rate), Some(rng)) => {
                let keep = 1.0 / (1.0 - rate);
                let m: Vec<f64> = (0..out.len())
                    .map(|_| {
                        if rng.random::<f64>() < rate {
                            0.0
                        } else {
                            keep
                        }
                    })
                    .collect();
                for (v, m) in out.iter_mut().zip(&m) {
                    *v *= m;
                }
                Some(m)
            }
            _ => None,
        };
        let cache = Cache::Conv {
            cols,
            pre,
            act,
            pool_src,
            mask,
        };
        (out, cache)
    }

    fn backward(
        &self,
        p: &[f64],
        g: &mut [f64],
        cache: &Cache,
        mut dy: Vec<f64>,
        need_dx: bool,
    ) -> Vec<f64> {
        let Cache::Conv {
            cols,
            pre,
            act,
            pool_src,
            mask,
        } = cache
        else {
            unreachable!()
        };
        if let Some(m) = mask {
            for (d, m) in dy.iter_mut().zip(m) {
                *d *= m;
            }
        }
        let (ch, cw) = (self.conv_h, self.conv_w);
        let mut dact = match self.pooling {
            None => dy,
            Some(kind) => {
                let (oh, ow) = self.out_hw();
                let mut d = vec![0.0; act.len()];
                for o in 0..self.out_ch {
                    for py in 0..oh {
                        for px in 0..ow {
                            let dst = (o * oh + py) * ow + px;
                            match kind {
                                Pooling::Max => d[pool_src[dst]] += dy[dst],
                                Pooling::Avg => {
                                    for (dyy, dxx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                        d[(o * ch + 2 * py + dyy) * cw + 2 * px + dxx] +=
                                            dy[dst] / 4.0;
                                    }
                                }
                            }
                        }
                    }
                }
                d
            }
        };
        if let Some(a) = self.activation {
            for ((d, &z), &y) in dact.iter_mut().zip(pre).zip(act) {
                *d *= activate_grad(a, z, y);
            }
        }
        let (n_pix, n_red) = (ch * cw, self.in_ch * self.k * self.k);
        for (o, row) in dact.chunks(n_pix).enumerate() {
            g[self.b_off + o] += row.iter().sum::<f64>();
        }
        // dW[out_ch × n_red] += dZ[out_ch × n_pix] · colsᵀ
        gemm(
            (self.out_ch, n_pix, n_red),
            (&dact, n_pix as isize, 1),
            (cols, 1, n_pix as isize),
            (
                &mut g[self.w_off..self.w_off + self.out_ch * n_red],
                n_red as isize,
                1,
            ),
        );
        if !need_dx {
            return Vec::new();
        }
        // dcols[n_red × n_pix] = Wᵀ · dZ
        let mut dcols = vec![0.0; n_red * n_pix];
        gemm(
            (n_red, self.out_ch, n_pix),
            (
                &p[self.w_off..self.w_off + self.out_ch * n_red],
                1,
                n_red as isize,
            ),
            (&dact, n_pix as isize, 1),
            (&mut dcols, n_pix as isize, 1),
        );
        self.col2im(&dcols)
    }

    /// Source pixel for kernel tap `(ky, kx)` at output `(oy, ox)`, if it
    /// falls inside the unpadded input.
    fn tap(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad_top)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad_left)?;
        (iy < self.in_h && ix < self.in_w).then_some((iy, ix))
    }

    /// Row `(c, ky, kx)`, column `(oy, ox)` holds the input pixel that tap
    /// multiplies; padding contributes zeros.
    fn im2col(&self, x: &[f64]) -> Vec<f64> {
        let (k, n_pix) = (self.k, self.conv_h * self.conv_w);
        let mut cols = vec![0.0; self.in_ch * k * k * n_pix];
        for c in 0..self.in_ch {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((c * k + ky) * k + kx) * n_pix;
                    for oy in 0..self.conv_h {
                        for ox in 0..self.conv_w {
                            if let Some((iy, ix)) = self.tap(oy, ox, ky, kx) {
                                cols[row + oy * self.conv_w + ox] =
                                    x[(c * self.in_h + iy) * self.in_w + ix];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &[f64]) -> Vec<f64> {
        let (k, n_pix) = (self.k, self.conv_h * self.conv_w);
        let mut dx = vec![0.0; self.in_ch * self.in_h * self.in_w];
        for c in 0..self.in_ch {
            for ky in 0..k {
                for kx in 0..k {
                    let row = ((c * k + ky) * k + kx) * n_pix;
                    for oy in 0..self.conv_h {
                        for ox in 0..self.conv_w {
                            if let Some((iy, ix)) = self.tap(oy, ox, ky, kx) {
                                dx[(c * self.in_h + iy) * self.in_w + ix] +=
                                    dcols[row + oy * self.conv_w + ox];
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// `C += A·B` for row-major views given as `(slice, row stride, column
/// stride)`; `dims` is `(m, k, n)`.
fn gemm(
    dims: (usize, usize, usize),
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    c: (&mut [f64], isize, isize),
) {
    let (m, k, n) = dims;
    assert!(a.0.len() >= m * k && b.0.len() >= k * n && c.0.len() >= m * n);
    // SAFETY: the asserted lengths cover every element the strides address
    // for the layouts used in this module (dense row-major or its transpose).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            1.0,
            c.0.as_mut_ptr(),
            c.1,
            c.2,
        );
    }
}

impl DenseLayer {
    fn forward(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let w = &p[self.w_off..self.w_off + self.n_in * self.n_out];
        (0..self.n_out)
            .map(|o| {
                p[self.b_off + o]
                    + w[o * self.n_in..(o + 1) * self.n_in]
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .collect()
    }

    fn backward(&self, p: &[f64], g: &mut [f64], x: &[f64], dy: &[f64], need_dx: bool) -> Vec<f64> {
        let mut dx = if need_dx {
            vec![0.0; self.n_in]
        } else {
            Vec::new()
        };
        for (o, &d) in dy.iter().enumerate() {
            g[self.b_off + o] += d;
            let row = self.w_off + o * self.n_in;
            for i in 0..self.n_in {
                g[row + i] += d * x[i];
                if need_dx {
                    dx[i] += d * p[row + i];
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------- model

/// A hybrid network with all weights in `params`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridModel {
    spec: ModelSpec,
    layers: Vec<Layer>,
    projection: Option<DenseLayer>,
    circuit: Circuit,
    theta_off: usize,
    head: DenseLayer,
    params: Vec<f64>,
}

/// Serialized form of a model: its spec and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

struct Forward {
    caches: Vec<Cache>,
    features: Vec<f64>,
    projected: Vec<f64>,
    angles: Vec<f64>,
    expectations: Vec<f64>,
    logits: Vec<f64>,
}

impl HybridModel {
    /// Builds the layer chain for `spec` and draws initial weights from
    /// `seed`. Dense and convolution weights are uniform in
    /// `±1/sqrt(fan_in)`, circuit parameters uniform in `[-π, π)`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut offset = 0;
        let mut alloc = |n: usize| {
            let at = offset;
            offset += n;
            at
        };
        let mut layers = Vec::new();
        let mut shape = spec.input;
        for layer in &spec.classical {
            let out = layer.output_shape(shape)?;
            match *layer {
                ClassicalLayerSpec::Conv {
                    in_ch,
                    out_ch,
                    kernel,
                    stride,
                    padding,
                    activation,
                    pooling,
                    dropout,
                } => {
                    let Shape::Image { height, width, .. } = shape else {
                        unreachable!()
                    };
                    let ((conv_h, pad_top), (conv_w, pad_left)) = match padding {
                        Padding::Same => (
                            same_padding(height, kernel, stride),
                            same_padding(width, kernel, stride),
                        ),
                        Padding::Valid => (
                            ((height - kernel) / stride + 1, 0),
                            ((width - kernel) / stride + 1, 0),
                        ),
                    };
                    if let Some(rate) = dropout {
                        if !(0.0..1.0).contains(&rate) {
                            return Err(Error::InvalidArchitecture(format!("dropout rate {rate}")));
                        }
                    }
                    let w_off = alloc(out_ch * in_ch * kernel * kernel);
                    let b_off = alloc(out_ch);
                    layers.push(Layer::Conv(ConvLayer {
                        in_ch,
                        out_ch,
                        k: kernel,
                        stride,
                        in_h: height,
                        in_w: width,
                        conv_h,
                        conv_w,
                        pad_top,
                        pad_left,
                        activation,
                        pooling,
                        dropout,
                        w_off,
                        b_off,
                    }));
                }
                ClassicalLayerSpec::Linear {
                    in_features,
                    out_features,
                } => {
                    let w_off = alloc(in_features * out_features);
                    let b_off = alloc(out_features);
                    layers.push(Layer::Dense(DenseLayer {
                        n_in: in_features,
                        n_out: out_features,
                        w_off,
                        b_off,
                    }));
                }
                ClassicalLayerSpec::Projection { .. } => {
                    return Err(Error::InvalidArchitecture(
                        "projection belongs after the classical stack".into(),
                    ))
                }
            }
            shape = out;
        }
        let nq = spec.quantum.n_qubits;
        let projection = if spec.projection {
            let w_off = alloc(shape.len() * nq);
            let b_off = alloc(nq);
            Some(DenseLayer {
                n_in: shape.len(),
                n_out: nq,
                w_off,
                b_off,
            })
        } else {
            if shape.len() != nq {
                return Err(Error::InvalidArchitecture(format!(
                    "{} classical outputs feed {nq} qubits without a projection",
                    shape.len()
                )));
            }
            None
        };
        let circuit = spec.quantum.circuit()?;
        let theta_off = alloc(circuit.n_params());
        if spec.n_classes == 0 {
            return Err(Error::InvalidArchitecture("zero classes".into()));
        }
        let head = {
            let w_off = alloc(nq * spec.n_classes);
            let b_off = alloc(spec.n_classes);
            DenseLayer {
                n_in: nq,
                n_out: spec.n_classes,
                w_off,
                b_off,
            }
        };
        let mut model = HybridModel {
            spec,
            layers,
            projection,
            circuit,
            theta_off,
            head,
            params: vec![0.0; offset],
        };
        model.initialize(seed);
        Ok(model)
    }

    fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |params: &mut [f64], off: usize, n: usize, bound: f64| {
            for v in &mut params[off..off + n] {
                *v = rng.random_range(-bound..bound);
            }
        };
        let dense = |d: &DenseLayer| (d.w_off, d.n_in * d.n_out, d.b_off, d.n_out, d.n_in);
        let mut blocks = Vec::new();
        for layer in &self.layers {
            blocks.push(match layer {
                Layer::Conv(c) => {
                    let fan_in = c.in_ch * c.k * c.k;
                    (c.w_off, c.out_ch * fan_in, c.b_off, c.out_ch, fan_in)
                }
                Layer::Dense(d) => dense(d),
            });
        }
        blocks.extend(self.projection.iter().map(dense));
        for (w_off, w_len, b_off, b_len, fan_in) in blocks {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            fill(&mut self.params, w_off, w_len, bound);
            fill(&mut self.params, b_off, b_len, bound);
        }
        let n_theta = self.circuit.n_params();
        fill(&mut self.params, self.theta_off, n_theta, PI);
        let h = self.head;
        let bound = 1.0 / (h.n_in as f64).sqrt();
        fill(&mut self.params, h.w_off, h.n_in * h.n_out, bound);
        fill(&mut self.params, h.b_off, h.n_out, bound);
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a model with {}",
                params.len(),
                self.params.len()
            )));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Circuit parameters.
    pub fn theta(&self) -> &[f64] {
        &self.params[self.theta_off..self.theta_off + self.circuit.n_params()]
    }

    /// Weights of the classification head as `(weights, bias)`; weights are
    /// row-major `n_classes × n_qubits`.
    pub fn head_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let h = self.head;
        let (left, right) = self.params.split_at_mut(h.b_off);
        (
            &mut left[h.w_off..h.w_off + h.n_in * h.n_out],
            &mut right[..h.n_out],
        )
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            spec: self.spec.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_snapshot(snapshot: &ModelSnapshot) -> Result<Self> {
        let mut m = HybridModel::new(snapshot.spec.clone(), 0)?;
        m.set_params(&snapshot.params)?;
        Ok(m)
    }

    fn forward_one<R: Rng>(&self, x: &[f64], mut rng: Option<&mut R>) -> Result<Forward> {
        if x.len() != self.spec.input.len() {
            return Err(Error::InvalidArchitecture(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.spec.input.len()
            )));
        }
        let p = &self.params;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for layer in &self.layers {
            let (out, cache) = match layer {
                Layer::Conv(c) => c.forward(p, &h, rng.as_deref_mut()),
                Layer::Dense(d) => (d.forward(p, &h), Cache::Dense { input: h.clone() }),
            };
            caches.push(cache);
            h = out;
        }
        let features = h;
        let projected = match &self.projection {
            Some(d) => d.forward(p, &features),
            None => features.clone(),
        };
        let angles: Vec<f64> = projected.iter().map(|u| PI * u.tanh()).collect();
        let state = run(&self.circuit, self.theta(), &angles)?;
        let expectations = expect_z(&state);
        let logits = self.head.forward(p, &expectations);
        Ok(Forward {
            caches,
            features,
            projected,
            angles,
            expectations,
            logits,
        })
    }

    /// Class scores for one input, without dropout.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_one::<ChaCha8Rng>(x, None)?.logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let scores = self.forward(x)?;
        Ok(argmax(&scores))
    }

    /// Mean cross-entropy over `batch` and its gradient in the layout of
    /// [`HybridModel::params`]. Dropout is active only when `rng` is given.
    pub fn loss_and_grad<R: Rng>(
        &self,
        batch: &[&Sample],
        mut rng: Option<&mut R>,
    ) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        let p = &self.params;
        for sample in batch {
            let f = self.forward_one(&sample.pixels, rng.as_deref_mut())?;
            let probs = softmax(&f.logits);
            loss -= probs[sample.label].max(f64::MIN_POSITIVE).ln() * scale;
            let dlogits: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(c, &q)| (q - if c == sample.label { 1.0 } else { 0.0 }) * scale)
                .collect();
            let dexp = self
                .head
                .backward(p, &mut grad, &f.expectations, &dlogits, true);
            let (dtheta, dangles) = adjoint_vjp(&self.circuit, self.theta(), &f.angles, &dexp)?;
            for (g, d) in grad[self.theta_off..].iter_mut().zip(&dtheta) {
                *g += d;
            }
            let dproj: Vec<f64> = dangles
                .iter()
                .zip(&f.projected)
                .map(|(d, u)| {
                    let t = u.tanh();
                    d * PI * (1.0 - t * t)
                })
                .collect();
            let need = !self.layers.is_empty();
            let mut dh = match &self.projection {
                Some(d) => d.backward(p, &mut grad, &f.features, &dproj, need),
                None => dproj,
            };
            for (i, (layer, cache)) in self.layers.iter().zip(&f.caches).enumerate().rev() {
                let need_dx = i > 0;
                dh = match layer {
                    Layer::Conv(c) => c.backward(p, &mut grad, cache, dh, need_dx),
                    Layer::Dense(d) => {
                        let Cache::Dense { input } = cache else {
                            unreachable!()
                        };
                        d.backward(p, &mut grad, input, &dh, need_dx)
                    }
                };
            }
        }
        Ok((loss, grad))
    }

    /// Fraction of `samples` classified correctly; 0 for an empty set.
    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut correct = 0;
        for s in samples {
            if self.predict(&s.pixels)? == s.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / samples.len() as f64)
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| {
            if x > best.1 {
                (i, x)
            } else {
                best
            }
        })
        .0
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Classical + projection + circuit + head weights.
pub fn count_all_parameters(model: &HybridModel) -> usize {
    model.params.len()
}

/// The same count computed from a spec without building the model.
pub fn count_spec_parameters(spec: &ModelSpec) -> Result<usize> {
    let classical: usize = spec
        .classical
        .iter()
        .map(ClassicalLayerSpec::n_params)
        .sum();
    let flat = stack_output_shape(&spec.classical, spec.input)?.len();
    let nq = spec.quantum.n_qubits;
    let projection = if spec.projection { flat * nq + nq } else { 0 };
    let quantum = spec.quantum.depth * nq;
    let head = nq * spec.n_classes + spec.n_classes;
    Ok(classical + projection + quantum + head)
}

// ---------------------------------------------------------------- training

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    /// Stop when validation accuracy after `early_stop_epoch` epochs is below
    /// `early_stop_accuracy`.
    pub early_stop_epoch: usize,
    pub early_stop_accuracy: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 0.01,
            batch_size: 32,
            early_stop_epoch: 2,
            early_stop_accuracy: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Best validation accuracy seen; 0 when training diverged.
    pub accuracy: f64,
    pub epochs_run: usize,
    /// Optimizer steps actually executed.
    pub n_steps: u64,
    pub early_stopped: bool,
    /// Epoch (1-based) whose loss went non-finite.
    pub diverged_at: Option<usize>,
    pub history: Vec<EpochRecord>,
}

/// Trains in place and always returns a report; divergence is recorded in
/// `diverged_at` and zeroes the accuracy.
pub fn fit(model: &mut HybridModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.input != model.spec.input {
        return Err(Error::InvalidArchitecture(format!(
            "dataset input {:?} does not match model input {:?}",
            data.input, model.spec.input
        )));
    }
    if data.n_classes > model.spec.n_classes {
        return Err(Error::InvalidArchitecture(format!(
            "{} classes in the data, {} in the head",
            data.n_classes, model.spec.n_classes
        )));
    }
    let batch_size = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.params.len(), cfg.lr);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut report = TrainReport {
        accuracy: 0.0,
        epochs_run: 0,
        n_steps: 0,
        early_stopped: false,
        diverged_at: None,
        history: Vec::new(),
    };
    let mut params = model.params.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data.train[i]).collect();
            let (loss, grad) = model.loss_and_grad(&batch, Some(&mut rng))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                report.diverged_at = Some(epoch);
                report.accuracy = 0.0;
                report.epochs_run = epoch;
                return Ok(report);
            }
            adam.step(&mut params, &grad);
            model.params.copy_from_slice(&params);
            report.n_steps += 1;
            epoch_loss += loss * batch.len() as f64;
        }
        let val_accuracy = model.accuracy(&data.validation)?;
        report.accuracy = report.accuracy.max(val_accuracy);
        report.epochs_run = epoch;
        report.history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / data.train.len().max(1) as f64,
            val_accuracy,
        });
        if epoch == cfg.early_stop_epoch && val_accuracy < cfg.early_stop_accuracy {
            report.early_stopped = true;
            break;
        }
    }
    Ok(report)
}

/// Like [`fit`], but a non-finite loss is an error.
pub fn train(model: &mut HybridModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    let report = fit(model, data, cfg)?;
    match report.diverged_at {
        Some(epoch) => Err(Error::TrainingDiverged { epoch }),
        None => Ok(report),
    }
}

// ---------------------------------------------------------------- throughput

/// Times the fixed-mode feature extractor's training step (forward and
/// backward on one batch) and returns the calibrated throughput. Runs
/// `warmup` untimed steps, then reports the median of `timed` steps.
pub fn measure_reference_throughput(
    batch_size: usize,
    warmup: usize,
    timed: usize,
    seed: u64,
) -> Result<Throughput> {
    let quantum = QuantumSpec {
        n_qubits: 2,
        depth: 1,
        rotations: RotationSet::single(crate::circuits::RotationKind::Ry),
        entangler: Entangler::Cnot,
        topology: Topology::Linear,
    };
    let spec = ModelSpec::new(fixed_cnn(), quantum, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = classical_layers(&spec)?;
    let n_weights = layers.iter().map(layer_weight_end).max().unwrap_or(0);
    let params: Vec<f64> = (0..n_weights)
        .map(|_| rng.random_range(-0.3..0.3))
        .collect();
    let batch: Vec<Vec<f64>> = (0..batch_size.max(1))
        .map(|_| {
            (0..IMAGE_SHAPE.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let mut times = Vec::with_capacity(timed);
    for i in 0..warmup + timed.max(1) {
        let start = Instant::now();
        let mut grad = vec![0.0; n_weights];
        for x in &batch {
            let mut caches = Vec::new();
            let mut h = x.clone();
            for layer in &layers {
                let (out, cache) = layer.forward(&params, &h, Some(&mut rng));
                caches.push(cache);
                h = out;
            }
            let mut dh = vec![1.0; h.len()];
            for (j, (layer, cache)) in layers.iter().zip(&caches).enumerate().rev() {
                dh = layer.backward(&params, &mut grad, cache, dh, j > 0);
            }
        }
        std::hint::black_box(&grad);
        if i >= warmup {
            times.push(start.elapsed().as_secs_f64());
        }
    }
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    let flops = spec.classical_step_flops(batch_size.max(1))? as f64;
    Throughput::new("fixed-cnn", flops, median.max(f64::MIN_POSITIVE))
}

fn classical_layers(spec: &ModelSpec) -> Result<Vec<ConvLayer>> {
    let model = HybridModel::new(spec.clone(), 0)?;
    Ok(model
        .layers
        .into_iter()
        .filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            Layer::Dense(_) => None,
        })
        .collect())
}

fn layer_weight_end(c: &ConvLayer) -> usize {
    c.b_off + c.out_ch
}
