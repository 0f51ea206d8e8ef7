//! Classical training cost from exact FLOP counts and a calibrated device
//! throughput.
//!
//! Conventions: one multiply-accumulate is 2 FLOPs; activation, pooling and
//! dropout cost 1 FLOP per output element; a training step costs
//! [`TRAINING_STEP_MULTIPLIER`] forward passes. Quantum layers cost 0.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qcost::QuantumCostBreakdown;
use crate::{Error, Result};

/// Forward + backward ≈ 3 forward passes.
pub const TRAINING_STEP_MULTIPLIER: u64 = 3;

pub const CHANNEL_CHOICES: [usize; 4] = [8, 16, 32, 64];
pub const KERNEL_CHOICES: [usize; 3] = [3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
    Tanh,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Relu, Activation::Silu, Activation::Tanh];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    /// Output keeps the input size at stride 1.
    Same,
}

/// 2×2 window, stride 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClassicalLayerSpec {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        activation: Option<Activation>,
        pooling: Option<Pooling>,
        /// Drop probability.
        dropout: Option<f64>,
    },
    Linear {
        in_features: usize,
        out_features: usize,
    },
    /// Dense map onto the quantum input dimension.
    Projection { in_features: usize, n_qubits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
    Vector(usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
            Shape::Vector(n) => n,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

fn conv_extent(size: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    if stride == 0 || kernel == 0 {
        return None;
    }
    match padding {
        Padding::Valid => size.checked_sub(kernel).map(|d| d / stride + 1),
        Padding::Same => (size > 0).then(|| size.div_ceil(stride)),
    }
}

impl ClassicalLayerSpec {
    /// Output shape for `input`, or an invalid-architecture error when the
    /// layer cannot consume it. Dense layers flatten image inputs.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |msg: String| Err(Error::InvalidArchitecture(msg));
        match *self {
            ClassicalLayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                pooling,
                ..
            } => {
                let Shape::Image {
                    channels,
                    height,
                    width,
                } = input
                else {
                    return bad("convolution needs an image input".into());
                };
                if channels != in_ch {
                    return bad(format!(
                        "convolution expects {in_ch} channels, got {channels}"
                    ));
                }
                if out_ch == 0 {
                    return bad("convolution with zero output channels".into());
                }
                let (Some(mut h), Some(mut w)) = (
                    conv_extent(height, kernel, stride, padding),
                    conv_extent(width, kernel, stride, padding),
                ) else {
                    return bad(format!(
                        "kernel {kernel} does not fit a {height}x{width} input"
                    ));
                };
                if pooling.is_some() {
                    h /= 2;
                    w /= 2;
                    if h == 0 || w == 0 {
                        return bad("pooling reduces the feature map to nothing".into());
                    }
                }
                Ok(Shape::Image {
                    channels: out_ch,
                    height: h,
                    width: w,
                })
            }
            ClassicalLayerSpec::Linear {
                in_features,
                out_features,
            }
            | ClassicalLayerSpec::Projection {
                in_features,
                n_qubits: out_features,
            } => {
                if input.len() != in_features {
                    return bad(format!(
                        "dense layer expects {in_features} features, got {}",
                        input.len()
                    ));
                }
                Ok(Shape::Vector(out_features))
            }
        }
    }

    /// Forward-pass FLOPs for `input`.
    pub fn flops(&self, input: Shape) -> Result<u64> {
        let out = self.output_shape(input)?;
        Ok(match *self {
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
                let Shape::Image { height, width, .. } = input else {
                    unreachable!()
                };
                let ho = conv_extent(height, kernel, stride, padding).unwrap();
                let wo = conv_extent(width, kernel, stride, padding).unwrap();
                let conv_out = (out_ch * ho * wo) as u64;
                let mut f = 2 * (kernel * kernel * in_ch) as u64 * conv_out;
                if activation.is_some() {
                    f += conv_out;
                }
                if pooling.is_some() {
                    f += out.len() as u64;
                }
                if dropout.is_some() {
                    f += out.len() as u64;
                }
                f
            }
            ClassicalLayerSpec::Linear {
                in_features,
                out_features,
            }
            | ClassicalLayerSpec::Projection {
                in_features,
                n_qubits: out_features,
            } => 2 * (in_features * out_features) as u64,
        })
    }

    /// Trainable weights including biases.
    pub fn n_params(&self) -> usize {
        match *self {
            ClassicalLayerSpec::Conv {
                in_ch,
                out_ch,
                kernel,
                ..
            } => kernel * kernel * in_ch * out_ch + out_ch,
            ClassicalLayerSpec::Linear {
                in_features,
                out_features,
            }
            | ClassicalLayerSpec::Projection {
                in_features,
                n_qubits: out_features,
            } => in_features * out_features + out_features,
        }
    }
}

/// Output shape of a whole stack.
pub fn stack_output_shape(stack: &[ClassicalLayerSpec], input: Shape) -> Result<Shape> {
    stack
        .iter()
        .try_fold(input, |s, layer| layer.output_shape(s))
}

/// Forward-pass FLOPs of `stack` applied to `input`.
pub fn count_flops(stack: &[ClassicalLayerSpec], input: Shape) -> Result<u64> {
    let mut shape = input;
    let mut total = 0;
    for layer in stack {
        total += layer.flops(shape)?;
        shape = layer.output_shape(shape)?;
    }
    Ok(total)
}

pub fn training_step_flops(forward_flops: u64) -> u64 {
    TRAINING_STEP_MULTIPLIER * forward_flops
}

/// `Φ = F_reference / T_measured`, in FLOPs per second.
pub fn calibrate_throughput(f_reference: f64, t_measured: f64) -> Result<f64> {
    if !(f_reference > 0.0 && f_reference.is_finite())
        || !(t_measured > 0.0 && t_measured.is_finite())
    {
        return Err(Error::InvalidCalibration(format!(
            "throughput calibration needs positive inputs, got F = {f_reference}, T = {t_measured}"
        )));
    }
    Ok(f_reference / t_measured)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCost {
    pub f_candidate: f64,
    pub phi_device: f64,
    /// Per training step.
    pub t_classical: f64,
    pub t_classical_total: f64,
}

pub fn classical_cost(f_candidate: f64, phi_device: f64, n_steps: u64) -> Result<ClassicalCost> {
    if !(phi_device > 0.0 && phi_device.is_finite()) {
        return Err(Error::InvalidCalibration(format!(
            "throughput {phi_device} must be positive"
        )));
    }
    if !(f_candidate >= 0.0 && f_candidate.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "FLOP count {f_candidate} must be non-negative"
        )));
    }
    let t_classical = f_candidate / phi_device;
    Ok(ClassicalCost {
        f_candidate,
        phi_device,
        t_classical,
        t_classical_total: t_classical * n_steps as f64,
    })
}

/// `C_total = T_classical_total + T_quantum_total`.
pub fn total_cost(classical: &ClassicalCost, quantum: &QuantumCostBreakdown) -> f64 {
    classical.t_classical_total + quantum.t_quantum_total
}

/// A persisted throughput calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub reference: String,
    /// FLOPs of one reference training step.
    pub f_reference: f64,
    /// Median wall time of one reference training step, seconds.
    pub t_measured: f64,
    pub phi_device: f64,
}

impl Throughput {
    pub fn new(reference: &str, f_reference: f64, t_measured: f64) -> Result<Self> {
        Ok(Throughput {
            reference: reference.to_string(),
            f_reference,
            t_measured,
            phi_device: calibrate_throughput(f_reference, t_measured)?,
        })
    }

    /// A throughput given directly, with no measurement behind it.
    pub fn fixed(phi_device: f64) -> Result<Self> {
        Throughput::new("fixed", phi_device, 1.0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: Throughput = serde_json::from_str(&text)?;
        calibrate_throughput(t.f_reference, t.t_measured)?;
        Ok(t)
    }

    pub fn store(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
