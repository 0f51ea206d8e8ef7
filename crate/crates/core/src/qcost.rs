//! Analytical quantum training cost.
//!
//! Gate time, routing overhead, failure probability and the sampling penalty
//! are composed into a per-step and total training time. Every function is a
//! pure function of its arguments; all times are seconds.

use serde::{Deserialize, Serialize};

use crate::backend::Calibration;
use crate::circuits::GateCounts;
use crate::transpiler::TranspiledCircuit;
use crate::{Error, Result};

/// `p_fail` at or above `1 - SATURATION_DELTA` is reported as saturated.
pub const SATURATION_DELTA: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub n_params: u64,
    pub n_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub p_gate: f64,
    pub p_decoh: f64,
    pub p_fail: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumCostBreakdown {
    pub t_gate: f64,
    pub t_routing: f64,
    pub t_logical: f64,
    pub p_gate: f64,
    pub p_decoh: f64,
    pub p_fail: f64,
    pub t_eff: f64,
    pub n_eval: u64,
    /// Per training step.
    pub t_quantum: f64,
    pub t_quantum_total: f64,
    /// `t_eff - (t_logical + t_routing)`.
    pub reliability_penalty: f64,
}

fn two_qubit_time(counts: &GateCounts, cal: &Calibration) -> Result<f64> {
    if counts.n_2q_by_gate.is_empty() {
        if counts.n_2q == 0 {
            return Ok(0.0);
        }
        return Ok(counts.n_2q as f64 * cal.scalar_t_2q()?);
    }
    let typed: u64 = counts.n_2q_by_gate.values().sum();
    if typed != counts.n_2q {
        return Err(Error::InvalidInput(format!(
            "typed two-qubit counts sum to {typed}, expected {}",
            counts.n_2q
        )));
    }
    let mut total = 0.0;
    for (gate, &n) in &counts.n_2q_by_gate {
        let t = cal
            .t_2q(gate)
            .ok_or_else(|| Error::UnsupportedGate(format!("{gate} has no calibrated duration")))?;
        total += n as f64 * t;
    }
    Ok(total)
}

/// `N_1q t_1q + sum_g N_2q(g) t_2q(g) + N_meas t_meas`.
///
/// Untyped counts use the scalar two-qubit duration, which requires a single
/// calibrated entangler.
pub fn gate_execution_time(counts: &GateCounts, cal: &Calibration) -> Result<f64> {
    Ok(counts.n_1q as f64 * cal.t_1q
        + two_qubit_time(counts, cal)?
        + counts.n_meas as f64 * cal.t_meas)
}

/// Time spent on two-qubit gates present in `physical` but not in `logical`,
/// with each per-type excess clamped at zero.
pub fn routing_overhead_counts(
    logical: &GateCounts,
    physical: &GateCounts,
    cal: &Calibration,
) -> Result<f64> {
    if logical.n_2q_by_gate.is_empty() && physical.n_2q_by_gate.is_empty() {
        let delta = physical.n_2q.saturating_sub(logical.n_2q);
        if delta == 0 {
            return Ok(0.0);
        }
        return Ok(delta as f64 * cal.scalar_t_2q()?);
    }
    let mut total = 0.0;
    for (gate, &n_phys) in &physical.n_2q_by_gate {
        let n_log = logical.n_2q_by_gate.get(gate).copied().unwrap_or(0);
        let delta = n_phys.saturating_sub(n_log);
        if delta > 0 {
            let t = cal.t_2q(gate).ok_or_else(|| {
                Error::UnsupportedGate(format!("{gate} has no calibrated duration"))
            })?;
            total += delta as f64 * t;
        }
    }
    Ok(total)
}

pub fn routing_overhead(transpiled: &TranspiledCircuit, cal: &Calibration) -> Result<f64> {
    routing_overhead_counts(&transpiled.logical_counts, &transpiled.physical_counts, cal)
}

pub fn failure_probability(
    counts: &GateCounts,
    cal: &Calibration,
    t_gate: f64,
) -> Result<Reliability> {
    for (name, eps) in [
        ("eps_1q", cal.eps_1q),
        ("eps_2q", cal.eps_2q),
        ("eps_meas", cal.eps_meas),
    ] {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidCalibration(format!(
                "{name} = {eps} not in [0, 1)"
            )));
        }
    }
    if !(cal.t2 > 0.0) {
        return Err(Error::InvalidCalibration(format!(
            "T2 = {} must be positive",
            cal.t2
        )));
    }
    let survive = (1.0 - cal.eps_1q).powf(counts.n_1q as f64)
        * (1.0 - cal.eps_2q).powf(counts.n_2q as f64)
        * (1.0 - cal.eps_meas).powf(counts.n_meas as f64);
    let p_gate = 1.0 - survive;
    let p_decoh = 1.0 - (-t_gate / cal.t2).exp();
    let p_fail = 1.0 - (1.0 - p_gate) * (1.0 - p_decoh);
    Ok(Reliability {
        p_gate,
        p_decoh,
        p_fail,
    })
}

/// `(t_logical + t_routing) / (1 - p_fail)`: the expected time per useful
/// sample, not a hardware retry count.
pub fn effective_time(t_logical: f64, t_routing: f64, p_fail: f64) -> Result<f64> {
    if !(p_fail < 1.0 - SATURATION_DELTA) || p_fail.is_nan() {
        return Err(Error::ReliabilitySaturated { p_fail });
    }
    Ok((t_logical + t_routing) / (1.0 - p_fail))
}

/// Two parameter-shift evaluations per trainable parameter.
pub fn gradient_evaluations(n_params: u64) -> u64 {
    2 * n_params
}

/// Full cost from logical and physical counts.
pub fn quantum_training_cost_counts(
    logical: &GateCounts,
    physical: &GateCounts,
    cal: &Calibration,
    plan: TrainingPlan,
) -> Result<QuantumCostBreakdown> {
    let t_gate = gate_execution_time(physical, cal)?;
    let t_routing = routing_overhead_counts(logical, physical, cal)?;
    let t_logical = (t_gate - t_routing).max(0.0);
    let rel = failure_probability(physical, cal, t_gate)?;
    let t_eff = effective_time(t_logical, t_routing, rel.p_fail)?;
    Ok(compose(t_gate, t_routing, t_logical, rel, t_eff, plan))
}

pub fn quantum_training_cost(
    transpiled: &TranspiledCircuit,
    cal: &Calibration,
    plan: TrainingPlan,
) -> Result<QuantumCostBreakdown> {
    quantum_training_cost_counts(
        &transpiled.logical_counts,
        &transpiled.physical_counts,
        cal,
        plan,
    )
}

/// Like [`quantum_training_cost_counts`], but a saturated `p_fail` is clamped
/// to `1 - SATURATION_DELTA` instead of failing. The boolean reports whether
/// clamping happened.
pub fn quantum_training_cost_clamped(
    logical: &GateCounts,
    physical: &GateCounts,
    cal: &Calibration,
    plan: TrainingPlan,
) -> Result<(QuantumCostBreakdown, bool)> {
    let t_gate = gate_execution_time(physical, cal)?;
    let t_routing = routing_overhead_counts(logical, physical, cal)?;
    let t_logical = (t_gate - t_routing).max(0.0);
    let mut rel = failure_probability(physical, cal, t_gate)?;
    let saturated = !(rel.p_fail < 1.0 - SATURATION_DELTA);
    if saturated {
        rel.p_fail = 1.0 - SATURATION_DELTA;
    }
    let t_eff = (t_logical + t_routing) / (1.0 - rel.p_fail);
    Ok((
        compose(t_gate, t_routing, t_logical, rel, t_eff, plan),
        saturated,
    ))
}

fn compose(
    t_gate: f64,
    t_routing: f64,
    t_logical: f64,
    rel: Reliability,
    t_eff: f64,
    plan: TrainingPlan,
) -> QuantumCostBreakdown {
    let n_eval = gradient_evaluations(plan.n_params);
    let t_quantum = t_eff * n_eval as f64;
    QuantumCostBreakdown {
        t_gate,
        t_routing,
        t_logical,
        p_gate: rel.p_gate,
        p_decoh: rel.p_decoh,
        p_fail: rel.p_fail,
        t_eff,
        n_eval,
        t_quantum,
        t_quantum_total: t_quantum * plan.n_steps as f64,
        reliability_penalty: t_eff - (t_logical + t_routing),
    }
}
