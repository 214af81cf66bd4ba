//! W-MSR resilient consensus and the linear consensus baseline for
//! second-order agents.

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusGains {
    /// Damping toward the reference velocity (1/s).
    pub kappa: f64,
    /// Weight of relative velocity against relative position (s).
    pub gamma_v: f64,
    /// Number of extreme values discarded on each side.
    pub f_param: usize,
}

impl Default for ConsensusGains {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            gamma_v: 0.95,
            f_param: 0,
        }
    }
}

impl ConsensusGains {
    pub(crate) fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            out.push(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.gamma_v.is_finite() && self.gamma_v > 0.0) {
            out.push(format!("gamma_v must be positive, got {}", self.gamma_v));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v.join("; ")))
        }
    }

    /// `gamma_v = (1 - kappa dt) / kappa`. With this coupling the quantity
    /// `xi + gamma_v v` evolves as first-order consensus under the
    /// semi-implicit integrator, so normal states stay in their convex hull
    /// whenever `dt / kappa * sum_j a_ij <= 1`.
    pub fn matched(kappa: f64, dt: f64, f_param: usize) -> Self {
        Self {
            kappa,
            gamma_v: (1.0 - kappa * dt) / kappa,
            f_param,
        }
    }
}

/// What a neighbor's message looks like to the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSample {
    pub neighbor_id: usize,
    pub weight: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// The neighbor's formation offset.
    pub offset: Vec<f64>,
}

/// Which value W-MSR sorts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterFrame {
    /// Formation-relative position `x - h`.
    #[default]
    Formation,
    /// Raw position `x`.
    Raw,
    /// `x - h + gamma_v v`, the quantity the update averages.
    Combined,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
}

/// W-MSR filter on one scalar: drops the `f` largest values above `own`
/// (all of them when fewer than `f` exist) and likewise below. Values equal to
/// `own` are always kept. Ties at the cut are removed lowest id first.
pub fn wmsr_filter(own: f64, samples: &[(usize, f64)], f: usize) -> FilterOutcome {
    if f == 0 {
        let mut kept: Vec<usize> = samples.iter().map(|s| s.0).collect();
        kept.sort_unstable();
        return FilterOutcome { kept, removed: Vec::new() };
    }
    let mut above: Vec<(usize, f64)> = samples.iter().copied().filter(|s| s.1 > own).collect();
    let mut below: Vec<(usize, f64)> = samples.iter().copied().filter(|s| s.1 < own).collect();
    above.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    below.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let mut removed: Vec<usize> = above
        .iter()
        .take(f)
        .chain(below.iter().take(f))
        .map(|s| s.0)
        .collect();
    let mut kept: Vec<usize> = samples
        .iter()
        .map(|s| s.0)
        .filter(|id| !removed.contains(id))
        .collect();
    removed.sort_unstable();
    kept.sort_unstable();
    FilterOutcome { kept, removed }
}

/// Acceleration command and how many samples were discarded (summed over axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlOutput {
    pub accel: Vec<f64>,
    pub removed: usize,
}

fn filter_value(frame: FilterFrame, position: f64, offset: f64, velocity: f64, gamma_v: f64) -> f64 {
    match frame {
        FilterFrame::Formation => position - offset,
        FilterFrame::Raw => position,
        FilterFrame::Combined => position - offset + gamma_v * velocity,
    }
}

/// Per axis: filter the neighbors, then
/// `u = -kappa (v - v_ref) + sum_kept a_ij [(xi_j - xi_i) + gamma_v (v_j - v_i)]`
/// where `xi = x - h`.
pub fn wmsr_control_detailed(
    own: &AgentState,
    own_offset: &[f64],
    samples: &[NeighborSample],
    gains: &ConsensusGains,
    v_ref: &[f64],
    frame: FilterFrame,
) -> ControlOutput {
    let d = own.dim();
    let mut accel = vec![0.0; d];
    let mut removed_total = 0;
    for a in 0..d {
        let own_value = filter_value(frame, own.position[a], own_offset[a], own.velocity[a], gains.gamma_v);
        let values: Vec<(usize, f64)> = samples
            .iter()
            .map(|s| {
                (
                    s.neighbor_id,
                    filter_value(frame, s.position[a], s.offset[a], s.velocity[a], gains.gamma_v),
                )
            })
            .collect();
        let outcome = wmsr_filter(own_value, &values, gains.f_param);
        removed_total += outcome.removed.len();
        let xi_i = own.position[a] - own_offset[a];
        let mut u = -gains.kappa * (own.velocity[a] - v_ref[a]);
        for s in samples.iter().filter(|s| outcome.kept.binary_search(&s.neighbor_id).is_ok()) {
            let xi_j = s.position[a] - s.offset[a];
            u += s.weight * ((xi_j - xi_i) + gains.gamma_v * (s.velocity[a] - own.velocity[a]));
        }
        accel[a] = u;
    }
    ControlOutput {
        accel,
        removed: removed_total,
    }
}

pub fn wmsr_control(
    own: &AgentState,
    own_offset: &[f64],
    samples: &[NeighborSample],
    gains: &ConsensusGains,
    v_ref: &[f64],
) -> Vec<f64> {
    wmsr_control_detailed(own, own_offset, samples, gains, v_ref, FilterFrame::Formation).accel
}

/// The unfiltered update, identical to W-MSR with `F = 0`.
pub fn linear_consensus_control(
    own: &AgentState,
    own_offset: &[f64],
    samples: &[NeighborSample],
    gains: &ConsensusGains,
    v_ref: &[f64],
) -> Vec<f64> {
    let unfiltered = ConsensusGains { f_param: 0, ..*gains };
    wmsr_control(own, own_offset, samples, &unfiltered, v_ref)
}
