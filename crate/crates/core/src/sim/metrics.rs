//! Run summaries computed from the logged series.

use serde::{Deserialize, Serialize};

use crate::sim::runner::{EstimatorStats, StepRecord};

/// Context the series alone does not carry.
#[derive(Debug, Clone)]
pub struct SeriesMeta<'a> {
    pub name: &'a str,
    pub normal: &'a [bool],
    pub offsets: &'a [[f64; 2]],
    pub adversaries: &'a [usize],
    pub transient_fraction: f64,
    pub lambda_floor: f64,
    /// Claimed x coordinate of a constant-position attacker, if any.
    pub attack_value: Option<f64>,
    pub final_positions: &'a [[f64; 2]],
    pub final_velocities: &'a [[f64; 2]],
    pub final_hull_violations: usize,
    pub estimator: Option<&'a EstimatorStats>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub steps: usize,
    pub n_agents: usize,
    pub adversaries: Vec<usize>,
    /// Max minus min of normal agents' `x - h` per axis at the end.
    pub final_spread: [f64; 2],
    /// Same over all agents, adversaries included (true states).
    pub final_spread_all: [f64; 2],
    pub lambda2_min_after_transient: f64,
    pub lambda2_mean_after_transient: f64,
    pub lambda2_final: f64,
    pub lambda_floor: f64,
    /// Agent-steps in which a normal agent left the initial hull.
    pub hull_violations: usize,
    pub final_mean_velocity: [f64; 2],
    pub final_mean_position: [f64; 2],
    /// `|mean normal x - claimed x|` at the end, for constant-position attacks.
    pub adversary_influence: Option<f64>,
    /// First time `lambda2` exceeded the floor.
    pub first_exceed_time: Option<f64>,
    /// Smallest `lambda2` from that moment on.
    pub min_lambda2_after_exceed: Option<f64>,
    /// Largest per-step change of `lambda2` over the last 10% of the run.
    pub settled_max_dlambda2: f64,
    pub connectivity_phase_steps: usize,
    pub phi_activations: usize,
    pub phi_clamps: usize,
    pub removed_samples: usize,
    pub degenerate_steps: usize,
    pub estimator: Option<EstimatorStats>,
    pub wall_time_s: f64,
}

/// Max minus min of `x - h` per axis over the selected agents.
pub fn spread(positions: &[[f64; 2]], offsets: &[[f64; 2]], include: impl Fn(usize) -> bool) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (axis, slot) in out.iter_mut().enumerate() {
        let vals = positions
            .iter()
            .zip(offsets)
            .enumerate()
            .filter(|(i, _)| include(*i))
            .map(|(_, (p, h))| p[axis] - h[axis]);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        *slot = if hi >= lo { hi - lo } else { 0.0 };
    }
    out
}

fn mean(rows: &[[f64; 2]], include: impl Fn(usize) -> bool) -> [f64; 2] {
    let mut sum = [0.0; 2];
    let mut count = 0usize;
    for (_, r) in rows.iter().enumerate().filter(|(i, _)| include(*i)) {
        sum[0] += r[0];
        sum[1] += r[1];
        count += 1;
    }
    if count == 0 {
        return [0.0; 2];
    }
    [sum[0] / count as f64, sum[1] / count as f64]
}

pub fn compute_metrics(series: &[StepRecord], meta: &SeriesMeta<'_>) -> Summary {
    let is_normal = |i: usize| meta.normal[i];
    let steps = series.len();
    let transient = ((steps as f64) * meta.transient_fraction).floor() as usize;
    let settled: Vec<f64> = series.iter().skip(transient).map(|r| r.lambda2).collect();
    let (min_after, mean_after) = if settled.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            settled.iter().copied().fold(f64::INFINITY, f64::min),
            settled.iter().sum::<f64>() / settled.len() as f64,
        )
    };
    let first_exceed = series.iter().position(|r| r.lambda2 > meta.lambda_floor);
    let tail_start = steps - steps / 10;
    let settled_max_dlambda2 = series[tail_start.saturating_sub(1)..]
        .windows(2)
        .map(|w| (w[1].lambda2 - w[0].lambda2).abs())
        .fold(0.0, f64::max);
    let final_mean_position = mean(meta.final_positions, is_normal);
    Summary {
        name: meta.name.to_string(),
        steps,
        n_agents: meta.normal.len(),
        adversaries: meta.adversaries.to_vec(),
        final_spread: spread(meta.final_positions, meta.offsets, is_normal),
        final_spread_all: spread(meta.final_positions, meta.offsets, |_| true),
        lambda2_min_after_transient: min_after,
        lambda2_mean_after_transient: mean_after,
        lambda2_final: series.last().map_or(f64::NAN, |r| r.lambda2),
        lambda_floor: meta.lambda_floor,
        hull_violations: series.iter().map(|r| r.hull_violations).sum::<usize>() + meta.final_hull_violations,
        final_mean_velocity: mean(meta.final_velocities, is_normal),
        final_mean_position,
        adversary_influence: meta.attack_value.map(|v| (final_mean_position[0] - v).abs()),
        first_exceed_time: first_exceed.map(|k| series[k].t),
        min_lambda2_after_exceed: first_exceed
            .map(|k| series[k..].iter().map(|r| r.lambda2).fold(f64::INFINITY, f64::min)),
        settled_max_dlambda2,
        connectivity_phase_steps: series.iter().filter(|r| r.connectivity_agents > 0).count(),
        phi_activations: series.iter().map(|r| r.phi_active).sum(),
        phi_clamps: series.iter().map(|r| r.phi_clamped).sum(),
        removed_samples: series.iter().map(|r| r.removed).sum(),
        degenerate_steps: series.iter().filter(|r| r.degenerate).count(),
        estimator: meta.estimator.cloned(),
        wall_time_s: meta.wall_time_s,
    }
}
