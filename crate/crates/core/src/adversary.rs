//! Misbehaving agents: broadcast fabrication and placement strategies.
//!
//! A malicious agent sends one fabricated state to all of its neighbors.
//! Its physical motion is unaffected by the lie.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::AgentState;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::robustness::NodeSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryBehavior {
    /// Claims a fixed coordinate on `axis`.
    ConstantPosition { axis: usize, value: f64 },
    /// Adds a fixed offset to the true coordinate on `axis`.
    OffsetPosition { axis: usize, offset: f64 },
    /// Adds the running sum of `sin(t)` over past steps to the true
    /// coordinate on `axis`.
    SinusoidOffset { axis: usize },
}

impl AdversaryBehavior {
    pub fn axis(&self) -> usize {
        match *self {
            Self::ConstantPosition { axis, .. }
            | Self::OffsetPosition { axis, .. }
            | Self::SinusoidOffset { axis } => axis,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let axis = self.axis();
        if axis >= dim {
            return Err(Error::InvalidParams(format!(
                "adversary axis {axis} out of range for dimension {dim}"
            )));
        }
        match *self {
            Self::ConstantPosition { value: v, .. } | Self::OffsetPosition { offset: v, .. }
                if !v.is_finite() =>
            {
                Err(Error::NonFinite("adversary behavior"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Broadcast {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl Broadcast {
    pub fn honest(state: &AgentState) -> Self {
        Self {
            position: state.position.clone(),
            velocity: state.velocity.clone(),
        }
    }
}

/// Accumulated sinusoid after `step` updates of `x(k+1) = x(k) + sin(k dt)`,
/// i.e. `sum_{m < step} sin(m dt)`.
pub fn sinusoid_displacement(step: usize, dt: f64) -> f64 {
    let half = 0.5 * dt;
    if half.sin().abs() < 1e-300 {
        return 0.0;
    }
    let k = step as f64;
    (k * half).sin() * ((k - 1.0) * half).sin() / half.sin()
}

/// The single state adversary `state` sends to every neighbor at step `step`
/// (time `step * dt`).
///
/// With `fabricate_velocity`, a constant-position attacker also claims zero
/// velocity on the attacked axis; otherwise true velocities are sent.
pub fn adversary_broadcast(
    behavior: &AdversaryBehavior,
    state: &AgentState,
    step: usize,
    dt: f64,
    fabricate_velocity: bool,
) -> Broadcast {
    let mut b = Broadcast::honest(state);
    match *behavior {
        AdversaryBehavior::ConstantPosition { axis, value } => {
            b.position[axis] = value;
            if fabricate_velocity {
                b.velocity[axis] = 0.0;
            }
        }
        AdversaryBehavior::OffsetPosition { axis, offset } => b.position[axis] += offset,
        AdversaryBehavior::SinusoidOffset { axis } => {
            b.position[axis] += sinusoid_displacement(step, dt);
        }
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlacementStrategy {
    Random { seed: u64 },
    MaxDegree,
    MaxSignalStrength,
}

/// Picks `f` distinct nodes. Ranking strategies break ties by lower id and
/// return the ranking order; the returned set is sorted either way.
pub fn select_adversaries(
    g: &WeightedGraph,
    strategy: PlacementStrategy,
    f: usize,
    threshold: f64,
) -> Result<NodeSet> {
    Ok(NodeSet::new(rank_adversaries(g, strategy, f, threshold)?))
}

/// Like [`select_adversaries`] but keeps the selection order (strongest
/// first for ranking strategies).
pub fn rank_adversaries(
    g: &WeightedGraph,
    strategy: PlacementStrategy,
    f: usize,
    threshold: f64,
) -> Result<Vec<usize>> {
    let n = g.n();
    if f > n {
        return Err(Error::InvalidParams(format!(
            "cannot place {f} adversaries among {n} nodes"
        )));
    }
    let score = |i: usize| match strategy {
        PlacementStrategy::MaxDegree => g.degree(i, threshold) as f64,
        _ => g.weighted_degree(i),
    };
    Ok(match strategy {
        PlacementStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, n, f).into_vec()
        }
        _ => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
            order.truncate(f);
            order
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent() -> AgentState {
        AgentState::new(3, vec![12.0, -4.0], vec![1.5, 2.0])
    }

    fn constant(value: f64, step: usize) -> Broadcast {
        let behavior = AdversaryBehavior::ConstantPosition { axis: 0, value };
        adversary_broadcast(&behavior, &agent(), step, 0.05, true)
    }

    #[test]
    fn constant_position() {
        let b = constant(200.0, 17);
        assert_eq!(b.position, vec![200.0, -4.0]);
        assert_eq!(b.velocity, vec![0.0, 2.0]);
        assert_eq!(constant(200.0, 4000).position[0], 200.0);
        assert_eq!(constant(-83.0, 0).position[0], -83.0);
        assert_eq!(constant(0.0, 0).position[0], 0.0);
    }

    #[test]
    fn true_velocity_option() {
        let b = adversary_broadcast(
            &AdversaryBehavior::ConstantPosition { axis: 0, value: 1.0 },
            &agent(),
            0,
            0.05,
            false,
        );
        assert_eq!(b.velocity, agent().velocity);
    }

    #[test]
    fn zero_offset_is_honest() {
        let b = adversary_broadcast(
            &AdversaryBehavior::OffsetPosition { axis: 0, offset: 0.0 },
            &agent(),
            5,
            0.05,
            true,
        );
        assert_eq!(b, Broadcast::honest(&agent()));
    }

    #[test]
    fn sinusoid_matches_recursion() {
        let dt = 0.05;
        let mut x = 0.0;
        for k in 0..2000 {
            assert!((sinusoid_displacement(k, dt) - x).abs() < 1e-9, "step {k}");
            x += (k as f64 * dt).sin();
        }
        let b = adversary_broadcast(&AdversaryBehavior::SinusoidOffset { axis: 1 }, &agent(), 2, dt, true);
        assert!((b.position[1] - (-4.0 + dt.sin())).abs() < 1e-12);
    }

    #[test]
    fn axis_validation() {
        assert!(AdversaryBehavior::SinusoidOffset { axis: 2 }.validate(2).is_err());
        assert!(AdversaryBehavior::OffsetPosition { axis: 1, offset: f64::NAN }.validate(2).is_err());
        assert!(AdversaryBehavior::OffsetPosition { axis: 1, offset: 3.0 }.validate(2).is_ok());
    }

    #[test]
    fn star_hub_has_max_degree() {
        let g = WeightedGraph::unweighted(5, &[(2, 0), (2, 1), (2, 3), (2, 4)]).unwrap();
        let s = select_adversaries(&g, PlacementStrategy::MaxDegree, 1, 0.01).unwrap();
        assert_eq!(s, NodeSet::new([2]));
        assert!(select_adversaries(&g, PlacementStrategy::MaxDegree, 0, 0.01).unwrap().is_empty());
        assert!(select_adversaries(&g, PlacementStrategy::MaxDegree, 6, 0.01).is_err());
    }

    #[test]
    fn random_placement_is_deterministic_and_distinct() {
        let g = WeightedGraph::unweighted(10, &[]).unwrap();
        let a = rank_adversaries(&g, PlacementStrategy::Random { seed: 9 }, 4, 0.01).unwrap();
        let b = rank_adversaries(&g, PlacementStrategy::Random { seed: 9 }, 4, 0.01).unwrap();
        assert_eq!(a, b);
        assert_eq!(NodeSet::new(a.clone()).len(), 4);
    }
}
