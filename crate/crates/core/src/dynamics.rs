//! Double-integrator agents and formation offsets.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryBehavior;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Normal,
    Adversary(AdversaryBehavior),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub role: Role,
}

impl AgentState {
    pub fn new(id: usize, position: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self {
            id,
            position,
            velocity,
            role: Role::Normal,
        }
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    pub fn is_adversary(&self) -> bool {
        matches!(self.role, Role::Adversary(_))
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|v| v.is_finite())
    }
}

/// Semi-implicit Euler: `v += u dt`, then `x += v dt`.
pub fn step(state: &AgentState, u: &[f64], dt: f64) -> Result<AgentState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    if u.len() != state.dim() || state.velocity.len() != state.dim() {
        return Err(Error::InvalidParams(format!(
            "input has {} components, state has {}",
            u.len(),
            state.dim()
        )));
    }
    if u.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("control input"));
    }
    let mut next = state.clone();
    for a in 0..state.dim() {
        next.velocity[a] += u[a] * dt;
        next.position[a] += next.velocity[a] * dt;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    pub offsets: Vec<Vec<f64>>,
}

impl FormationSpec {
    /// Offsets are shifted so they sum to zero.
    pub fn centered(mut offsets: Vec<Vec<f64>>) -> Self {
        let n = offsets.len();
        if n > 0 {
            let d = offsets[0].len();
            for a in 0..d {
                let mean = offsets.iter().map(|h| h[a]).sum::<f64>() / n as f64;
                offsets.iter_mut().for_each(|h| h[a] -= mean);
            }
        }
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Regular n-gon: `h_i = radius (cos 2 pi i/n, sin 2 pi i/n)`.
pub fn ngon_formation(n: usize, radius: f64) -> Result<FormationSpec> {
    if n < 3 {
        return Err(Error::InvalidParams(format!("n-gon needs n >= 3, got {n}")));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParams(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let offsets = (0..n)
        .map(|i| {
            let theta = TAU * i as f64 / n as f64;
            vec![radius * theta.cos(), radius * theta.sin()]
        })
        .collect();
    Ok(FormationSpec::centered(offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{algebraic_connectivity, build_comm_graph, laplacian, CommParams};

    fn agent(p: [f64; 2], v: [f64; 2]) -> AgentState {
        AgentState::new(0, p.to_vec(), v.to_vec())
    }

    #[test]
    fn ballistic_step() {
        let s = step(&agent([0.0, 0.0], [0.0, 4.0]), &[0.0, 0.0], 0.05).unwrap();
        assert_eq!(s.velocity, vec![0.0, 4.0]);
        assert!((s.position[1] - 0.2).abs() < 1e-15);
        assert_eq!(s.position[0], 0.0);
    }

    #[test]
    fn one_unit_step() {
        let s = step(&agent([0.0, 0.0], [0.0, 0.0]), &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(s.velocity, vec![1.0, 0.0]);
        assert_eq!(s.position, vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let a = agent([0.0, 0.0], [0.0, 0.0]);
        assert!(matches!(step(&a, &[f64::NAN, 0.0], 0.1), Err(Error::NonFinite(_))));
        assert!(step(&a, &[0.0, 0.0], 0.0).is_err());
        assert!(step(&a, &[0.0], 0.1).is_err());
    }

    fn terminal_error(dt: f64) -> f64 {
        let steps = (1.0 / dt).round() as usize;
        let mut s = agent([0.0, 0.0], [0.0, 0.0]);
        for _ in 0..steps {
            s = step(&s, &[2.0, 0.0], dt).unwrap();
        }
        (s.position[0] - 1.0).abs()
    }

    #[test]
    fn constant_acceleration_error_is_first_order() {
        let coarse = terminal_error(0.01);
        let fine = terminal_error(0.005);
        // Semi-implicit Euler overshoots 0.5 u t^2 by 0.5 u t dt.
        assert!((coarse - 0.01).abs() < 1e-9);
        assert!((fine - 0.005).abs() < 1e-9);
    }

    #[test]
    fn square_formation() {
        let f = ngon_formation(4, 1.0).unwrap();
        let expected = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (h, e) in f.offsets.iter().zip(expected) {
            assert!((h[0] - e[0]).abs() < 1e-12 && (h[1] - e[1]).abs() < 1e-12);
        }
        assert!(ngon_formation(2, 1.0).is_err());
    }

    #[test]
    fn icosagon_is_complete_at_full_strength() {
        let f = ngon_formation(20, 15.0).unwrap();
        let mut widest: f64 = 0.0;
        for a in &f.offsets {
            for b in &f.offsets {
                widest = widest.max(crate::graph::distance(a, b));
            }
        }
        assert!((widest - 30.0).abs() < 1e-9);
        let l2 = algebraic_connectivity(&laplacian(&build_comm_graph(&f.offsets, &CommParams::default()))).lambda2;
        assert!((l2 - 20.0).abs() < 1e-9);
    }
}
