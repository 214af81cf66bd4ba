//! Scenario configuration: JSON schema, defaults and validation.
//!
//! Required keys: `name`, `n_agents`, `controller`, `steps`, `dt`, `seed`.
//! Every other key has a default. Unknown keys are rejected, and every
//! problem found is reported at once.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::adversary::{AdversaryBehavior, PlacementStrategy};
use crate::consensus::{ConsensusGains, FilterFrame};
use crate::control::ConnectivityControlParams;
use crate::error::{Error, Result};
use crate::graph::{CommParams, DEFAULT_EDGE_THRESHOLD};
use crate::spectral::PowerIterationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Linear,
    Wmsr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Centralized eigendecomposition every step.
    #[default]
    Exact,
    /// The distributed protocol, run in epochs on graph snapshots.
    Distributed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainsConfig {
    pub kappa: f64,
    pub gamma_v: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        let g = ConsensusGains::default();
        Self {
            kappa: g.kappa,
            gamma_v: g.gamma_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversaryConfig {
    pub placement: PlacementStrategy,
    /// One entry per adversary, assigned in placement order.
    pub behaviors: Vec<AdversaryBehavior>,
    /// Constant-position attackers also claim zero velocity on their axis.
    pub fabricate_velocity: bool,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            placement: PlacementStrategy::MaxSignalStrength,
            behaviors: Vec::new(),
            fabricate_velocity: true,
        }
    }
}

/// Constant-speed reference velocity whose heading sweeps linearly from
/// `initial_heading_deg` by `turn_deg` over `[turn_start, turn_start + turn_duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VRefSchedule {
    pub speed: f64,
    pub initial_heading_deg: f64,
    pub turn_start: f64,
    pub turn_duration: f64,
    pub turn_deg: f64,
}

impl Default for VRefSchedule {
    fn default() -> Self {
        Self {
            speed: 4.0,
            initial_heading_deg: -90.0,
            turn_start: 20.0,
            turn_duration: 60.0,
            turn_deg: 180.0,
        }
    }
}

impl VRefSchedule {
    pub fn heading_deg(&self, t: f64) -> f64 {
        let progress = if self.turn_duration > 0.0 {
            ((t - self.turn_start) / self.turn_duration).clamp(0.0, 1.0)
        } else if t >= self.turn_start {
            1.0
        } else {
            0.0
        };
        self.initial_heading_deg + self.turn_deg * progress
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        let h = self.heading_deg(t).to_radians();
        [self.speed * h.cos(), self.speed * h.sin()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectivityConfig {
    pub enabled: bool,
    /// Defaults to `4 F`.
    pub lambda_floor: Option<f64>,
    pub phi_max: f64,
    pub grad_epsilon: f64,
    pub k_c: f64,
    pub c_d: f64,
}

impl Default for ConnectivityConfig {
    fn default() -> Self {
        let p = ConnectivityControlParams::default();
        Self {
            enabled: true,
            lambda_floor: None,
            phi_max: p.phi_max,
            grad_epsilon: p.grad_epsilon,
            k_c: p.k_c,
            c_d: p.c_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    pub power: PowerIterationParams,
    /// Message rounds the network completes per simulation step.
    pub rounds_per_step: usize,
    /// Use the distributed Fiedler estimate in the gradient.
    pub use_estimated_fiedler: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Exact,
            power: PowerIterationParams::default(),
            rounds_per_step: 50,
            use_estimated_fiedler: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_agents: usize,
    pub controller: ControllerKind,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// W-MSR parameter F.
    pub f: usize,
    pub formation_radius: f64,
    pub comm: CommParams,
    pub gains: GainsConfig,
    pub filter_frame: FilterFrame,
    pub adversaries: AdversaryConfig,
    pub v_ref: VRefSchedule,
    pub connectivity: ConnectivityConfig,
    pub estimator: EstimatorConfig,
    /// Side of the square initial agents are placed in (m).
    pub placement_side: f64,
    pub edge_threshold: f64,
    /// Leading fraction of steps excluded from lambda2 metrics.
    pub transient_fraction: f64,
    pub hull_tolerance: f64,
    pub output_dir: Option<String>,
    pub description: Option<String>,
}

const REQUIRED: [&str; 6] = ["name", "n_agents", "controller", "steps", "dt", "seed"];
const OPTIONAL: [&str; 15] = [
    "f",
    "formation_radius",
    "comm",
    "gains",
    "filter_frame",
    "adversaries",
    "v_ref",
    "connectivity",
    "estimator",
    "placement_side",
    "edge_threshold",
    "transient_fraction",
    "hull_tolerance",
    "output_dir",
    "description",
];

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    errors: Vec<String>,
}

impl Fields<'_> {
    fn get<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        let v = self.obj.get(key)?;
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                self.errors.push(format!("{key}: {e}"));
                None
            }
        }
    }

    fn required<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        if !self.obj.contains_key(key) {
            self.errors.push(format!("missing required field '{key}'"));
            return None;
        }
        self.get(key)
    }

    fn or<T: DeserializeOwned>(&mut self, key: &str, default: T) -> T {
        self.get(key).unwrap_or(default)
    }
}

impl ScenarioConfig {
    /// Defaults for everything but the required fields.
    pub fn new(name: impl Into<String>, n_agents: usize, controller: ControllerKind, steps: usize, dt: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            n_agents,
            controller,
            steps,
            dt,
            seed,
            f: 0,
            formation_radius: 15.0,
            comm: CommParams::default(),
            gains: GainsConfig::default(),
            filter_frame: FilterFrame::default(),
            adversaries: AdversaryConfig::default(),
            v_ref: VRefSchedule::default(),
            connectivity: ConnectivityConfig::default(),
            estimator: EstimatorConfig::default(),
            placement_side: 60.0,
            edge_threshold: DEFAULT_EDGE_THRESHOLD,
            transient_fraction: 0.2,
            hull_tolerance: 1e-6,
            output_dir: None,
            description: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config(
                REQUIRED
                    .iter()
                    .map(|k| format!("missing required field '{k}'"))
                    .collect(),
            ));
        }
        let value: Value = serde_json::from_str(text)?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let Some(obj) = value.as_object() else {
            return Err(Error::Config(vec!["configuration must be a JSON object".into()]));
        };
        let mut fields = Fields { obj, errors: Vec::new() };
        for key in obj.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                fields.errors.push(format!("unknown field '{key}'"));
            }
        }
        let name = fields.required::<String>("name");
        let n_agents = fields.required::<usize>("n_agents");
        let controller = fields.required::<ControllerKind>("controller");
        let steps = fields.required::<usize>("steps");
        let dt = fields.required::<f64>("dt");
        let seed = fields.required::<u64>("seed");
        let base = Self::new("", 0, ControllerKind::Linear, 0, 0.0, 0);
        let rest = Self {
            f: fields.or("f", base.f),
            formation_radius: fields.or("formation_radius", base.formation_radius),
            comm: fields.or("comm", base.comm),
            gains: fields.or("gains", base.gains),
            filter_frame: fields.or("filter_frame", base.filter_frame),
            adversaries: fields.or("adversaries", base.adversaries.clone()),
            v_ref: fields.or("v_ref", base.v_ref),
            connectivity: fields.or("connectivity", base.connectivity),
            estimator: fields.or("estimator", base.estimator),
            placement_side: fields.or("placement_side", base.placement_side),
            edge_threshold: fields.or("edge_threshold", base.edge_threshold),
            transient_fraction: fields.or("transient_fraction", base.transient_fraction),
            hull_tolerance: fields.or("hull_tolerance", base.hull_tolerance),
            output_dir: fields.or("output_dir", None),
            description: fields.or("description", None),
            ..base
        };
        let mut errors = fields.errors;
        let (Some(name), Some(n_agents), Some(controller), Some(steps), Some(dt), Some(seed)) =
            (name, n_agents, controller, steps, dt, seed)
        else {
            return Err(Error::Config(errors));
        };
        let config = Self {
            name,
            n_agents,
            controller,
            steps,
            dt,
            seed,
            ..rest
        };
        errors.extend(config.violations());
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Semantic checks beyond the schema.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push("name must not be empty".into());
        }
        if self.n_agents < 3 {
            out.push(format!("n_agents must be at least 3, got {}", self.n_agents));
        }
        if self.steps < 1 {
            out.push("steps must be at least 1".into());
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        if self.f > self.n_agents {
            out.push(format!("f ({}) exceeds n_agents ({})", self.f, self.n_agents));
        }
        if self.adversaries.behaviors.len() > self.n_agents {
            out.push(format!(
                "{} adversary behaviors for {} agents",
                self.adversaries.behaviors.len(),
                self.n_agents
            ));
        }
        for (k, b) in self.adversaries.behaviors.iter().enumerate() {
            if let Err(e) = b.validate(2) {
                out.push(format!("adversaries.behaviors[{k}]: {e}"));
            }
        }
        if !(self.formation_radius.is_finite() && self.formation_radius > 0.0) {
            out.push(format!("formation_radius must be positive, got {}", self.formation_radius));
        }
        out.extend(self.comm.violations().into_iter().map(|e| format!("comm: {e}")));
        out.extend(
            self.consensus_gains()
                .violations()
                .into_iter()
                .map(|e| format!("gains: {e}")),
        );
        out.extend(
            self.connectivity_params()
                .violations()
                .into_iter()
                .map(|e| format!("connectivity: {e}")),
        );
        out.extend(
            self.estimator
                .power
                .violations()
                .into_iter()
                .map(|e| format!("estimator.power: {e}")),
        );
        if self.estimator.rounds_per_step == 0 {
            out.push("estimator.rounds_per_step must be at least 1".into());
        }
        let s = self.v_ref;
        for (name, v) in [
            ("speed", s.speed),
            ("initial_heading_deg", s.initial_heading_deg),
            ("turn_start", s.turn_start),
            ("turn_deg", s.turn_deg),
        ] {
            if !v.is_finite() {
                out.push(format!("v_ref.{name} must be finite"));
            }
        }
        if !(s.turn_duration.is_finite() && s.turn_duration >= 0.0) {
            out.push("v_ref.turn_duration must be non-negative".into());
        }
        if !(self.placement_side.is_finite() && self.placement_side > 0.0) {
            out.push(format!("placement_side must be positive, got {}", self.placement_side));
        }
        if !(self.edge_threshold.is_finite() && self.edge_threshold > 0.0 && self.edge_threshold <= 1.0) {
            out.push(format!("edge_threshold must be in (0, 1], got {}", self.edge_threshold));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            out.push(format!("transient_fraction must be in [0, 1), got {}", self.transient_fraction));
        }
        if !(self.hull_tolerance.is_finite() && self.hull_tolerance >= 0.0) {
            out.push(format!("hull_tolerance must be non-negative, got {}", self.hull_tolerance));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    pub fn consensus_gains(&self) -> ConsensusGains {
        let f_param = match self.controller {
            ControllerKind::Linear => 0,
            ControllerKind::Wmsr => self.f,
        };
        ConsensusGains {
            kappa: self.gains.kappa,
            gamma_v: self.gains.gamma_v,
            f_param,
        }
    }

    pub fn connectivity_params(&self) -> ConnectivityControlParams {
        let c = self.connectivity;
        ConnectivityControlParams {
            lambda_floor: c.lambda_floor.unwrap_or(4.0 * self.f as f64),
            phi_max: c.phi_max,
            grad_epsilon: c.grad_epsilon,
            k_c: c.k_c,
            c_d: c.c_d,
        }
    }
}

impl<'de> Deserialize<'de> for ScenarioConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        ScenarioConfig::from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"name": "t", "n_agents": 5, "controller": "wmsr", "steps": 10, "dt": 0.05, "seed": 1}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ScenarioConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c, ScenarioConfig::new("t", 5, ControllerKind::Wmsr, 10, 0.05, 1));
    }

    #[test]
    fn empty_file_names_every_required_field() {
        let Error::Config(errors) = ScenarioConfig::from_json_str("").unwrap_err() else {
            panic!("expected config error");
        };
        for key in REQUIRED {
            assert!(errors.iter().any(|e| e.contains(key)), "{key} not in {errors:?}");
        }
    }

    #[test]
    fn errors_are_exhaustive() {
        let text = r#"{"name": "t", "n_agents": 5, "controller": "pid", "steps": 0, "dt": -1, "seed": 1,
                       "bogus": 3, "comm": {"rho": 50, "big_r": 20}, "f": 9}"#;
        let Error::Config(errors) = ScenarioConfig::from_json_str(text).unwrap_err() else {
            panic!("expected config error");
        };
        assert!(errors.iter().any(|e| e.contains("bogus")));
        assert!(errors.iter().any(|e| e.starts_with("controller")));
        assert_eq!(errors.len(), 2, "schema errors stop before semantic checks: {errors:?}");

        let text = r#"{"name": "t", "n_agents": 5, "controller": "linear", "steps": 0, "dt": -1, "seed": 1,
                       "comm": {"rho": 50, "big_r": 20}, "f": 9}"#;
        let Error::Config(errors) = ScenarioConfig::from_json_str(text).unwrap_err() else {
            panic!("expected config error");
        };
        for needle in ["steps", "dt", "f (9)", "comm:"] {
            assert!(errors.iter().any(|e| e.contains(needle)), "{needle} not in {errors:?}");
        }
    }

    #[test]
    fn partial_nested_objects_use_defaults() {
        let text = r#"{"name": "t", "n_agents": 5, "controller": "wmsr", "steps": 10, "dt": 0.05, "seed": 1,
                       "comm": {"rho": 30}, "estimator": {"mode": "distributed"}}"#;
        let c = ScenarioConfig::from_json_str(text).unwrap();
        assert_eq!(c.comm.rho, 30.0);
        assert_eq!(c.comm.big_r, 120.0);
        assert_eq!(c.estimator.mode, EstimatorMode::Distributed);
        assert_eq!(c.estimator.power.k_max, 500);
    }

    #[test]
    fn round_trip() {
        let mut c = ScenarioConfig::new("rt", 7, ControllerKind::Wmsr, 3, 0.1, 99);
        c.f = 1;
        c.adversaries.behaviors = vec![AdversaryBehavior::SinusoidOffset { axis: 0 }];
        c.connectivity.lambda_floor = Some(2.5);
        c.output_dir = Some("out".into());
        assert_eq!(ScenarioConfig::from_json_str(&c.to_json_string()).unwrap(), c);
    }

    #[test]
    fn reference_velocity_schedule() {
        let s = VRefSchedule::default();
        let v0 = s.at(0.0);
        assert!(v0[0].abs() < 1e-12 && (v0[1] + 4.0).abs() < 1e-12);
        let mid = s.at(50.0);
        assert!((mid[0] - 4.0).abs() < 1e-12 && mid[1].abs() < 1e-12);
        let end = s.at(200.0);
        assert!(end[0].abs() < 1e-12 && (end[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn floor_defaults_to_four_f() {
        let mut c = ScenarioConfig::new("t", 20, ControllerKind::Wmsr, 1, 0.05, 0);
        c.f = 2;
        assert_eq!(c.connectivity_params().lambda_floor, 8.0);
        assert_eq!(c.consensus_gains().f_param, 2);
        c.controller = ControllerKind::Linear;
        assert_eq!(c.consensus_gains().f_param, 0);
    }
}
