use std::fs;

use swarm_core::sim::{preset, preset_names, run_scenario, write_outputs, ControllerKind, EstimatorMode, ScenarioConfig};
use swarm_core::Error;

fn short(name: &str, steps: usize) -> ScenarioConfig {
    let mut c = preset(name).unwrap();
    c.steps = steps;
    c
}

#[test]
fn config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    for name in preset_names() {
        let c = preset(name).unwrap();
        let path = dir.path().join(format!("{name}.json"));
        fs::write(&path, c.to_json_string()).unwrap();
        assert_eq!(ScenarioConfig::load(&path).unwrap(), c);
    }
}

#[test]
fn empty_file_names_every_required_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    fs::write(&path, "").unwrap();
    let msg = ScenarioConfig::load(&path).unwrap_err().to_string();
    for field in ["name", "n_agents", "controller", "steps", "dt", "seed"] {
        assert!(msg.contains(field), "{field} missing from {msg}");
    }
}

#[test]
fn invalid_config_lists_all_problems() {
    let text = r#"{"name": "x", "n_agents": 3, "controller": "wmsr", "steps": 0, "dt": -1.0, "seed": 1, "f": 9, "colour": 1}"#;
    let Err(Error::Config(problems)) = ScenarioConfig::from_json_str(text) else {
        panic!("expected a config error");
    };
    assert!(problems.iter().any(|p| p.contains("colour")), "{problems:?}");
    let text = r#"{"name": "x", "n_agents": 3, "controller": "wmsr", "steps": 0, "dt": -1.0, "seed": 1, "f": 9}"#;
    let Err(Error::Config(problems)) = ScenarioConfig::from_json_str(text) else {
        panic!("expected a config error");
    };
    assert!(problems.len() >= 3, "{problems:?}");
}

#[test]
fn outputs_have_the_documented_layout() {
    let c = short("wmsr-const", 40);
    let r = run_scenario(&c).unwrap();
    assert_eq!(r.series.len(), 40);
    assert!(r.series.iter().all(|s| s.lambda2 >= 0.0));
    let dir = tempfile::tempdir().unwrap();
    let paths = write_outputs(&r, dir.path().join("nested/out")).unwrap();
    let csv = fs::read_to_string(&paths.timeseries).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,agent,x,y,vx,vy,lambda2,lambda2_hat"));
    assert_eq!(lines.count(), 40 * 20);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths.summary).unwrap()).unwrap();
    assert_eq!(summary["steps"], 40);
    assert_eq!(summary["adversaries"].as_array().unwrap().len(), 2);
    assert_eq!(ScenarioConfig::load(&paths.config_echo).unwrap(), c);
}

#[test]
fn seed_changes_the_run_and_equal_seeds_repeat_it() {
    let a = short("nominal-20", 30);
    let mut b = a.clone();
    b.seed += 1;
    let ra = run_scenario(&a).unwrap();
    assert_eq!(ra.series, run_scenario(&a).unwrap().series);
    assert_ne!(ra.series[0].positions, run_scenario(&b).unwrap().series[0].positions);
}

#[test]
fn distributed_estimator_reports_an_estimate() {
    let mut c = short("wmsr-const", 120);
    c.estimator.mode = EstimatorMode::Distributed;
    let r = run_scenario(&c).unwrap();
    let stats = r.summary.estimator.as_ref().unwrap();
    assert!(stats.releases > 0);
    let last = r.series.last().unwrap();
    let hat = last.lambda2_hat.unwrap();
    assert!(hat <= last.lambda2 + 1e-6 && hat > 0.5 * last.lambda2, "{hat} vs {}", last.lambda2);
}

#[test]
fn linear_controller_ignores_the_filter() {
    let mut c = short("linear-attack-200", 50);
    assert_eq!(c.controller, ControllerKind::Linear);
    let r = run_scenario(&c).unwrap();
    assert_eq!(r.summary.removed_samples, 0);
    c.controller = ControllerKind::Wmsr;
    assert!(run_scenario(&c).unwrap().summary.removed_samples > 0);
}
