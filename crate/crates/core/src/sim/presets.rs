//! Bundled scenarios.

use crate::error::{Error, Result};
use crate::sim::config::ScenarioConfig;

const PRESETS: [(&str, &str); 5] = [
    ("nominal-20", include_str!("../../presets/nominal-20.json")),
    ("linear-attack-200", include_str!("../../presets/linear-attack-200.json")),
    ("wmsr-const", include_str!("../../presets/wmsr-const.json")),
    ("wmsr-offset", include_str!("../../presets/wmsr-offset.json")),
    ("wmsr-sinusoid", include_str!("../../presets/wmsr-sinusoid.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

/// The raw JSON of a bundled scenario.
pub fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json_str(preset_source(name)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::ControllerKind;

    #[test]
    fn every_preset_parses_under_its_name() {
        for name in preset_names() {
            let c = preset(name).unwrap();
            assert_eq!(c.name, name);
            assert_eq!((c.n_agents, c.steps, c.dt), (20, 5000, 0.05));
        }
    }

    #[test]
    fn attack_presets_use_two_adversaries() {
        for name in ["linear-attack-200", "wmsr-const", "wmsr-offset", "wmsr-sinusoid"] {
            let c = preset(name).unwrap();
            assert_eq!(c.f, 2);
            assert_eq!(c.adversaries.behaviors.len(), 2);
        }
        assert_eq!(preset("linear-attack-200").unwrap().controller, ControllerKind::Linear);
        assert!(preset("nominal-20").unwrap().adversaries.behaviors.is_empty());
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }
}
