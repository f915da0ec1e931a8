use super::config::{ConfigError, ScenarioConfig};

const PRESETS: &[(&str, &str)] = &[
    ("symmetric_doubling", include_str!("../../presets/symmetric_doubling.toml")),
    ("triple_r2", include_str!("../../presets/triple_r2.toml")),
    ("triple_r1", include_str!("../../presets/triple_r1.toml")),
    ("split_demo", include_str!("../../presets/split_demo.toml")),
    ("adversarial", include_str!("../../presets/adversarial.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn preset(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    preset_source(name).map(ScenarioConfig::from_toml_str)
}
