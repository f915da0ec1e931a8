//! Fixtures shared by the benchmarks.

use dwde_core::experiments::{preset, ScenarioConfig};
use dwde_core::{EnvironmentModel, MarkovIntervalMap};

pub fn scenario(name: &str) -> ScenarioConfig {
    preset(name).expect("known preset").expect("presets parse")
}

pub fn preset_parts(name: &str) -> (MarkovIntervalMap, EnvironmentModel) {
    scenario(name).build().expect("presets build")
}
