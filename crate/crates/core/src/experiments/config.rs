use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::{EnvError, EnvironmentModel, EnvironmentSpec};
use crate::map::{MapError, MapSpec, MarkovIntervalMap};
use crate::walk::Mode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Classify,
    ZeroOneScan,
    TransienceCheck,
    SymmetricCheck,
    SplitDemo,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Classify => "classify",
            ExperimentKind::ZeroOneScan => "zero_one_scan",
            ExperimentKind::TransienceCheck => "transience_check",
            ExperimentKind::SymmetricCheck => "symmetric_check",
            ExperimentKind::SplitDemo => "split_demo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub n_envs: u64,
    pub n_walks: u64,
    pub horizon: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Symbolic
}

/// Finite-horizon surrogates for the asymptotic labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Walks count as escaped when `|site_N| > divergence_margin · N`.
    pub divergence_margin: f64,
    /// Return fraction needed for `recurrent-like`.
    pub return_goal: f64,
    /// Escaped fraction needed for `transient±`.
    pub transient_fraction: f64,
    /// Largest fraction of walks visiting the start after `N/2` that still
    /// allows `transient±`.
    pub late_return_max: f64,
    /// Both escaped fractions above this give `split`.
    pub split_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            divergence_margin: 1.0 / 6.0,
            return_goal: 0.9,
            transient_fraction: 0.95,
            late_return_max: 0.01,
            split_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub master: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// `hit_before(0, -h, h)` is solved exactly for `split_demo`.
    pub hit_half_width: i64,
    /// Cross-check labels against the exact chain when it applies.
    pub dp_cross_check: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            hit_half_width: 50,
            dp_cross_check: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    /// Directory for the report files; `out/<name>` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// One experiment, as read from a TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: ExperimentKind,
    pub map: MapSpec,
    pub environment: EnvironmentSpec,
    pub budgets: Budgets,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    /// Checks budgets and thresholds and that the map and environment build.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.budgets;
        if b.n_envs == 0 || b.n_walks == 0 || b.horizon == 0 {
            return Err(ConfigError::Invalid("budgets must be positive".into()));
        }
        let t = &self.thresholds;
        if !(t.divergence_margin > 0.0 && t.divergence_margin < 1.0) {
            return Err(ConfigError::Invalid("divergence_margin must lie in (0, 1)".into()));
        }
        for (name, v) in [
            ("return_goal", t.return_goal),
            ("transient_fraction", t.transient_fraction),
            ("late_return_max", t.late_return_max),
            ("split_fraction", t.split_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.checks.hit_half_width < 1 {
            return Err(ConfigError::Invalid("hit_half_width must be positive".into()));
        }
        let (map, env) = self.build()?;
        if env.cells() != map.len() {
            return Err(ConfigError::Invalid(format!(
                "environment functions have {} cells, the map has {}",
                env.cells(),
                map.len()
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<(MarkovIntervalMap, EnvironmentModel), ConfigError> {
        Ok((
            MarkovIntervalMap::from_spec(&self.map)?,
            EnvironmentModel::from_spec(&self.environment)?,
        ))
    }

    /// Escape distance `⌊divergence_margin · N⌋` in sites.
    pub fn margin_sites(&self) -> i64 {
        (self.thresholds.divergence_margin * self.budgets.horizon as f64).floor() as i64
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }
}
