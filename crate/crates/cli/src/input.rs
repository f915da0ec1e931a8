use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use dwde_core::environment::EnvironmentSpec;
use dwde_core::experiments::{preset, preset_names, ScenarioConfig};
use dwde_core::walk::Mode;
use dwde_core::{EnvironmentModel, MapSpec, MarkovIntervalMap};

use crate::Failure;

/// Where the map and environment come from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Scenario config (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Name of a shipped preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// Map spec (TOML with breakpoints, slopes, intercepts); overrides the
    /// config's map.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Environment spec (TOML); overrides the config's environment.
    #[arg(long)]
    pub env: Option<PathBuf>,
}

/// Budget and seed overrides for scenario commands.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    #[arg(long)]
    pub walks: Option<u64>,
    #[arg(long)]
    pub envs: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(config_error)?;
    toml::from_str(&text)
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(config_error)
}

impl Source {
    fn base_config(&self) -> Result<Option<ScenarioConfig>, Failure> {
        if let Some(path) = &self.config {
            return ScenarioConfig::load(path).map(Some).map_err(config_error);
        }
        if let Some(name) = &self.preset {
            let names: Vec<&str> = preset_names().collect();
            return match preset(name) {
                Some(c) => c.map(Some).map_err(config_error),
                None => Err(config_error(anyhow!("unknown preset {name:?}; known: {}", names.join(", ")))),
            };
        }
        Ok(None)
    }

    /// The scenario config with `--map` / `--env` substituted in.
    pub fn scenario(&self) -> Result<ScenarioConfig, Failure> {
        let mut config = self
            .base_config()?
            .ok_or_else(|| config_error(anyhow!("pass --config FILE or --preset NAME")))?;
        if let Some(path) = &self.map {
            config.map = read_toml::<MapSpec>(path)?;
        }
        if let Some(path) = &self.env {
            config.environment = read_toml::<EnvironmentSpec>(path)?;
        }
        config.validate().map_err(config_error)?;
        Ok(config)
    }

    /// Map and environment model, from `--map`/`--env` or a config.
    pub fn build(&self) -> Result<(MarkovIntervalMap, EnvironmentModel), Failure> {
        let base = self.base_config()?;
        let map_spec = match (&self.map, &base) {
            (Some(path), _) => read_toml::<MapSpec>(path)?,
            (None, Some(c)) => c.map.clone(),
            (None, None) => return Err(config_error(anyhow!("pass --map FILE, --config FILE or --preset NAME"))),
        };
        let env_spec = match (&self.env, &base) {
            (Some(path), _) => read_toml::<EnvironmentSpec>(path)?,
            (None, Some(c)) => c.environment.clone(),
            (None, None) => return Err(config_error(anyhow!("pass --env FILE, --config FILE or --preset NAME"))),
        };
        let map = MarkovIntervalMap::from_spec(&map_spec).map_err(config_error)?;
        let model = EnvironmentModel::from_spec(&env_spec).map_err(config_error)?;
        if model.cells() != map.len() {
            return Err(config_error(anyhow!(
                "environment functions have {} cells, the map has {}",
                model.cells(),
                map.len()
            )));
        }
        Ok((map, model))
    }
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) -> Result<(), Failure> {
        let b = &mut config.budgets;
        if let Some(v) = self.walks {
            b.n_walks = v;
        }
        if let Some(v) = self.envs {
            b.n_envs = v;
        }
        if let Some(v) = self.steps {
            b.horizon = v;
        }
        if let Some(v) = self.mode {
            b.mode = v;
        }
        if let Some(v) = self.seed {
            config.seeds.master = v;
        }
        config.validate().map_err(config_error)
    }
}
