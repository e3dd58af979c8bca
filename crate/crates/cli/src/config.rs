use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stems::agent::{RolloutSpec, TrainConfig, TrainSetup};
use stems::graph::GraphParams;
use stems::metrics::{MetricsSpec, RewardWeights, RuleSchedule};
use stems::shield::SafetySpec;
use stems::sim::{
    generate_scenario, load_timeseries_csv, scenario_buildings, BuildingConfig, BuildingType, ExogenousSeries,
    ScenarioSpec,
};

use crate::CliError;

/// Environment variable consulted for the output directory when neither a
/// flag nor the config file sets one.
pub const OUT_DIR_ENV: &str = "STEMS_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "stems-out";

fn default_scenario() -> ScenarioSpec {
    use BuildingType::*;
    ScenarioSpec::new(vec![Residential, Commercial, Mixed, Residential, Mixed], 720)
}

/// Everything one invocation needs, read from a TOML file. Missing fields
/// take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Training seeds; each gets its own run directory.
    pub seeds: Vec<u64>,
    /// Seed of the synthetic scenario and of the building placement.
    pub scenario_seed: u64,
    /// Side of the square (km) the generated buildings are placed in.
    pub extent_km: f64,
    /// Exogenous series from a CSV file instead of the generator.
    pub data_csv: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Episodes between checkpoints during training.
    pub checkpoint_every: usize,
    pub scenario: ScenarioSpec,
    /// Explicit building list; generated from `scenario` when absent.
    pub buildings: Option<Vec<BuildingConfig>>,
    pub graph: GraphParams,
    pub safety: SafetySpec,
    pub rewards: RewardWeights,
    pub metrics: MetricsSpec,
    pub baseline: RuleSchedule,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seeds: vec![0, 1, 2, 3, 4],
            scenario_seed: 0,
            extent_km: 2.0,
            data_csv: None,
            output_dir: None,
            checkpoint_every: 10,
            scenario: default_scenario(),
            buildings: None,
            graph: GraphParams::default(),
            safety: SafetySpec::default(),
            rewards: RewardWeights::default(),
            metrics: MetricsSpec::default(),
            baseline: RuleSchedule::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub episodes: Option<usize>,
    pub horizon: Option<i64>,
    pub scenario_seed: Option<u64>,
    pub data_csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Apply flags on top of the file. Precedence is flag, then file, then
    /// default.
    pub fn with_overrides(mut self, o: &Overrides) -> Self {
        if let Some(d) = &o.output_dir {
            self.output_dir = Some(d.clone());
        }
        if let Some(s) = &o.seeds {
            self.seeds = s.clone();
        }
        if let Some(e) = o.episodes {
            self.train.episodes = e;
        }
        if let Some(h) = o.horizon {
            self.scenario.horizon = h;
        }
        if let Some(s) = o.scenario_seed {
            self.scenario_seed = s;
        }
        if let Some(p) = &o.data_csv {
            self.data_csv = Some(p.clone());
        }
        self
    }

    /// Output directory: flag or file, then `STEMS_OUT_DIR`, then a fixed default.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(DEFAULT_OUT_DIR),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.data_csv.is_none() && self.scenario.horizon <= 0 {
            return bad(format!("scenario.horizon must be positive, got {}", self.scenario.horizon));
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        if !(self.extent_km > 0.0) {
            return bad(format!("extent_km must be positive, got {}", self.extent_km));
        }
        self.safety.validate().map_err(CliError::Config)?;
        self.rewards.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.graph.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.train.validate().map_err(CliError::Config)?;
        if let Some(b) = &self.buildings {
            for c in b {
                c.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn series(&self) -> Result<ExogenousSeries, CliError> {
        match &self.data_csv {
            Some(p) => Ok(load_timeseries_csv(p)?),
            None => generate_scenario(&self.scenario, self.scenario_seed).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    pub fn building_configs(&self, series: &ExogenousSeries) -> Result<Vec<BuildingConfig>, CliError> {
        let configs = match &self.buildings {
            Some(b) => b.clone(),
            None => scenario_buildings(&self.scenario, self.extent_km, self.scenario_seed),
        };
        if configs.len() != series.n_buildings() {
            return Err(CliError::Config(format!(
                "{} building configurations for {} series columns",
                configs.len(),
                series.n_buildings()
            )));
        }
        Ok(configs)
    }

    pub fn rollout_spec(&self) -> RolloutSpec {
        RolloutSpec { shielded: true, safety: self.safety, rewards: self.rewards, metrics: self.metrics }
    }

    /// Validated configuration turned into a training problem.
    pub fn setup(&self) -> Result<TrainSetup, CliError> {
        self.validate()?;
        let series = self.series()?;
        let configs = self.building_configs(&series)?;
        Ok(TrainSetup {
            configs,
            series,
            graph: self.graph.clone(),
            rollout: self.rollout_spec(),
            baseline: self.baseline,
        })
    }
}
