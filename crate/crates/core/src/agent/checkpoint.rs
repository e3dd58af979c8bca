use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::train::{EpisodeRecord, Model, TrainConfig, TrainSetup, Trainer};
use super::AgentError;
use crate::features::FeatureStats;
use crate::nn::{NamedTensor, Optimizer, Params};
use crate::sim::BuildingConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint does not fit this run: {0}")]
    Mismatch(String),
}

/// Optimizer state keyed by the parameter set it drives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub name: String,
    pub optimizer: Optimizer,
}

/// A complete, resumable snapshot of a training run.
///
/// Tensors are flat `f64` lists named `encoder.*`, `actor{i}.*` and
/// `critic{i}.*`. JSON numbers are written in shortest round-trip form, so
/// loading reproduces every parameter bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Episodes completed when the snapshot was taken.
    pub episode: usize,
    pub train: TrainConfig,
    pub buildings: Vec<BuildingConfig>,
    /// Configurations after weather derating; they fix the actors' action boxes.
    pub effective_buildings: Vec<BuildingConfig>,
    pub stats: FeatureStats,
    pub tensors: Vec<NamedTensor>,
    pub optimizers: Vec<OptimizerState>,
    pub history: Vec<EpisodeRecord>,
}

fn model_tensors(model: &Model) -> Vec<NamedTensor> {
    let mut out = model.encoder.to_named("encoder.");
    for (i, a) in model.actors.iter().enumerate() {
        out.extend(a.to_named(&format!("actor{i}.")));
    }
    for (i, c) in model.critics.iter().enumerate() {
        out.extend(c.to_named(&format!("critic{i}.")));
    }
    out
}

impl Checkpoint {
    pub fn from_trainer(tr: &Trainer) -> Self {
        let mut optimizers = vec![OptimizerState { name: "encoder".into(), optimizer: tr.opt_encoder.clone() }];
        for (i, o) in tr.opt_actors.iter().enumerate() {
            optimizers.push(OptimizerState { name: format!("actor{i}"), optimizer: o.clone() });
        }
        for (i, o) in tr.opt_critics.iter().enumerate() {
            optimizers.push(OptimizerState { name: format!("critic{i}"), optimizer: o.clone() });
        }
        Checkpoint {
            version: CHECKPOINT_VERSION,
            episode: tr.episode,
            train: tr.cfg.clone(),
            buildings: tr.setup.configs.clone(),
            effective_buildings: tr.effective_configs().to_vec(),
            stats: tr.model.stats.clone(),
            tensors: model_tensors(&tr.model),
            optimizers,
            history: tr.history.clone(),
        }
    }

    /// Rebuild the model. Shapes come from the stored configuration and
    /// every tensor must be present.
    pub fn model(&self) -> Result<Model, CheckpointError> {
        let mut model = Model::new(&self.train, &self.effective_buildings, self.stats.clone());
        model.encoder.load_named(&self.tensors, "encoder.").map_err(CheckpointError::Mismatch)?;
        for (i, a) in model.actors.iter_mut().enumerate() {
            a.load_named(&self.tensors, &format!("actor{i}.")).map_err(CheckpointError::Mismatch)?;
        }
        for (i, c) in model.critics.iter_mut().enumerate() {
            c.load_named(&self.tensors, &format!("critic{i}.")).map_err(CheckpointError::Mismatch)?;
        }
        Ok(model)
    }

    fn optimizer(&self, name: &str) -> Result<Optimizer, CheckpointError> {
        self.optimizers
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.optimizer.clone())
            .ok_or_else(|| CheckpointError::Mismatch(format!("missing optimizer state {name}")))
    }

    /// A trainer that continues exactly where the snapshot left off.
    /// `episodes` may raise the episode budget; everything else comes from
    /// the snapshot. Noise and learning-rate schedules are functions of the
    /// budget, so a raised budget stretches them from the next episode on.
    pub fn resume(&self, setup: TrainSetup, episodes: Option<usize>) -> Result<Trainer, AgentError> {
        if setup.configs != self.buildings {
            return Err(CheckpointError::Mismatch("building configurations differ".into()).into());
        }
        let mut cfg = self.train.clone();
        if let Some(e) = episodes {
            cfg.episodes = e;
        }
        let model = self.model()?;
        let mut tr = Trainer::with_model(cfg, setup, model)?;
        tr.opt_encoder = self.optimizer("encoder")?;
        for i in 0..tr.opt_actors.len() {
            tr.opt_actors[i] = self.optimizer(&format!("actor{i}"))?;
            tr.opt_critics[i] = self.optimizer(&format!("critic{i}"))?;
        }
        tr.episode = self.episode;
        tr.history = self.history.clone();
        Ok(tr)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), CheckpointError> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_reader(reader)?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version { found });
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
