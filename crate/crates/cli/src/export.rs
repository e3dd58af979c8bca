use std::path::PathBuf;

use stems::agent::{rollout, AgentError, Checkpoint, StemsPolicy};
use stems::encoder::{encode_steps, write_attention_csv};
use stems::graph::build_graph;
use stems::sim::Environment;

use crate::{write_atomic, CliError, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    /// Adjacency weights of the building graph.
    Graph,
    /// Per-head temporal attention of a trained model at one step.
    Attention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub kind: ExportKind,
    pub checkpoint: Option<PathBuf>,
    /// Step whose attention is exported; defaults to the last one.
    pub step: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Write the graph weights or an attention snapshot as CSV. The graph comes
/// from the checkpoint's buildings when one is given, otherwise from the
/// configuration.
pub fn cmd_export(cfg: &RunConfig, opts: &ExportOptions) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let series = cfg.series()?;
    let configs = cfg.building_configs(&series)?;
    let ck = opts.checkpoint.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(ck) = &ck {
        if ck.buildings != configs {
            return Err(CliError::CheckpointMismatch("checkpoint was trained on different buildings".into()));
        }
    }
    let graph = build_graph(&configs, &cfg.graph).map_err(AgentError::from)?;
    let default_name = match opts.kind {
        ExportKind::Graph => "graph_weights.csv",
        ExportKind::Attention => "attention.csv",
    };
    let path = opts.out.clone().unwrap_or_else(|| cfg.out_dir().join(default_name));
    let mut buf = Vec::new();
    match opts.kind {
        ExportKind::Graph => graph.write_weights_csv(&mut buf).map_err(AgentError::from)?,
        ExportKind::Attention => {
            let ck = ck.ok_or_else(|| CliError::Config("attention export needs --checkpoint".into()))?;
            attention_csv(&ck, &graph, cfg, series, configs, opts.step, &mut buf)?;
        }
    }
    write_atomic(&path, &buf)?;
    Ok(path)
}

fn attention_csv(
    ck: &Checkpoint,
    graph: &stems::graph::BuildingGraph,
    cfg: &RunConfig,
    series: stems::sim::ExogenousSeries,
    configs: Vec<stems::sim::BuildingConfig>,
    step: Option<usize>,
    buf: &mut Vec<u8>,
) -> Result<(), CliError> {
    let model = ck.model()?;
    let ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
    let mut env = Environment::new(configs, series)?;
    let horizon = env.horizon();
    let t = step.unwrap_or(horizon - 1);
    if t >= horizon {
        return Err(CliError::Config(format!("step {t} is past the {horizon}-step horizon")));
    }
    let mut policy = StemsPolicy::deterministic(&model, graph);
    rollout(&mut env, &mut policy, &cfg.rollout_spec())?;
    let table = policy.into_table();
    let (_, cache) = encode_steps(&model.encoder, graph, &table, &[t]).map_err(AgentError::from)?;
    let weights: Vec<Vec<Vec<f64>>> = (0..ids.len())
        .map(|i| {
            (0..model.encoder.config.heads).map(|h| cache.attention(cache.query_index(0, i), h).to_vec()).collect()
        })
        .collect();
    write_attention_csv(buf, &ids, &weights).map_err(AgentError::from)?;
    Ok(())
}
