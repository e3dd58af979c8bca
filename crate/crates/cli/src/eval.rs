use std::path::{Path, PathBuf};

use serde::Serialize;
use stems::agent::{evaluate_model, evaluate_rule_based, AgentError, Checkpoint, ShieldCounts};
use stems::graph::build_graph;
use stems::metrics::{episode_metrics, normalize, EpisodeMetrics, NormalizedMetrics, METRIC_NAMES};
use stems::sim::{apply_extreme_weather, ExtremeWeather};

use crate::{write_atomic, CliError, RunConfig};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    /// Model to evaluate; without one the rule-based controller is evaluated.
    pub checkpoint: Option<PathBuf>,
    pub scenario: Option<ExtremeWeather>,
    /// Where the CSV goes; the JSON report is written next to it.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub policy: String,
    pub scenario: String,
    pub metrics: EpisodeMetrics,
    pub baseline: EpisodeMetrics,
    pub normalized: NormalizedMetrics,
    pub shield: ShieldCounts,
    pub mean_return: f64,
    pub csv_path: PathBuf,
}

fn scenario_name(s: Option<ExtremeWeather>) -> &'static str {
    match s {
        None => "nominal",
        Some(ExtremeWeather::HeatWave) => "heat_wave",
        Some(ExtremeWeather::ColdWave) => "cold_wave",
    }
}

impl EvalReport {
    /// Two rows, absolute values and ratios to the baseline. Metrics that
    /// stay absolute after normalization carry the same value in both rows.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["policy", "scenario", "kind"];
        header.extend(METRIC_NAMES);
        w.write_record(&header)?;
        for (kind, m) in [("absolute", &self.metrics), ("normalized", &self.normalized.metrics)] {
            let mut row = vec![self.policy.clone(), self.scenario.clone(), kind.to_string()];
            row.extend(m.values().iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    /// Aligned plain-text table for terminals.
    pub fn to_text(&self) -> String {
        let mut s = format!("policy {}  scenario {}\n", self.policy, self.scenario);
        s.push_str(&format!("{:<24}{:>16}{:>16}{:>12}\n", "metric", "value", "baseline", "ratio"));
        let (m, b, r) = (self.metrics.values(), self.baseline.values(), self.normalized.metrics.values());
        for k in 0..METRIC_NAMES.len() {
            let ratio = if k < 5 && !self.normalized.absolute.iter().any(|a| a == METRIC_NAMES[k]) {
                format!("{:.4}", r[k])
            } else {
                "-".into()
            };
            s.push_str(&format!("{:<24}{:>16.4}{:>16.4}{:>12}\n", METRIC_NAMES[k], m[k], b[k], ratio));
        }
        s.push_str(&format!(
            "shield: {} passed, {} projected, {} emergency\n",
            self.shield.passed, self.shield.projected, self.shield.emergency
        ));
        s
    }
}

/// Deterministic evaluation of a checkpoint (or of the rule-based
/// controller) on the configured scenario, optionally under extreme
/// weather. Ratios are taken against the rule-based controller on the same
/// weather.
pub fn cmd_eval(cfg: &RunConfig, opts: &EvalOptions) -> Result<EvalReport, CliError> {
    cfg.validate()?;
    let mut series = cfg.series()?;
    if let Some(kind) = opts.scenario {
        series = apply_extreme_weather(&series, kind);
    }
    let configs = cfg.building_configs(&series)?;
    let spec = cfg.rollout_spec();

    let base = evaluate_rule_based(&configs, &series, &cfg.baseline, &spec)?;
    let baseline = episode_metrics(&base.log, &spec.metrics).map_err(AgentError::from)?;

    let (policy, ro) = match &opts.checkpoint {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.buildings != configs {
                return Err(CliError::CheckpointMismatch(format!(
                    "{} was trained on different buildings",
                    path.display()
                )));
            }
            let model = ck.model()?;
            let graph = build_graph(&configs, &cfg.graph).map_err(AgentError::from)?;
            ("stems".to_string(), evaluate_model(&model, &graph, &configs, &series, &spec)?)
        }
        None => ("rule_based".to_string(), base.clone()),
    };
    let metrics = episode_metrics(&ro.log, &spec.metrics).map_err(AgentError::from)?;
    let scenario = scenario_name(opts.scenario).to_string();
    let csv_path = opts
        .out
        .clone()
        .unwrap_or_else(|| cfg.out_dir().join(format!("eval_{policy}_{scenario}.csv")));
    let report = EvalReport {
        normalized: normalize(&metrics, &baseline),
        policy,
        scenario,
        metrics,
        baseline,
        shield: ro.shield,
        mean_return: ro.mean_return(),
        csv_path: csv_path.clone(),
    };
    write_atomic(&csv_path, &report.to_csv()?)?;
    write_atomic(&json_path(&csv_path), &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}
