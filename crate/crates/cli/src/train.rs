use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use stems::agent::{evaluate_model, evaluate_rule_based, Checkpoint, EpisodeRecord, TrainSetup, Trainer};
use stems::metrics::{episode_metrics, normalize, EpisodeMetrics, NormalizedMetrics, METRIC_NAMES};

use crate::{write_atomic, CliError, RunConfig};

pub const LOG_FILE: &str = "train_log.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    /// Continue from `seed_<s>/checkpoint.json` where one exists.
    pub resume: bool,
    /// Seeds trained concurrently.
    pub jobs: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { resume: false, jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub history: Vec<EpisodeRecord>,
    /// Deterministic evaluation of the final model.
    pub metrics: EpisodeMetrics,
    pub normalized: NormalizedMetrics,
    pub first10_return: f64,
    pub last10_return: f64,
}

/// Mean and sample standard deviation of one metric over seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub baseline: EpisodeMetrics,
    pub seeds: Vec<SeedOutcome>,
    pub aggregate: Vec<AggregateRow>,
}

fn window_mean(history: &[EpisodeRecord], first: bool) -> f64 {
    let k = history.len().min(10);
    if k == 0 {
        return f64::NAN;
    }
    let w = if first { &history[..k] } else { &history[history.len() - k..] };
    w.iter().map(|r| r.mean_return).sum::<f64>() / k as f64
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn write_log(path: &Path, history: &[EpisodeRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn append_timing(path: &Path, episode: usize, seconds: f64) -> Result<(), CliError> {
    use std::io::Write;
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "episode,seconds")?;
    }
    writeln!(f, "{episode},{seconds}")?;
    Ok(())
}

fn save_checkpoint(tr: &Trainer, dir: &Path) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    Checkpoint::from_trainer(tr).write(&mut bytes)?;
    write_atomic(&dir.join(CHECKPOINT_FILE), &bytes)?;
    write_log(&dir.join(LOG_FILE), &tr.history)
}

fn start_trainer(cfg: &RunConfig, setup: TrainSetup, seed: u64, dir: &Path, resume: bool) -> Result<Trainer, CliError> {
    let mut train = cfg.train.clone();
    train.seed = seed;
    let path = dir.join(CHECKPOINT_FILE);
    if resume && path.exists() {
        let ck = Checkpoint::load(&path)?;
        let mut stored = ck.train.clone();
        stored.episodes = train.episodes;
        if stored != train {
            return Err(CliError::CheckpointMismatch(format!(
                "{} was written with a different training configuration",
                path.display()
            )));
        }
        if ck.episode > train.episodes {
            return Err(CliError::CheckpointMismatch(format!(
                "{} already holds {} episodes, more than the {} requested",
                path.display(),
                ck.episode,
                train.episodes
            )));
        }
        log::info!("seed {seed}: resuming after episode {}", ck.episode);
        return Ok(ck.resume(setup, Some(train.episodes))?);
    }
    if resume {
        log::warn!("seed {seed}: no checkpoint at {}, starting fresh", path.display());
    }
    // A fresh run must not inherit wall times from an older one.
    let timing = dir.join(TIMING_FILE);
    if timing.exists() {
        std::fs::remove_file(timing)?;
    }
    Ok(Trainer::new(train, setup)?)
}

fn train_seed(
    cfg: &RunConfig,
    setup: &TrainSetup,
    baseline: &EpisodeMetrics,
    seed: u64,
    resume: bool,
) -> Result<SeedOutcome, CliError> {
    let dir = cfg.out_dir().join(format!("seed_{seed}"));
    std::fs::create_dir_all(&dir)?;
    let mut tr = start_trainer(cfg, setup.clone(), seed, &dir, resume)?;
    while !tr.done() {
        let t0 = Instant::now();
        let rec = tr.train_episode()?;
        append_timing(&dir.join(TIMING_FILE), rec.episode, t0.elapsed().as_secs_f64())?;
        log::debug!("seed {seed} episode {} return {:.3} cost {:.3}", rec.episode, rec.mean_return, rec.cost);
        if tr.episode % cfg.checkpoint_every == 0 && !tr.done() {
            save_checkpoint(&tr, &dir)?;
        }
    }
    save_checkpoint(&tr, &dir)?;

    let spec = cfg.rollout_spec();
    let ev = evaluate_model(&tr.model, &tr.graph, &setup.configs, &setup.series, &spec)?;
    let metrics = episode_metrics(&ev.log, &spec.metrics).map_err(stems::agent::AgentError::from)?;
    let normalized = normalize(&metrics, baseline);
    log::info!("seed {seed}: final cost ratio {:.4}", normalized.metrics.cost);
    Ok(SeedOutcome {
        seed,
        dir,
        first10_return: window_mean(&tr.history, true),
        last10_return: window_mean(&tr.history, false),
        history: tr.history,
        metrics,
        normalized,
    })
}

fn aggregate(seeds: &[SeedOutcome]) -> Vec<AggregateRow> {
    METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let abs: Vec<f64> = seeds.iter().map(|s| s.metrics.values()[k]).collect();
            let rat: Vec<f64> = seeds.iter().map(|s| s.normalized.metrics.values()[k]).collect();
            let (mean, std) = mean_std(&abs);
            let (ratio_mean, ratio_std) = mean_std(&rat);
            AggregateRow { metric: name.to_string(), mean, std, ratio_mean, ratio_std, seeds: seeds.len() }
        })
        .collect()
}

fn write_reports(out: &Path, report: &TrainReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["seed".to_string(), "episodes".into(), "first10_return".into(), "last10_return".into()];
    for name in METRIC_NAMES {
        header.push(name.to_string());
        header.push(format!("{name}_ratio"));
    }
    w.write_record(&header)?;
    for s in &report.seeds {
        let mut row = vec![
            s.seed.to_string(),
            s.history.len().to_string(),
            s.first10_return.to_string(),
            s.last10_return.to_string(),
        ];
        for (a, r) in s.metrics.values().iter().zip(s.normalized.metrics.values()) {
            row.push(a.to_string());
            row.push(r.to_string());
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(&out.join("train_summary.csv"), &bytes)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.aggregate {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(&out.join("train_aggregate.csv"), &bytes)?;

    #[derive(Serialize)]
    struct Brief<'a> {
        baseline: &'a EpisodeMetrics,
        seeds: Vec<SeedBrief<'a>>,
        aggregate: &'a [AggregateRow],
    }
    #[derive(Serialize)]
    struct SeedBrief<'a> {
        seed: u64,
        episodes: usize,
        first10_return: f64,
        last10_return: f64,
        metrics: &'a EpisodeMetrics,
        normalized: &'a NormalizedMetrics,
    }
    let brief = Brief {
        baseline: &report.baseline,
        seeds: report
            .seeds
            .iter()
            .map(|s| SeedBrief {
                seed: s.seed,
                episodes: s.history.len(),
                first10_return: s.first10_return,
                last10_return: s.last10_return,
                metrics: &s.metrics,
                normalized: &s.normalized,
            })
            .collect(),
        aggregate: &report.aggregate,
    };
    write_atomic(&out.join("train_report.json"), &serde_json::to_vec_pretty(&brief)?)?;
    Ok(())
}

/// Train one agent per configured seed on the same scenario, evaluate each
/// final model against the rule-based baseline and write per-seed logs plus
/// cross-seed summaries under the output directory.
///
/// `seed_<s>/train_log.csv` depends only on the configuration and seed;
/// wall-clock times go to `seed_<s>/timing.csv`.
pub fn cmd_train(cfg: &RunConfig, opts: &TrainOptions) -> Result<TrainReport, CliError> {
    let setup = cfg.setup()?;
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    write_atomic(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;

    let spec = cfg.rollout_spec();
    let base = evaluate_rule_based(&setup.configs, &setup.series, &cfg.baseline, &spec)?;
    let baseline = episode_metrics(&base.log, &spec.metrics).map_err(stems::agent::AgentError::from)?;

    let seeds = &cfg.seeds;
    let results: Vec<Mutex<Option<Result<SeedOutcome, CliError>>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let jobs = opts.jobs.clamp(1, seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= seeds.len() {
                    break;
                }
                let r = train_seed(cfg, &setup, &baseline, seeds[k], opts.resume);
                *results[k].lock().expect("result slot") = Some(r);
            });
        }
    });
    let mut outcomes = Vec::with_capacity(seeds.len());
    for slot in results {
        outcomes.push(slot.into_inner().expect("result slot").expect("every seed ran")?);
    }

    let report = TrainReport { aggregate: aggregate(&outcomes), baseline, seeds: outcomes };
    write_reports(&out, &report)?;
    Ok(report)
}
