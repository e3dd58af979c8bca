use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stems::sim::ExtremeWeather;
use stems_cli::{
    cmd_eval, cmd_export, cmd_gen_data, cmd_shield_audit, cmd_train, CliError, EvalOptions, ExportKind, ExportOptions,
    Overrides, RunConfig, TrainOptions,
};

/// Safe multi-agent building energy control: data generation, training,
/// evaluation and shield auditing.
#[derive(Parser, Debug)]
#[command(name = "stems", version)]
struct Cli {
    /// TOML run configuration; every field is optional.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to $STEMS_OUT_DIR, then ./stems-out).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Comma-separated training seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Scenario length in steps.
    #[arg(long, global = true)]
    horizon: Option<i64>,
    #[arg(long, global = true)]
    scenario_seed: Option<u64>,
    /// Exogenous time series CSV instead of the synthetic generator.
    #[arg(long, global = true)]
    data_csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the configured scenario's exogenous series as CSV.
    GenData {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one agent per seed and write logs, checkpoints and summaries.
    Train {
        /// Continue each seed from its checkpoint.
        #[arg(long)]
        resume: bool,
        /// Seeds trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate a checkpoint, or the rule-based controller, deterministically.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluate the baseline controller itself.
        #[arg(long, value_enum, num_args = 0..=1, default_missing_value = "rule_based")]
        baseline: Option<Baseline>,
        #[arg(long, value_enum)]
        scenario: Option<Weather>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay an actions CSV (t,building_id,p_batt,p_hvac) through the shield.
    #[command(alias = "shield-check")]
    ShieldAudit {
        #[arg(long)]
        actions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export graph weights or attention weights as CSV.
    Export(ExportArgs),
    /// Same as `export graph`.
    ExportGraph {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the fully resolved configuration as TOML.
    PrintConfig,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(value_enum)]
    what: What,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Step of the attention snapshot (default: last step).
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum What {
    Graph,
    Attention,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
enum Baseline {
    RuleBased,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
#[value(rename_all = "snake_case")]
enum Weather {
    HeatWave,
    ColdWave,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = file.with_overrides(&Overrides {
        output_dir: cli.output_dir,
        seeds: cli.seeds,
        episodes: cli.episodes,
        horizon: cli.horizon,
        scenario_seed: cli.scenario_seed,
        data_csv: cli.data_csv,
    });
    match cli.command {
        Command::GenData { out } => {
            let path = cmd_gen_data(&cfg, out.as_deref())?;
            println!("wrote {}", path.display());
        }
        Command::Train { resume, jobs } => {
            let report = cmd_train(&cfg, &TrainOptions { resume, jobs })?;
            println!("{:<24}{:>16}{:>12}{:>12}{:>12}", "metric", "mean", "std", "ratio", "ratio std");
            for r in &report.aggregate {
                println!("{:<24}{:>16.4}{:>12.4}{:>12.4}{:>12.4}", r.metric, r.mean, r.std, r.ratio_mean, r.ratio_std);
            }
            for s in &report.seeds {
                println!(
                    "seed {}: return first10 {:.3} last10 {:.3}, cost ratio {:.4} ({})",
                    s.seed,
                    s.first10_return,
                    s.last10_return,
                    s.normalized.metrics.cost,
                    s.dir.display()
                );
            }
        }
        Command::Eval { checkpoint, baseline, scenario, out } => {
            if baseline.is_some() && checkpoint.is_some() {
                return Err(CliError::Config("--baseline and --checkpoint are mutually exclusive".into()));
            }
            let scenario = scenario.map(|w| match w {
                Weather::HeatWave => ExtremeWeather::HeatWave,
                Weather::ColdWave => ExtremeWeather::ColdWave,
            });
            let report = cmd_eval(&cfg, &EvalOptions { checkpoint, scenario, out })?;
            print!("{}", report.to_text());
            println!("wrote {}", report.csv_path.display());
        }
        Command::ShieldAudit { actions, out } => {
            let s = cmd_shield_audit(&cfg, &actions, out.as_deref())?;
            println!(
                "{} steps: {} passed, {} projected, {} emergency; min margin {:.3e}",
                s.steps, s.passed, s.projected, s.emergency, s.min_margin
            );
            println!("wrote {}", s.out.display());
        }
        Command::Export(a) => {
            let kind = match a.what {
                What::Graph => ExportKind::Graph,
                What::Attention => ExportKind::Attention,
            };
            let path = cmd_export(&cfg, &ExportOptions { kind, checkpoint: a.checkpoint, step: a.step, out: a.out })?;
            println!("wrote {}", path.display());
        }
        Command::ExportGraph { checkpoint, out } => {
            let path = cmd_export(&cfg, &ExportOptions { kind: ExportKind::Graph, checkpoint, step: None, out })?;
            println!("wrote {}", path.display());
        }
        Command::PrintConfig => {
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
