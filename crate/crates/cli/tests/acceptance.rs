//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits non-zero if any failed.
//!
//! Pinned tolerances live next to each check. Criterion 6 trains three
//! seeds for 200 episodes and dominates the runtime.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stems::agent::{
    actor_loss_grad, critic_loss_grad, rollout, Actor, Critic, Policy, RolloutSpec, TrainConfig,
    UniformRandomPolicy,
};
use stems::encoder::{
    encode_steps, encoder_backward, read_attention_csv, temporal_attention, write_attention_csv, EncoderConfig,
    EncoderParams, FeatureTable, StateHistory,
};
use stems::graph::{build_graph, GraphParams};
use stems::metrics::{
    episode_metrics, r_comfort, r_economic, r_renewable, r_stability, EpisodeLog, MetricsSpec, RewardWeights, StepLog,
    ViolationFlags,
};
use stems::nn::{Activation, Params};
use stems::shield::{project, shield_all, verify, LocalContext, SafetySpec};
use stems::sim::{
    apply_extreme_weather, generate_scenario, scenario_buildings, soc_next_unclamped, Action, BuildingConfig,
    BuildingState, BuildingType, Environment, ExtremeWeather, ScenarioSpec,
};
use stems_cli::{cmd_eval, cmd_export, cmd_train, EvalOptions, ExportKind, ExportOptions, RunConfig, TrainOptions};

const DESK_CONFIG: &str = include_str!("../../../configs/desk_scale.toml");

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

/// Largest violation of any hard bound after a step, from the simulator's
/// own outputs (positive means violated).
fn worst_breach(outcomes: &[stems::sim::StepOutcome], configs: &[BuildingConfig], p_grid_max: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    let mut import = 0.0;
    for (o, c) in outcomes.iter().zip(configs) {
        worst = worst.max(c.soc_min - o.soc_unclamped).max(o.soc_unclamped - c.soc_max);
        worst = worst.max(o.net.abs() - c.p_building_max);
        import += o.net.max(0.0);
    }
    worst.max(import - p_grid_max)
}

fn shield_soundness() -> Outcome {
    use BuildingType::*;
    let types = vec![Residential, Commercial, Mixed, Residential, Commercial, Mixed, Residential, Commercial];
    let spec = ScenarioSpec::new(types, 8760);
    let series = generate_scenario(&spec, 1).map_err(|e| e.to_string())?;
    let configs = scenario_buildings(&spec, 2.0, 1);
    let safety = SafetySpec::default();

    let start = Instant::now();
    let mut env = Environment::new(configs.clone(), series.clone()).map_err(|e| e.to_string())?;
    let mut policy = UniformRandomPolicy { rng: ChaCha8Rng::seed_from_u64(7) };
    let mut min_margin = f64::INFINITY;
    let mut worst = f64::NEG_INFINITY;
    let mut steps = 0usize;
    while !env.done() {
        let exo = env.exo().map_err(|e| e.to_string())?;
        let raw = policy.act(env.states(), &exo, env.effective_configs()).map_err(|e| e.to_string())?;
        let res = shield_all(env.states(), &raw, env.effective_configs(), &exo, &safety);
        for r in &res {
            let e = r.evals_after;
            min_margin = min_margin.min(e.h_battery).min(e.h_power).min(e.h_grid);
        }
        let safe: Vec<Action> = res.iter().map(|r| r.safe_action).collect();
        drop(exo);
        let eff = env.effective_configs().to_vec();
        let out = env.step(&safe).map_err(|e| e.to_string())?;
        worst = worst.max(worst_breach(&out, &eff, safety.p_grid_max));
        steps += 1;
    }
    let secs = start.elapsed().as_secs_f64();

    let unshielded = RolloutSpec {
        shielded: false,
        safety,
        rewards: RewardWeights::default(),
        metrics: MetricsSpec::default(),
    };
    let mut env = Environment::new(configs, series).map_err(|e| e.to_string())?;
    let mut policy = UniformRandomPolicy { rng: ChaCha8Rng::seed_from_u64(7) };
    let ro = rollout(&mut env, &mut policy, &unshielded).map_err(|e| e.to_string())?;
    let rate = ro.hard_violations() as f64 / (8760.0 * 8.0);

    check(
        steps == 8760 && min_margin >= -1e-9 && worst <= 1e-9 && rate > 0.0 && secs < 60.0,
        format!(
            "shielded: min margin {min_margin:.3e}, worst simulated breach {worst:.3e}; \
             unshielded violation rate {rate:.4}; shielded run {secs:.1} s"
        ),
    )
}

// ---------------------------------------------------------------- 2

/// Feasibility straight from the device model: SOC stays in bounds, local
/// net power within the building limit and imports within the headroom.
fn feasible(a: &Action, s: &BuildingState, c: &BuildingConfig, cx: &LocalContext, tol: f64) -> bool {
    let soc = soc_next_unclamped(s.soc, a.p_batt, cx.dt, c);
    let net = cx.load + a.p_hvac + a.p_batt - cx.solar;
    soc >= c.soc_min - tol && soc <= c.soc_max + tol && net.abs() <= c.p_building_max + tol && net.max(0.0) <= cx.headroom + tol
}

fn brute_force(a: &Action, s: &BuildingState, c: &BuildingConfig, cx: &LocalContext, step: f64) -> Option<Action> {
    let nx = (2.0 * c.battery_power_limit / step).round() as i64;
    let ny = (c.hvac_power_max / step).round() as i64;
    let mut best: Option<(f64, Action)> = None;
    for ix in 0..=nx {
        let x = -c.battery_power_limit + ix as f64 * step;
        for iy in 0..=ny {
            let u = Action::new(x, iy as f64 * step);
            if feasible(&u, s, c, cx, 0.0) {
                let d = u.distance(a);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, u));
                }
            }
        }
    }
    best.map(|(_, u)| u)
}

fn projection_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut verified, mut worst_gap, mut worst_dist) = (0usize, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    let mut attempts = 0;
    while verified < 120 && attempts < 100_000 {
        attempts += 1;
        let mut c = BuildingConfig::preset(0, BuildingType::Mixed, [0.0, 0.0]);
        c.battery_capacity = rng.random_range(4.0..20.0);
        c.battery_power_limit = (rng.random_range(1.0..3.0f64) * 10.0).round() / 10.0;
        c.hvac_power_max = (rng.random_range(0.5..2.0f64) * 10.0).round() / 10.0;
        c.charge_eff = rng.random_range(0.85..1.0);
        c.discharge_eff = rng.random_range(0.85..1.0);
        c.p_building_max = rng.random_range(3.0..8.0);
        let s = BuildingState { soc: rng.random_range(c.soc_min..c.soc_max), t_in: 22.0, prev_net: 0.0 };
        let cx = LocalContext {
            dt: 1.0,
            load: rng.random_range(0.0..7.0),
            solar: rng.random_range(0.0..4.0),
            headroom: rng.random_range(0.5..8.0),
            margin: 0.0,
            p_grid_max: 40.0,
        };
        let a = Action::new(
            rng.random_range(-c.battery_power_limit..=c.battery_power_limit),
            rng.random_range(0.0..=c.hvac_power_max),
        );
        if verify(&s, &a, &c, &cx).all_satisfied() {
            continue;
        }
        let Ok(p) = project(&a, &s, &c, &cx) else { continue };
        let Some(bf) = brute_force(&a, &s, &c, &cx, 1e-3) else { continue };
        verified += 1;
        let (dp, db) = (p.distance(&a), bf.distance(&a));
        let gap = p.distance(&bf);
        worst_gap = worst_gap.max(gap);
        worst_dist = worst_dist.max(dp - db);
        if !feasible(&p, &s, &c, &cx, 1e-9) || gap > 2e-3 || dp > db + 1e-9 {
            failures.push(format!("case {verified}: gap {gap:.2e}, d_proj {dp:.6}, d_brute {db:.6}"));
        }
    }
    check(
        verified >= 100 && failures.is_empty(),
        format!(
            "{verified} infeasible cases, max |proj - brute| {worst_gap:.2e}, max d_proj - d_brute {worst_dist:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 3

fn rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nn = n.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

/// Central differences of `loss` for each tensor of `p`, paired with the
/// analytic gradient tensors in `grads`.
fn fd_errors<P: Params + Clone>(p: &P, grads: &P, prefix: &str, loss: impl Fn(&P) -> f64) -> Vec<(String, f64)> {
    let eps = 1e-5;
    let flat = p.flatten();
    let analytic = grads.flatten();
    let mut spans = Vec::new();
    let mut offset = 0;
    p.for_each(&mut |name, _, d| {
        spans.push((name.to_string(), offset, d.len()));
        offset += d.len();
    });
    spans
        .into_iter()
        .map(|(name, start, len)| {
            let mut numeric = Vec::with_capacity(len);
            for k in start..start + len {
                let mut q = p.clone();
                let mut f = flat.clone();
                f[k] = flat[k] + eps;
                q.assign_flat(&f);
                let up = loss(&q);
                f[k] = flat[k] - eps;
                q.assign_flat(&f);
                let down = loss(&q);
                numeric.push((up - down) / (2.0 * eps));
            }
            (format!("{prefix}{name}"), rel_err(&analytic[start..start + len], &numeric))
        })
        .collect()
}

struct GradInstance {
    graph: stems::graph::BuildingGraph,
    table: FeatureTable,
    steps: Vec<usize>,
    actions: Vec<Vec<Action>>,
    advantages: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl GradInstance {
    fn rows(&self, reps: &Array2<f64>, i: usize) -> Array2<f64> {
        let n = self.graph.n();
        let idx: Vec<usize> = (0..self.steps.len()).map(|s| s * n + i).collect();
        reps.select(ndarray::Axis(0), &idx)
    }

    fn loss(&self, enc: &EncoderParams, actors: &[Actor], critics: &[Critic]) -> f64 {
        let (reps, _) = encode_steps(enc, &self.graph, &self.table, &self.steps).unwrap();
        (0..actors.len())
            .map(|i| {
                let r = self.rows(&reps, i);
                actor_loss_grad(&actors[i], &r, &self.actions[i], &self.advantages[i], 0.8, 0.1).0
                    + critic_loss_grad(&critics[i], &r, &self.targets[i]).0
            })
            .sum()
    }
}

fn gradient_check(activation: Activation, seed: u64) -> Vec<(String, f64)> {
    let (n, t, hidden) = (3usize, 4usize, 8usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ScenarioSpec::new(vec![BuildingType::Residential, BuildingType::Commercial, BuildingType::Mixed], 24);
    let configs = scenario_buildings(&spec, 2.0, seed);
    let cfg = EncoderConfig {
        input_dim: 5,
        gcn_layers: 2,
        hidden,
        heads: 2,
        head_dim: 4,
        output_dim: hidden,
        window: t,
        activation,
    };
    let enc = EncoderParams::new(cfg, &mut rng);
    let mut table = FeatureTable::new(n, 5);
    for _ in 0..t {
        let step: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        table.push_step(&step).unwrap();
    }
    let actors: Vec<Actor> = configs.iter().map(|c| Actor::new(hidden, &[hidden], c, -0.3, &mut rng)).collect();
    let critics: Vec<Critic> = (0..n).map(|_| Critic::new(hidden, &[hidden], &mut rng)).collect();
    let actions = actors
        .iter()
        .map(|a| {
            (0..t)
                .map(|_| {
                    let s = a.scale;
                    Action::new(
                        s.center[0] + s.half[0] * rng.random_range(-0.9..0.9),
                        s.center[1] + s.half[1] * rng.random_range(-0.9..0.9),
                    )
                })
                .collect()
        })
        .collect();
    let advantages = (0..n).map(|_| (0..t).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let targets = (0..n).map(|_| (0..t).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let inst = GradInstance {
        graph: build_graph(&configs, &GraphParams::default()).unwrap(),
        table,
        steps: (0..t).collect(),
        actions,
        advantages,
        targets,
    };

    // Analytic pass: per-building heads, then the encoder through the summed
    // representation gradients.
    let (reps, cache) = encode_steps(&enc, &inst.graph, &inst.table, &inst.steps).unwrap();
    let mut d_reps = Array2::zeros(reps.raw_dim());
    let mut errors = Vec::new();
    for i in 0..n {
        let r = inst.rows(&reps, i);
        let (_, ga, da) = actor_loss_grad(&actors[i], &r, &inst.actions[i], &inst.advantages[i], 0.8, 0.1);
        let (_, gc, dc) = critic_loss_grad(&critics[i], &r, &inst.targets[i]);
        for s in 0..t {
            let mut row = d_reps.row_mut(s * n + i);
            row += &da.row(s);
            row += &dc.row(s);
        }
        errors.extend(fd_errors(&actors[i], &ga, &format!("actor{i}."), |a| {
            let mut all = actors.clone();
            all[i] = a.clone();
            inst.loss(&enc, &all, &critics)
        }));
        errors.extend(fd_errors(&critics[i], &gc, &format!("critic{i}."), |c| {
            let mut all = critics.clone();
            all[i] = c.clone();
            inst.loss(&enc, &actors, &all)
        }));
    }
    let ge = encoder_backward(&enc, &cache, &d_reps).unwrap();
    let ge_params = {
        let mut p = enc.clone();
        p.assign_flat(&ge.flatten());
        p
    };
    errors.extend(fd_errors(&enc, &ge_params, "encoder.", |e| inst.loss(e, &actors, &critics)));
    errors
}

fn gradient_correctness() -> Outcome {
    let mut all = gradient_check(Activation::Tanh, 31);
    all.extend(gradient_check(Activation::Relu, 32));
    let worst = all.iter().cloned().fold((String::new(), 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let bad: Vec<String> = all.iter().filter(|(_, e)| !(*e <= 1e-4)).map(|(n, e)| format!("{n} {e:.2e}")).collect();
    check(
        bad.is_empty(),
        format!("{} tensors, worst relative error {:.2e} ({}){}", all.len(), worst.1, worst.0, if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }),
    )
}

// ---------------------------------------------------------------- 4

fn attention_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = ScenarioSpec::new(vec![BuildingType::Residential; 4], 24);
    let configs = scenario_buildings(&spec, 2.0, 4);
    let graph = build_graph(&configs, &GraphParams::default()).map_err(|e| e.to_string())?;
    let cfg = EncoderConfig { input_dim: 6, window: 8, ..Default::default() };
    let params = EncoderParams::new(cfg.clone(), &mut rng);
    let mut table = FeatureTable::new(4, 6);
    for _ in 0..30 {
        let step: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        table.push_step(&step).map_err(|e| e.to_string())?;
    }
    let steps: Vec<usize> = (0..30).collect();
    let (_, cache) = encode_steps(&params, &graph, &table, &steps).map_err(|e| e.to_string())?;
    let ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
    let mut worst_row = 0.0f64;
    for s in 0..steps.len() {
        let weights: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|i| (0..cfg.heads).map(|h| cache.attention(cache.query_index(s, i), h).to_vec()).collect())
            .collect();
        let mut buf = Vec::new();
        write_attention_csv(&mut buf, &ids, &weights).map_err(|e| e.to_string())?;
        let rows = read_attention_csv(buf.as_slice()).map_err(|e| e.to_string())?;
        for chunk in rows.chunks(cfg.window + 1) {
            worst_row = worst_row.max((chunk.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs());
        }
    }

    // Rows exported by the command from a briefly trained model.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut run = RunConfig::from_toml(DESK_CONFIG).map_err(|e| e.to_string())?;
    run.output_dir = Some(dir.path().to_path_buf());
    run.seeds = vec![0];
    run.train.episodes = 1;
    run.scenario.horizon = 48;
    cmd_train(&run, &TrainOptions::default()).map_err(|e| e.to_string())?;
    let ck = dir.path().join("seed_0").join(stems_cli::CHECKPOINT_FILE);
    for step in [0, 5, 47] {
        let opts = ExportOptions { kind: ExportKind::Attention, checkpoint: Some(ck.clone()), step: Some(step), out: None };
        let path = cmd_export(&run, &opts).map_err(|e| e.to_string())?;
        let rows = read_attention_csv(std::fs::File::open(path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for chunk in rows.chunks(run.train.encoder.window + 1) {
            worst_row = worst_row.max((chunk.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs());
        }
    }

    // Identical history: every weight is 1/(T+1).
    let expect = 1.0 / (cfg.window as f64 + 1.0);
    let mut worst_uniform = 0.0f64;
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut hist = StateHistory::new(cfg.window);
    for _ in 0..cfg.window + 3 {
        hist.push(x.clone());
    }
    let (_, w) = temporal_attention(&hist, &params);
    for head in &w {
        for a in head {
            worst_uniform = worst_uniform.max((a - expect).abs());
        }
    }
    let mut flat = FeatureTable::new(4, 6);
    let same: Vec<Vec<f64>> = (0..4).map(|_| x.clone()).collect();
    for _ in 0..cfg.window + 4 {
        flat.push_step(&same).map_err(|e| e.to_string())?;
    }
    let late: Vec<usize> = (cfg.window..cfg.window + 4).collect();
    let (_, cache) = encode_steps(&params, &graph, &flat, &late).map_err(|e| e.to_string())?;
    for q in 0..cache.queries() {
        for h in 0..cfg.heads {
            for a in cache.attention(q, h) {
                worst_uniform = worst_uniform.max((a - expect).abs());
            }
        }
    }
    check(
        worst_row <= 1e-6 && worst_uniform <= 1e-9,
        format!("max |row sum - 1| {worst_row:.2e}; max |w - 1/(T+1)| {worst_uniform:.2e} with T = {}", cfg.window),
    )
}

// ---------------------------------------------------------------- 5

fn log_from_totals(totals: &[f64], t_in: &[f64], steps_per_day: usize) -> EpisodeLog {
    let mut log = EpisodeLog::new(1.0, steps_per_day);
    for (k, &e) in totals.iter().enumerate() {
        log.push(StepLog {
            price: 0.1,
            carbon: 0.5,
            nets: vec![e],
            t_in: vec![t_in.get(k).copied().unwrap_or(22.0)],
            violations: vec![ViolationFlags::default()],
        });
    }
    log
}

fn metric_arithmetic() -> Outcome {
    let w = RewardWeights { alpha_grid: 0.5, alpha_build: 0.3, beta_ramp: 0.2, ..RewardWeights::default() };
    let spec = MetricsSpec::default();
    let m = |totals: &[f64], t_in: &[f64], spd| episode_metrics(&log_from_totals(totals, t_in, spd), &spec).unwrap();
    let got = [
        ("economic", r_economic(5.0, 0.2, 1.0, 1.0), -1.0),
        // Σ positive nets 10 of 20, |e| 5 of 10, |Δe| 2
        ("stability", r_stability(5.0, 3.0, &[5.0, 5.0, -1.0], &w, 10.0, 20.0), 0.235),
        ("comfort", r_comfort(25.0, 22.0, 0.4), -3.6),
        ("renewable", r_renewable(4.0, 4.0, 0.6), 0.3),
        ("ramping", m(&[1.0, 3.0, 2.0], &[], 3).ramping, 1.5),
        ("discomfort", m(&[1.0; 4], &[22.0, 27.0, 21.0, 26.0], 4).discomfort_proportion, 0.25),
        ("daily peak", m(&[5.0, 9.0, 7.0], &[], 3).avg_daily_peak, 9.0),
    ];
    let bad: Vec<String> =
        got.iter().filter(|(_, v, e)| (v - e).abs() > 1e-12).map(|(n, v, e)| format!("{n} {v} != {e}")).collect();
    check(
        bad.is_empty(),
        if bad.is_empty() {
            got.iter().map(|(n, v, _)| format!("{n} {v}")).collect::<Vec<_>>().join(", ")
        } else {
            bad.join(", ")
        },
    )
}

// ---------------------------------------------------------------- 6

fn training_efficacy() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::from_toml(DESK_CONFIG).map_err(|e| e.to_string())?;
    cfg.output_dir = Some(dir.path().to_path_buf());
    let mut preset = TrainConfig::desk_scale();
    preset.episodes = 200;
    if cfg.train != preset || cfg.seeds.len() != 3 || cfg.scenario.building_types.len() != 5 || cfg.scenario.horizon != 720 {
        return Err("desk_scale.toml does not describe 5 buildings x 720 steps, 3 seeds, 200 episodes".into());
    }
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(3);
    let start = Instant::now();
    let report = cmd_train(&cfg, &TrainOptions { resume: false, jobs }).map_err(|e| e.to_string())?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    let base = report.baseline;
    let mut ok = minutes < 30.0;
    let mut parts = Vec::new();
    for s in &report.seeds {
        let cost = s.normalized.metrics.cost;
        let seed_ok = cost <= 0.90
            && s.metrics.discomfort_proportion <= base.discomfort_proportion
            && s.last10_return > s.first10_return;
        ok &= seed_ok;
        parts.push(format!(
            "seed {} cost ratio {cost:.4} discomfort {:.4} (baseline {:.4}) return {:.1} -> {:.1}{}",
            s.seed,
            s.metrics.discomfort_proportion,
            base.discomfort_proportion,
            s.first10_return,
            s.last10_return,
            if seed_ok { "" } else { " [miss]" }
        ));
    }
    parts.push(format!("{minutes:.1} min"));
    check(ok, parts.join("; "))
}

// ---------------------------------------------------------------- 7

fn normalization_identity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::from_toml(DESK_CONFIG).map_err(|e| e.to_string())?;
    cfg.output_dir = Some(dir.path().to_path_buf());
    let mut detail = Vec::new();
    let mut ok = true;
    for scenario in [None, Some(ExtremeWeather::HeatWave), Some(ExtremeWeather::ColdWave)] {
        let r = cmd_eval(&cfg, &EvalOptions { scenario, ..Default::default() }).map_err(|e| e.to_string())?;
        let ratios = &r.normalized.metrics.values()[..5];
        ok &= r.normalized.absolute.is_empty() && ratios.iter().all(|&x| x == 1.0);
        detail.push(format!("{} {:?}", r.scenario, ratios));
    }
    check(ok, detail.join("; "))
}

// ---------------------------------------------------------------- 8

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "timing.csv" && n != "config.toml") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let run = |jobs| -> Result<(tempfile::TempDir, Vec<(String, Vec<u8>)>), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut cfg = RunConfig::from_toml(DESK_CONFIG).map_err(|e| e.to_string())?;
        cfg.output_dir = Some(dir.path().to_path_buf());
        cfg.seeds = vec![5, 6];
        cfg.train.episodes = 3;
        cfg.scenario.horizon = 168;
        cfg.checkpoint_every = 2;
        cmd_train(&cfg, &TrainOptions { resume: false, jobs }).map_err(|e| e.to_string())?;
        let files = files_under(dir.path());
        Ok((dir, files))
    };
    let (_a, fa) = run(1)?;
    let (_b, fb) = run(2)?;
    let logs = fa.iter().filter(|(n, _)| n.ends_with("train_log.csv")).count();
    let differing: Vec<&str> =
        fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    check(
        fa.len() == fb.len() && logs == 2 && differing.is_empty(),
        format!("{} files compared ({logs} training logs), {} differ {:?}", fa.len(), differing.len(), differing),
    )
}

// ---------------------------------------------------------------- 9

fn extreme_weather() -> Outcome {
    let spec = ScenarioSpec::new(vec![BuildingType::Residential, BuildingType::Commercial, BuildingType::Mixed], 720);
    let base = generate_scenario(&spec, 3).map_err(|e| e.to_string())?;
    let configs = scenario_buildings(&spec, 2.0, 3);
    let mut problems = Vec::new();
    let mut expect = |ok: bool, what: &str| {
        if !ok {
            problems.push(what.to_string());
        }
    };

    let heat = apply_extreme_weather(&base, ExtremeWeather::HeatWave);
    expect(heat.t_out.len() == base.t_out.len(), "heat t_out length");
    expect(heat.t_out.iter().all(|&t| (35.0..=40.0).contains(&t)), "heat t_out in [35, 40]");
    expect(heat.solar.len() == base.solar.len(), "heat solar columns");
    for (h, b) in heat.solar.iter().zip(&base.solar) {
        expect(h.iter().zip(b).all(|(x, y)| *x == y * 1.2), "heat solar scaled by exactly 1.2");
    }
    expect(heat.load == base.load, "heat load unchanged");
    expect(heat.price == base.price && heat.carbon == base.carbon, "heat tariff and carbon unchanged");
    expect(heat.horizon == base.horizon && heat.dt == base.dt && heat.building_ids == base.building_ids, "heat shape");
    expect(heat.adjustment.capacity_derating == 1.0, "heat keeps battery capacity");
    for c in &configs {
        expect(heat.effective_config(c).battery_capacity == c.battery_capacity, "heat effective capacity");
    }

    let cold = apply_extreme_weather(&base, ExtremeWeather::ColdWave);
    expect(cold.adjustment.capacity_derating == 0.85, "cold derating 0.85");
    expect(cold.t_out.iter().all(|&t| t < base.t_out.iter().copied().fold(f64::INFINITY, f64::min)), "cold t_out below nominal");
    expect(cold.solar == base.solar && cold.load == base.load, "cold solar and load unchanged");
    expect(cold.price == base.price && cold.carbon == base.carbon, "cold tariff and carbon unchanged");
    let env = Environment::new(configs.clone(), cold.clone()).map_err(|e| e.to_string())?;
    for (c, e) in configs.iter().zip(env.effective_configs()) {
        expect(e.battery_capacity == c.battery_capacity * 0.85, "cold effective capacity x0.85");
        let mut restored = e.clone();
        restored.battery_capacity = c.battery_capacity;
        restored.thermal_conductance = c.thermal_conductance;
        expect(&restored == c, "cold changes no other device field");
        expect(e.battery_power_limit == c.battery_power_limit && e.soc_min == c.soc_min && e.soc_max == c.soc_max, "cold power and SOC limits");
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "heat t_out in [{:.2}, {:.2}], solar x1.2 on {} samples; cold capacity derating {}",
                heat.t_out.iter().copied().fold(f64::INFINITY, f64::min),
                heat.t_out.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                heat.solar.iter().map(Vec::len).sum::<usize>(),
                cold.adjustment.capacity_derating
            )
        } else {
            problems.join(", ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shield soundness", shield_soundness),
        ("projection optimality", projection_optimality),
        ("gradient correctness", gradient_correctness),
        ("attention normalization", attention_normalization),
        ("reward and metric arithmetic", metric_arithmetic),
        ("desk-scale training efficacy", training_efficacy),
        ("normalization identity", normalization_identity),
        ("determinism", determinism),
        ("extreme weather", extreme_weather),
    ];
    // `cargo test -- <n>...` runs only the listed criteria.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n} {name}: PASS ({d}) [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} {name}: FAIL ({d}) [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
