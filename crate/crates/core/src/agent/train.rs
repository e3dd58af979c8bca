use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{Actor, Critic};
use super::rollout::{rollout, Policy, Rollout, RolloutSpec, RuleBasedPolicy};
use super::update::{actor_loss_grad, advantage, critic_loss_grad, normalize_advantages};
use super::AgentError;
use crate::encoder::{encode_steps, encoder_backward, EncoderConfig, EncoderParams, FeatureTable, StreamingEncoder};
use crate::features::{node_features, raw_features, FeatureStats};
use crate::graph::{build_graph, BuildingGraph, GraphParams};
use crate::metrics::{episode_metrics, RuleSchedule};
use crate::nn::{Optimizer, OptimizerKind, Params};
use crate::shield::MarginSchedule;
use crate::sim::{Action, BuildingConfig, BuildingState, Environment, ExoAt, ExogenousSeries};

/// Exploration multiplier on the actor's standard deviation, interpolated
/// linearly from `start` (first episode) to `end` (last episode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub start: f64,
    pub end: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule { start: 1.0, end: 1.0 }
    }
}

impl NoiseSchedule {
    pub fn at(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.start;
        }
        let frac = (episode as f64 / (episodes - 1) as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

/// Which action the policy gradient scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoredAction {
    /// The action the shield let through to the environment.
    #[default]
    Safe,
    /// The action the policy sampled; the shield then counts as part of the
    /// environment.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_graph: f64,
    pub episodes: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub max_grad_norm: Option<f64>,
    pub noise: NoiseSchedule,
    pub margin: MarginSchedule,
    /// Gradient passes over each episode's data.
    pub updates_per_episode: usize,
    /// Steps per minibatch; `0` uses the whole episode as one batch.
    pub minibatch_steps: usize,
    /// Multiplier applied to rewards before they enter the losses.
    pub reward_scale: f64,
    /// Weight of the quadratic penalty on the actors' pre-squash means.
    pub mean_penalty: f64,
    pub scored_action: ScoredAction,
    /// Learning rates fall linearly to this fraction of their base value by
    /// the last episode; `1.0` keeps them constant.
    pub lr_final_fraction: f64,
    pub log_std_init: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_graph: 3e-4,
            episodes: 200,
            seed: 0,
            optimizer: OptimizerKind::Sgd,
            max_grad_norm: None,
            noise: NoiseSchedule::default(),
            margin: MarginSchedule::default(),
            updates_per_episode: 1,
            minibatch_steps: 0,
            reward_scale: 1.0,
            mean_penalty: 0.0,
            scored_action: ScoredAction::Safe,
            lr_final_fraction: 1.0,
            log_std_init: -0.5,
            actor_hidden: vec![128, 128],
            critic_hidden: vec![128, 128],
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings that train stably on a few buildings over a month within a
    /// few minutes per seed: Adam with clipped gradients, short minibatches,
    /// rescaled rewards, a mild pull of the actor means toward zero and
    /// learning rates annealed to a tenth. Discount and network sizes keep
    /// their defaults.
    pub fn desk_scale() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::adam(),
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            lr_graph: 1e-4,
            max_grad_norm: Some(1.0),
            minibatch_steps: 48,
            updates_per_episode: 2,
            reward_scale: 0.05,
            mean_penalty: 0.1,
            lr_final_fraction: 0.1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        for (name, lr) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("lr_graph", self.lr_graph)] {
            if !(lr > 0.0) {
                return Err(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.updates_per_episode == 0 {
            return Err("updates_per_episode must be at least 1".into());
        }
        if !(self.reward_scale > 0.0) {
            return Err("reward_scale must be positive".into());
        }
        if !(self.mean_penalty >= 0.0) {
            return Err("mean_penalty must be non-negative".into());
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(format!("lr_final_fraction must lie in (0, 1], got {}", self.lr_final_fraction));
        }
        if self.noise.start < 0.0 || self.noise.end < 0.0 {
            return Err("noise multipliers must be non-negative".into());
        }
        self.encoder.validate().map_err(|e| e.to_string())
    }
}

/// All learnable state: the shared encoder, per-building actors and
/// critics, and the feature normalization they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub encoder: EncoderParams,
    pub actors: Vec<Actor>,
    pub critics: Vec<Critic>,
    pub stats: FeatureStats,
}

impl Model {
    pub fn new(cfg: &TrainConfig, configs: &[BuildingConfig], stats: FeatureStats) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let encoder = EncoderParams::new(cfg.encoder.clone(), &mut rng);
        let d = cfg.encoder.output_dim;
        let actors = configs.iter().map(|c| Actor::new(d, &cfg.actor_hidden, c, cfg.log_std_init, &mut rng)).collect();
        let critics = configs.iter().map(|_| Critic::new(d, &cfg.critic_hidden, &mut rng)).collect();
        Model { encoder, actors, critics, stats }
    }

    pub fn all_finite(&self) -> bool {
        self.encoder.all_finite()
            && self.actors.iter().all(|a| a.all_finite())
            && self.critics.iter().all(|c| c.all_finite())
    }
}

/// The learned controller as a [`Policy`]. Without an RNG it plays the
/// squashed mean action.
pub struct StemsPolicy<'a> {
    model: &'a Model,
    graph: &'a BuildingGraph,
    table: FeatureTable,
    stream: StreamingEncoder,
    noise_scale: f64,
    rng: Option<ChaCha8Rng>,
}

impl<'a> StemsPolicy<'a> {
    pub fn new(model: &'a Model, graph: &'a BuildingGraph, noise_scale: f64, rng: Option<ChaCha8Rng>) -> Self {
        StemsPolicy {
            model,
            graph,
            table: FeatureTable::new(graph.n(), model.encoder.config.input_dim),
            stream: StreamingEncoder::new(&model.encoder),
            noise_scale,
            rng,
        }
    }

    pub fn deterministic(model: &'a Model, graph: &'a BuildingGraph) -> Self {
        Self::new(model, graph, 0.0, None)
    }

    /// Node features of every step acted on so far.
    pub fn into_table(self) -> FeatureTable {
        self.table
    }
}

impl Policy for StemsPolicy<'_> {
    fn act(
        &mut self,
        states: &[BuildingState],
        exo: &ExoAt<'_>,
        configs: &[BuildingConfig],
    ) -> Result<Vec<Action>, AgentError> {
        let x: Vec<Vec<f64>> =
            (0..states.len()).map(|i| node_features(&states[i], exo, i, &configs[i], &self.model.stats)).collect();
        self.table.push_step(&x)?;
        let reps = self.stream.encode_latest(&self.model.encoder, self.graph, &self.table)?;
        let actions = (0..states.len())
            .map(|i| {
                let r = reps.row(i);
                let r = r.as_slice().expect("row-major representations");
                match self.rng.as_mut() {
                    Some(rng) if self.noise_scale > 0.0 => self.model.actors[i].sample(r, self.noise_scale, rng),
                    _ => self.model.actors[i].mean_action(r),
                }
            })
            .collect();
        Ok(actions)
    }
}

/// Records raw features while delegating to an inner policy.
struct Recording<P> {
    inner: P,
    samples: Vec<Vec<f64>>,
}

impl<P: Policy> Policy for Recording<P> {
    fn act(
        &mut self,
        states: &[BuildingState],
        exo: &ExoAt<'_>,
        configs: &[BuildingConfig],
    ) -> Result<Vec<Action>, AgentError> {
        for i in 0..states.len() {
            self.samples.push(raw_features(&states[i], exo, i, &configs[i]));
        }
        self.inner.act(states, exo, configs)
    }
}

/// Feature statistics from one rule-based rollout over `env`.
pub fn calibrate_features(
    env: &mut Environment,
    schedule: &RuleSchedule,
    spec: &RolloutSpec,
) -> Result<FeatureStats, AgentError> {
    env.reset();
    let mut rec = Recording { inner: RuleBasedPolicy { schedule: *schedule }, samples: Vec::new() };
    rollout(env, &mut rec, spec)?;
    env.reset();
    Ok(FeatureStats::fit(&rec.samples))
}

/// Per-building record of the data one update consumed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub raw_actions: Vec<Action>,
    pub safe_actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub mean_return: f64,
    pub economic: f64,
    pub stability: f64,
    pub comfort: f64,
    pub renewable: f64,
    pub cost: f64,
    pub emission: f64,
    pub violations: usize,
    pub discomfort_proportion: f64,
    pub projected: usize,
    pub emergency: usize,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub noise_scale: f64,
    pub margin: f64,
}

/// Everything besides the training config that defines a training problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub configs: Vec<BuildingConfig>,
    pub series: ExogenousSeries,
    pub graph: GraphParams,
    pub rollout: RolloutSpec,
    pub baseline: RuleSchedule,
}

pub struct Trainer {
    pub cfg: TrainConfig,
    pub setup: TrainSetup,
    pub graph: BuildingGraph,
    pub model: Model,
    pub opt_encoder: Optimizer,
    pub opt_actors: Vec<Optimizer>,
    pub opt_critics: Vec<Optimizer>,
    /// Episodes completed so far.
    pub episode: usize,
    pub history: Vec<EpisodeRecord>,
    env: Environment,
    last_trajectories: Vec<Trajectory>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, setup: TrainSetup) -> Result<Self, AgentError> {
        cfg.validate().map_err(AgentError::Config)?;
        let mut env = Environment::new(setup.configs.clone(), setup.series.clone())?;
        let stats = calibrate_features(&mut env, &setup.baseline, &setup.rollout)?;
        let model = Model::new(&cfg, env.effective_configs(), stats);
        Self::with_model(cfg, setup, model)
    }

    /// Fresh optimizers around an existing model (also used when resuming).
    pub fn with_model(cfg: TrainConfig, setup: TrainSetup, model: Model) -> Result<Self, AgentError> {
        cfg.validate().map_err(AgentError::Config)?;
        if model.encoder.config.input_dim != model.stats.dim() {
            return Err(AgentError::Config("feature statistics do not match the encoder input".into()));
        }
        let env = Environment::new(setup.configs.clone(), setup.series.clone())?;
        let graph = build_graph(&setup.configs, &setup.graph)?;
        let n = setup.configs.len();
        if model.actors.len() != n || model.critics.len() != n {
            return Err(AgentError::Config(format!(
                "model has {} actors for {n} buildings",
                model.actors.len()
            )));
        }
        let opt = |lr| Optimizer::new(cfg.optimizer, lr, cfg.max_grad_norm);
        Ok(Trainer {
            opt_encoder: opt(cfg.lr_graph),
            opt_actors: (0..n).map(|_| opt(cfg.lr_actor)).collect(),
            opt_critics: (0..n).map(|_| opt(cfg.lr_critic)).collect(),
            cfg,
            setup,
            graph,
            model,
            episode: 0,
            history: Vec::new(),
            env,
            last_trajectories: Vec::new(),
        })
    }

    pub fn done(&self) -> bool {
        self.episode >= self.cfg.episodes
    }

    /// Building configurations as the environment applies them.
    pub fn effective_configs(&self) -> &[BuildingConfig] {
        self.env.effective_configs()
    }

    pub fn last_trajectories(&self) -> &[Trajectory] {
        &self.last_trajectories
    }

    /// The random stream of episode `e` depends only on the seed and `e`.
    fn episode_rng(&self, e: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(e as u64);
        rng
    }

    fn anneal_learning_rates(&mut self, episode: usize) {
        let f = NoiseSchedule { start: 1.0, end: self.cfg.lr_final_fraction }.at(episode, self.cfg.episodes);
        self.opt_encoder.lr = self.cfg.lr_graph * f;
        for o in &mut self.opt_actors {
            o.lr = self.cfg.lr_actor * f;
        }
        for o in &mut self.opt_critics {
            o.lr = self.cfg.lr_critic * f;
        }
    }

    /// Collect one episode with exploration, then update every network once
    /// per configured pass.
    pub fn train_episode(&mut self) -> Result<EpisodeRecord, AgentError> {
        let e = self.episode;
        let noise = self.cfg.noise.at(e, self.cfg.episodes);
        let margin = self.cfg.margin.margin_at(e);
        let mut spec = self.setup.rollout;
        spec.safety.margin = margin;

        self.env.reset();
        let rng = self.episode_rng(e);
        let (ro, table) = {
            let mut policy = StemsPolicy::new(&self.model, &self.graph, noise, Some(rng));
            let ro = rollout(&mut self.env, &mut policy, &spec)?;
            (ro, policy.into_table())
        };
        self.anneal_learning_rates(e);
        let (actor_loss, critic_loss) = self.update(&ro, &table, noise)?;
        if !self.model.all_finite() {
            return Err(AgentError::NonFinite { episode: e });
        }

        let m = episode_metrics(&ro.log, &spec.metrics)?;
        let comps = ro.mean_components();
        let record = EpisodeRecord {
            episode: e,
            mean_return: ro.mean_return(),
            economic: comps.economic,
            stability: comps.stability,
            comfort: comps.comfort,
            renewable: comps.renewable,
            cost: m.cost,
            emission: m.emission,
            violations: ro.hard_violations(),
            discomfort_proportion: m.discomfort_proportion,
            projected: ro.shield.projected,
            emergency: ro.shield.emergency,
            actor_loss,
            critic_loss,
            noise_scale: noise,
            margin,
        };
        self.history.push(record);
        self.episode += 1;
        Ok(record)
    }

    /// Train until `cfg.episodes` episodes are complete.
    pub fn train(&mut self) -> Result<&[EpisodeRecord], AgentError> {
        while !self.done() {
            let r = self.train_episode()?;
            log::debug!("episode {} return {:.3} cost {:.3}", r.episode, r.mean_return, r.cost);
        }
        Ok(&self.history)
    }

    fn chunks(&self, horizon: usize) -> Vec<(usize, usize)> {
        let size = if self.cfg.minibatch_steps == 0 { horizon } else { self.cfg.minibatch_steps };
        (0..horizon).step_by(size.max(1)).map(|t0| (t0, (t0 + size).min(horizon))).collect()
    }

    fn update(&mut self, ro: &Rollout, table: &FeatureTable, noise: f64) -> Result<(f64, f64), AgentError> {
        let horizon = table.steps();
        let n = table.n();
        let gamma = self.cfg.gamma;
        let scale = self.cfg.reward_scale;
        let chunks = self.chunks(horizon);
        let (mut actor_loss, mut critic_loss, mut batches) = (0.0, 0.0, 0usize);
        self.last_trajectories = vec![Trajectory::default(); n];

        for pass in 0..self.cfg.updates_per_episode {
            for &(t0, t1) in &chunks {
                let steps: Vec<usize> = (t0..(t1 + 1).min(horizon)).collect();
                let (reps, cache) = encode_steps(&self.model.encoder, &self.graph, table, &steps)?;
                let len = t1 - t0;
                let mut d_reps = Array2::zeros(reps.raw_dim());
                for i in 0..n {
                    let rows: Vec<usize> = (0..steps.len()).map(|k| k * n + i).collect();
                    let reps_i = reps.select(ndarray::Axis(0), &rows);
                    let values = self.model.critics[i].mlp.forward(&reps_i).0.column(0).to_vec();
                    let mut adv = Vec::with_capacity(len);
                    let mut targets = Vec::with_capacity(len);
                    let mut next_values = Vec::with_capacity(len);
                    for k in 0..len {
                        let t = t0 + k;
                        let v_next = if t + 1 < horizon { values[k + 1] } else { 0.0 };
                        let r = ro.rewards[t][i] * scale;
                        adv.push(advantage(r, gamma, values[k], v_next));
                        targets.push(r + gamma * v_next);
                        next_values.push(v_next);
                    }
                    let train_reps = reps_i.slice(s![..len, ..]).to_owned();
                    let scored = match self.cfg.scored_action {
                        ScoredAction::Safe => &ro.safe_actions,
                        ScoredAction::Sampled => &ro.raw_actions,
                    };
                    let actions: Vec<Action> = (t0..t1).map(|t| scored[t][i]).collect();
                    let adv_n = normalize_advantages(&adv);

                    let (la, ga, da) = actor_loss_grad(&self.model.actors[i], &train_reps, &actions, &adv_n, noise, self.cfg.mean_penalty);
                    let (lc, gc, dc) = critic_loss_grad(&self.model.critics[i], &train_reps, &targets);
                    if pass == 0 {
                        let tr = &mut self.last_trajectories[i];
                        let actor = &self.model.actors[i];
                        tr.raw_actions.extend((t0..t1).map(|t| ro.raw_actions[t][i]));
                        tr.log_probs.extend(actions.iter().enumerate().map(|(k, a)| {
                            actor.log_prob(train_reps.row(k).as_slice().unwrap(), a, noise)
                        }));
                        tr.safe_actions.extend((t0..t1).map(|t| ro.safe_actions[t][i]));
                        tr.rewards.extend((t0..t1).map(|t| ro.rewards[t][i]));
                        tr.values.extend_from_slice(&values[..len]);
                        tr.next_values.extend(next_values);
                        tr.advantages.extend(adv.iter().copied());
                    }
                    self.opt_actors[i].descend(&mut self.model.actors[i], &ga);
                    self.opt_critics[i].descend(&mut self.model.critics[i], &gc);
                    for k in 0..len {
                        let mut row = d_reps.row_mut(k * n + i);
                        row += &da.row(k);
                        row += &dc.row(k);
                    }
                    actor_loss += la;
                    critic_loss += lc;
                    batches += 1;
                }
                let g = encoder_backward(&self.model.encoder, &cache, &d_reps)?;
                self.opt_encoder.descend(&mut self.model.encoder, &g);
            }
        }
        let b = batches.max(1) as f64;
        Ok((actor_loss / b, critic_loss / b))
    }
}

/// Deterministic rollout of a trained model over `series`.
pub fn evaluate_model(
    model: &Model,
    graph: &BuildingGraph,
    configs: &[BuildingConfig],
    series: &ExogenousSeries,
    spec: &RolloutSpec,
) -> Result<Rollout, AgentError> {
    let mut env = Environment::new(configs.to_vec(), series.clone())?;
    let mut policy = StemsPolicy::deterministic(model, graph);
    rollout(&mut env, &mut policy, spec)
}

pub fn evaluate_rule_based(
    configs: &[BuildingConfig],
    series: &ExogenousSeries,
    schedule: &RuleSchedule,
    spec: &RolloutSpec,
) -> Result<Rollout, AgentError> {
    let mut env = Environment::new(configs.to_vec(), series.clone())?;
    rollout(&mut env, &mut RuleBasedPolicy { schedule: *schedule }, spec)
}
