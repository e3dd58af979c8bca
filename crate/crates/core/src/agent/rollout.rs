use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::metrics::{
    reward, rule_based_policy, violation_flags, EpisodeLog, MetricsSpec, RewardComponents, RewardWeights, RuleSchedule,
    StepLog, SystemSnapshot,
};
use crate::shield::{shield_all, SafetySpec, ShieldKind};
use crate::sim::{Action, BuildingConfig, BuildingState, Environment, ExoAt, SimError};

/// Anything that maps the current situation to one raw action per building.
pub trait Policy {
    fn act(
        &mut self,
        states: &[BuildingState],
        exo: &ExoAt<'_>,
        configs: &[BuildingConfig],
    ) -> Result<Vec<Action>, super::AgentError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedPolicy {
    pub schedule: RuleSchedule,
}

impl Policy for RuleBasedPolicy {
    fn act(
        &mut self,
        states: &[BuildingState],
        exo: &ExoAt<'_>,
        configs: &[BuildingConfig],
    ) -> Result<Vec<Action>, super::AgentError> {
        Ok(states
            .iter()
            .zip(configs)
            .map(|(s, c)| rule_based_policy(s, exo.hour_of_day, c, &self.schedule, exo.dt))
            .collect())
    }
}

/// Independent uniform draws over each device box.
#[derive(Debug, Clone)]
pub struct UniformRandomPolicy {
    pub rng: ChaCha8Rng,
}

impl Policy for UniformRandomPolicy {
    fn act(
        &mut self,
        states: &[BuildingState],
        _exo: &ExoAt<'_>,
        configs: &[BuildingConfig],
    ) -> Result<Vec<Action>, super::AgentError> {
        Ok(configs
            .iter()
            .take(states.len())
            .map(|c| {
                let lim = c.battery_power_limit;
                Action::new(self.rng.random_range(-lim..=lim), self.rng.random_range(0.0..=c.hvac_power_max))
            })
            .collect())
    }
}

/// How a rollout treats safety and scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSpec {
    /// Pass actions through the shield; otherwise they are only clamped to the device box.
    pub shielded: bool,
    pub safety: SafetySpec,
    pub rewards: RewardWeights,
    pub metrics: MetricsSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShieldCounts {
    pub passed: usize,
    pub projected: usize,
    pub emergency: usize,
    /// Steps on which the proposed action broke each constraint family.
    pub battery_breaches: usize,
    pub power_breaches: usize,
    pub grid_breaches: usize,
}

/// Everything recorded while running one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub log: EpisodeLog,
    /// `[t][i]` raw policy output.
    pub raw_actions: Vec<Vec<Action>>,
    /// `[t][i]` executed actions.
    pub safe_actions: Vec<Vec<Action>>,
    /// `[t][i]` reward of building `i` for step `t`.
    pub rewards: Vec<Vec<f64>>,
    /// Per building, components summed over the episode.
    pub component_sums: Vec<RewardComponents>,
    pub shield: ShieldCounts,
}

impl Rollout {
    /// Per-building episode return averaged over buildings.
    pub fn mean_return(&self) -> f64 {
        let n = self.rewards.first().map_or(1, |r| r.len()).max(1);
        self.rewards.iter().flatten().sum::<f64>() / n as f64
    }

    pub fn mean_components(&self) -> RewardComponents {
        let n = self.component_sums.len().max(1) as f64;
        let mut c = RewardComponents::default();
        for s in &self.component_sums {
            c.economic += s.economic / n;
            c.stability += s.stability / n;
            c.comfort += s.comfort / n;
            c.renewable += s.renewable / n;
        }
        c
    }

    /// Building-steps violating a battery, power or grid bound.
    pub fn hard_violations(&self) -> usize {
        self.log.steps.iter().flat_map(|s| &s.violations).filter(|v| v.battery || v.power || v.grid).count()
    }
}

/// Run `policy` from the environment's current state to the end of its horizon.
pub fn rollout(env: &mut Environment, policy: &mut dyn Policy, spec: &RolloutSpec) -> Result<Rollout, super::AgentError> {
    let n = env.n();
    let mut log = EpisodeLog::new(env.series().dt, env.series().steps_per_day());
    let mut out = Rollout {
        log: EpisodeLog::new(0.0, 0),
        raw_actions: Vec::with_capacity(env.horizon()),
        safe_actions: Vec::with_capacity(env.horizon()),
        rewards: Vec::with_capacity(env.horizon()),
        component_sums: vec![RewardComponents::default(); n],
        shield: ShieldCounts::default(),
    };
    while !env.done() {
        let states = env.states().to_vec();
        let configs = env.effective_configs().to_vec();
        let (raw, safe, price, carbon, dt) = {
            let exo = env.exo()?;
            let raw = policy.act(&states, &exo, &configs)?;
            if raw.len() != n {
                return Err(SimError::LengthMismatch(format!("policy returned {} actions for {n} buildings", raw.len())).into());
            }
            let safe: Vec<Action> = if spec.shielded {
                let results = shield_all(&states, &raw, &configs, &exo, &spec.safety);
                for r in &results {
                    match r.kind {
                        ShieldKind::Passed => out.shield.passed += 1,
                        ShieldKind::Projected => out.shield.projected += 1,
                        ShieldKind::Emergency => out.shield.emergency += 1,
                    }
                    out.shield.battery_breaches += usize::from(!r.evals_before.battery_ok);
                    out.shield.power_breaches += usize::from(!r.evals_before.power_ok);
                    out.shield.grid_breaches += usize::from(!r.evals_before.grid_ok);
                }
                results.iter().map(|r| r.safe_action).collect()
            } else {
                raw.iter().zip(&configs).map(|(a, c)| a.clamp_to_box(c)).collect()
            };
            (raw, safe, exo.price, exo.carbon, exo.dt)
        };
        let outcomes = env.step(&safe)?;
        let nets: Vec<f64> = outcomes.iter().map(|o| o.net).collect();
        let t_in: Vec<f64> = outcomes.iter().map(|o| o.next_state.t_in).collect();
        let soc_raw: Vec<f64> = outcomes.iter().map(|o| o.soc_unclamped).collect();
        let system = SystemSnapshot { nets: &nets, p_grid_max: spec.safety.p_grid_max, dt };
        let mut step_rewards = Vec::with_capacity(n);
        for i in 0..n {
            let (r, parts) = reward(&outcomes[i].reward_inputs, states[i].prev_net, &configs[i], &system, &spec.rewards);
            step_rewards.push(r);
            let acc = &mut out.component_sums[i];
            acc.economic += parts.economic;
            acc.stability += parts.stability;
            acc.comfort += parts.comfort;
            acc.renewable += parts.renewable;
        }
        let violations =
            violation_flags(&soc_raw, &nets, &t_in, &configs, spec.safety.p_grid_max, spec.metrics.comfort_band);
        log.push(StepLog { price, carbon, nets, t_in, violations });
        out.raw_actions.push(raw);
        out.safe_actions.push(safe);
        out.rewards.push(step_rewards);
    }
    out.log = log;
    Ok(out)
}
