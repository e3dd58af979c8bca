use super::building::{Action, BuildingConfig, BuildingState};
use super::dynamics::{net_consumption, soc_update, thermal_update, HvacMode};
use super::series::{ExoAt, ExogenousSeries};
use super::SimError;

/// Quantities the reward and metric code needs from one building-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardInputs {
    pub net: f64,
    pub solar: f64,
    pub load: f64,
    /// Indoor temperature after the step.
    pub t_in: f64,
    pub price: f64,
    pub carbon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: BuildingState,
    pub net: f64,
    /// Raw state of charge before clamping to `[0, 1]`.
    pub soc_unclamped: f64,
    pub soc_clamped: bool,
    pub reward_inputs: RewardInputs,
}

/// Advance every building one step. `configs` must already carry the series'
/// weather adjustment (see [`ExogenousSeries::effective_config`]). Buildings do
/// not interact physically.
pub fn step(
    states: &[BuildingState],
    actions: &[Action],
    exo: &ExoAt<'_>,
    configs: &[BuildingConfig],
) -> Result<Vec<StepOutcome>, SimError> {
    let n = configs.len();
    if n == 0 {
        return Err(SimError::Config("empty building set".into()));
    }
    if states.len() != n || actions.len() != n || exo.load.len() != n {
        return Err(SimError::LengthMismatch(format!(
            "{n} configs, {} states, {} actions, {} exogenous columns",
            states.len(),
            actions.len(),
            exo.load.len()
        )));
    }
    let dt = exo.dt;
    let out = (0..n)
        .map(|i| {
            let (s, a, c) = (&states[i], &actions[i], &configs[i]);
            let soc = soc_update(s.soc, a.p_batt, dt, c);
            let mode = HvacMode::toward_setpoint(s.t_in, c.t_ref);
            let t_in = thermal_update(s.t_in, exo.t_out, a.p_hvac, mode, dt, c);
            let net = net_consumption(exo.load[i], a.p_hvac, a.p_batt, exo.solar[i]);
            StepOutcome {
                next_state: BuildingState {
                    soc: soc.soc,
                    t_in,
                    prev_net: net,
                },
                net,
                soc_unclamped: super::dynamics::soc_next_unclamped(s.soc, a.p_batt, dt, c),
                soc_clamped: soc.clamped,
                reward_inputs: RewardInputs {
                    net,
                    solar: exo.solar[i],
                    load: exo.load[i],
                    t_in,
                    price: exo.price,
                    carbon: exo.carbon,
                },
            }
        })
        .collect();
    Ok(out)
}

/// Stateful wrapper owning one episode's buildings and exogenous series.
#[derive(Debug, Clone)]
pub struct Environment {
    configs: Vec<BuildingConfig>,
    effective: Vec<BuildingConfig>,
    series: ExogenousSeries,
    states: Vec<BuildingState>,
    t: usize,
}

impl Environment {
    pub fn new(configs: Vec<BuildingConfig>, series: ExogenousSeries) -> Result<Self, SimError> {
        if configs.is_empty() {
            return Err(SimError::Config("empty building set".into()));
        }
        for c in &configs {
            c.validate()?;
        }
        series.validate()?;
        let cfg_ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
        if cfg_ids != series.building_ids {
            return Err(SimError::Config(format!(
                "config ids {cfg_ids:?} do not match series ids {:?}",
                series.building_ids
            )));
        }
        let effective = configs.iter().map(|c| series.effective_config(c)).collect();
        let states = configs.iter().map(|c| c.initial_state()).collect();
        Ok(Environment {
            configs,
            effective,
            series,
            states,
            t: 0,
        })
    }

    pub fn reset(&mut self) {
        self.states = self.configs.iter().map(|c| c.initial_state()).collect();
        self.t = 0;
    }

    pub fn n(&self) -> usize {
        self.configs.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn horizon(&self) -> usize {
        self.series.horizon
    }

    pub fn done(&self) -> bool {
        self.t >= self.series.horizon
    }

    pub fn states(&self) -> &[BuildingState] {
        &self.states
    }

    pub fn configs(&self) -> &[BuildingConfig] {
        &self.configs
    }

    /// Configs with the weather adjustment applied; what the physics and the shield see.
    pub fn effective_configs(&self) -> &[BuildingConfig] {
        &self.effective
    }

    pub fn series(&self) -> &ExogenousSeries {
        &self.series
    }

    pub fn exo(&self) -> Result<ExoAt<'_>, SimError> {
        self.series.at(self.t)
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<Vec<StepOutcome>, SimError> {
        let exo = self.series.at(self.t)?;
        let out = step(&self.states, actions, &exo, &self.effective)?;
        for (s, o) in self.states.iter_mut().zip(&out) {
            *s = o.next_state;
        }
        self.t += 1;
        Ok(out)
    }
}
