use serde::{Deserialize, Serialize};

use crate::sim::{BuildingConfig, RewardInputs};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub mu: f64,
    pub alpha_grid: f64,
    pub alpha_build: f64,
    pub beta_ramp: f64,
    pub lambda_indoor: f64,
    pub xi: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { mu: 1.0, alpha_grid: 0.5, alpha_build: 0.3, beta_ramp: 0.2, lambda_indoor: 0.4, xi: 0.6 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.mu, self.alpha_grid, self.alpha_build, self.beta_ramp, self.lambda_indoor, self.xi];
        if all.iter().any(|w| !(*w >= 0.0)) {
            return Err(format!("reward weights must be non-negative: {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub economic: f64,
    pub stability: f64,
    pub comfort: f64,
    pub renewable: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.economic + self.stability + self.comfort + self.renewable
    }
}

/// System-wide quantities the grid term needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSnapshot<'a> {
    pub nets: &'a [f64],
    pub p_grid_max: f64,
    pub dt: f64,
}

pub fn r_economic(net: f64, price: f64, mu: f64, dt: f64) -> f64 {
    -mu * price * net * dt
}

pub fn r_stability(
    net: f64,
    prev_net: f64,
    all_nets: &[f64],
    weights: &RewardWeights,
    p_building_max: f64,
    p_grid_max: f64,
) -> f64 {
    let import: f64 = all_nets.iter().map(|e| e.max(0.0)).sum();
    let grid = (1.0 - import / p_grid_max).powi(2);
    weights.alpha_grid * grid + weights.alpha_build * (1.0 - net.abs() / p_building_max)
        - weights.beta_ramp * (net - prev_net).abs() / p_building_max
}

pub fn r_comfort(t_in: f64, t_ref: f64, lambda_indoor: f64) -> f64 {
    -lambda_indoor * (t_in - t_ref).powi(2)
}

/// Share of demand covered by local generation; `0/0` counts as zero.
pub fn r_renewable(solar: f64, net: f64, xi: f64) -> f64 {
    let denom = solar + net.max(0.0);
    if denom <= 0.0 {
        return 0.0;
    }
    xi * (solar / denom).min(1.0)
}

/// Reward of one building for one step. Returns the total and its parts;
/// the total is exactly `components.total()`.
pub fn reward(
    inputs: &RewardInputs,
    prev_net: f64,
    config: &BuildingConfig,
    system: &SystemSnapshot<'_>,
    weights: &RewardWeights,
) -> (f64, RewardComponents) {
    let c = RewardComponents {
        economic: r_economic(inputs.net, inputs.price, weights.mu, system.dt),
        stability: r_stability(inputs.net, prev_net, system.nets, weights, config.p_building_max, system.p_grid_max),
        comfort: r_comfort(inputs.t_in, config.t_ref, weights.lambda_indoor),
        renewable: r_renewable(inputs.solar, inputs.net, weights.xi),
    };
    (c.total(), c)
}
