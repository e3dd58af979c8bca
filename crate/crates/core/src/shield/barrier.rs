use serde::{Deserialize, Serialize};

use crate::sim::{net_consumption, soc_next_unclamped, Action, BuildingConfig, BuildingState};

/// Margins down to `-SATISFACTION_TOL` still count as satisfied.
pub const SATISFACTION_TOL: f64 = 1e-9;

/// `min(soc_max - soc', soc' - soc_min)` for the unclamped next SOC.
pub fn h_battery(state: &BuildingState, action: &Action, config: &BuildingConfig, dt: f64) -> f64 {
    let next = soc_next_unclamped(state.soc, action.p_batt, dt, config);
    (config.soc_max - next).min(next - config.soc_min)
}

pub fn h_power(net: f64, config: &BuildingConfig) -> f64 {
    config.p_building_max - net.abs()
}

pub fn h_grid(nets: &[f64], p_grid_max: f64) -> f64 {
    p_grid_max - nets.iter().map(|n| n.max(0.0)).sum::<f64>()
}

/// What one building's check needs besides its own state and config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalContext {
    pub dt: f64,
    pub load: f64,
    pub solar: f64,
    /// Grid import granted to this building (kW).
    pub headroom: f64,
    /// Tightening as a fraction: SOC margins are compared against it
    /// directly, power and grid margins against `margin * limit`.
    pub margin: f64,
    pub p_grid_max: f64,
}

impl LocalContext {
    pub fn net(&self, action: &Action) -> f64 {
        net_consumption(self.load, action.p_hvac, action.p_batt, self.solar)
    }

    pub(crate) fn thresholds(&self, config: &BuildingConfig) -> (f64, f64, f64) {
        (self.margin, self.margin * config.p_building_max, self.margin * self.p_grid_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintEval {
    pub h_battery: f64,
    pub h_power: f64,
    pub h_grid: f64,
    pub battery_ok: bool,
    pub power_ok: bool,
    pub grid_ok: bool,
}

impl ConstraintEval {
    pub fn all_satisfied(&self) -> bool {
        self.battery_ok && self.power_ok && self.grid_ok
    }
}

/// Evaluate all three margins; the grid margin is measured against the
/// headroom granted in `ctx`.
pub fn verify(state: &BuildingState, action: &Action, config: &BuildingConfig, ctx: &LocalContext) -> ConstraintEval {
    let net = ctx.net(action);
    let hb = h_battery(state, action, config, ctx.dt);
    let hp = h_power(net, config);
    let hg = h_grid(&[net], ctx.headroom);
    let (tb, tp, tg) = ctx.thresholds(config);
    ConstraintEval {
        h_battery: hb,
        h_power: hp,
        h_grid: hg,
        battery_ok: hb >= tb - SATISFACTION_TOL,
        power_ok: hp >= tp - SATISFACTION_TOL,
        grid_ok: hg >= tg - SATISFACTION_TOL,
    }
}
