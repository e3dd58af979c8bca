//! Single-building physics: electrical balance, battery state of charge and a
//! first-order lumped RC thermal zone.

use serde::{Deserialize, Serialize};

use super::building::BuildingConfig;

/// Net electrical draw `b + p_hvac + p_batt - p_solar` (kW); negative values export.
pub fn net_consumption(load: f64, p_hvac: f64, p_batt: f64, p_solar: f64) -> f64 {
    load + p_hvac + p_batt - p_solar
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocUpdate {
    pub soc: f64,
    /// Set when the raw update left `[0, 1]` and had to be clamped.
    pub clamped: bool,
}

/// Next state of charge before any clamping.
pub fn soc_next_unclamped(soc: f64, p_batt: f64, dt: f64, config: &BuildingConfig) -> f64 {
    let cap = config.battery_capacity;
    if p_batt > 0.0 {
        soc + config.charge_eff * p_batt * dt / cap
    } else {
        soc + p_batt * dt / (cap * config.discharge_eff)
    }
}

/// Battery power that moves `soc` exactly to `target` in one step; inverse of
/// [`soc_next_unclamped`].
pub fn battery_power_for_soc(soc: f64, target: f64, dt: f64, config: &BuildingConfig) -> f64 {
    let delta = target - soc;
    let cap = config.battery_capacity;
    if delta > 0.0 {
        delta * cap / (config.charge_eff * dt)
    } else {
        delta * cap * config.discharge_eff / dt
    }
}

pub fn soc_update(soc: f64, p_batt: f64, dt: f64, config: &BuildingConfig) -> SocUpdate {
    let raw = soc_next_unclamped(soc, p_batt, dt, config);
    let clamped = !(0.0..=1.0).contains(&raw);
    SocUpdate {
        soc: raw.clamp(0.0, 1.0),
        clamped,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HvacMode {
    Cool,
    Heat,
}

impl HvacMode {
    /// Auto-changeover: the heat pump always works toward the setpoint.
    pub fn toward_setpoint(t_in: f64, t_ref: f64) -> HvacMode {
        if t_in > t_ref {
            HvacMode::Cool
        } else {
            HvacMode::Heat
        }
    }

    fn sign(self) -> f64 {
        match self {
            HvacMode::Cool => -1.0,
            HvacMode::Heat => 1.0,
        }
    }
}

/// One explicit Euler step of `C dT/dt = U (T_out - T_in) ± COP * P_hvac`.
pub fn thermal_update(
    t_in: f64,
    t_out: f64,
    p_hvac: f64,
    mode: HvacMode,
    dt: f64,
    config: &BuildingConfig,
) -> f64 {
    let envelope = config.thermal_conductance * (t_out - t_in);
    let hvac = mode.sign() * config.hvac_cop * p_hvac;
    t_in + dt / config.thermal_capacitance * (envelope + hvac)
}
