use serde::{Deserialize, Serialize};

use crate::sim::{battery_power_for_soc, Action, BuildingConfig, BuildingState};

/// Time-of-use battery schedule and thermostat deadband of the rule-based
/// controller. Hour windows are half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleSchedule {
    pub charge_hours: [f64; 2],
    pub discharge_hours: [f64; 2],
    pub deadband: f64,
}

impl Default for RuleSchedule {
    fn default() -> Self {
        RuleSchedule { charge_hours: [0.0, 6.0], discharge_hours: [17.0, 21.0], deadband: 1.0 }
    }
}

fn in_window(hour: f64, [start, end]: [f64; 2]) -> bool {
    if start <= end {
        hour >= start && hour < end
    } else {
        hour >= start || hour < end
    }
}

pub fn rule_based_policy(
    state: &BuildingState,
    hour_of_day: f64,
    config: &BuildingConfig,
    schedule: &RuleSchedule,
    dt: f64,
) -> Action {
    let lim = config.battery_power_limit;
    let p_batt = if in_window(hour_of_day, schedule.charge_hours) {
        battery_power_for_soc(state.soc, config.soc_max, dt, config).clamp(0.0, lim)
    } else if in_window(hour_of_day, schedule.discharge_hours) {
        battery_power_for_soc(state.soc, config.soc_min, dt, config).clamp(-lim, 0.0)
    } else {
        0.0
    };
    let p_hvac = if (state.t_in - config.t_ref).abs() > schedule.deadband {
        config.hvac_power_max
    } else {
        0.0
    };
    Action::new(p_batt, p_hvac)
}
