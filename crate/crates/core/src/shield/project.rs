use serde::{Deserialize, Serialize};

use super::barrier::{LocalContext, SATISFACTION_TOL};
use crate::sim::{battery_power_for_soc, Action, BuildingConfig, BuildingState};

/// Which constraint left no safe action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum Infeasible {
    #[error("no battery power keeps the SOC inside its (tightened) bounds")]
    Battery,
    #[error("granted grid headroom is below the required margin")]
    Grid,
    #[error("device limits cannot bring net consumption within the power and grid bounds")]
    Power,
}

/// The safe set of one building. Every constraint is linear in the action,
/// so it is the rectangle `[x_lo, x_hi] x [y_lo, y_hi]` in
/// `(p_batt, p_hvac)` cut by the slab `s_lo <= p_batt + p_hvac <= s_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleSet {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
}

impl FeasibleSet {
    pub fn new(state: &BuildingState, config: &BuildingConfig, ctx: &LocalContext) -> Result<Self, Infeasible> {
        let (tb, tp, tg) = ctx.thresholds(config);
        let lim = config.battery_power_limit;
        let x_lo = (-lim).max(battery_power_for_soc(state.soc, config.soc_min + tb, ctx.dt, config));
        let x_hi = lim.min(battery_power_for_soc(state.soc, config.soc_max - tb, ctx.dt, config));
        if x_lo > x_hi + SATISFACTION_TOL {
            return Err(Infeasible::Battery);
        }
        let grid_cap = ctx.headroom - tg;
        if grid_cap < -SATISFACTION_TOL {
            return Err(Infeasible::Grid);
        }
        let offset = ctx.load - ctx.solar;
        let p_cap = config.p_building_max - tp;
        let set = FeasibleSet {
            x_lo,
            x_hi: x_hi.max(x_lo),
            y_lo: 0.0,
            y_hi: config.hvac_power_max,
            s_lo: -p_cap - offset,
            s_hi: p_cap.min(grid_cap.max(0.0)) - offset,
        };
        if set.s_lo > set.s_hi + SATISFACTION_TOL
            || set.x_lo + set.y_lo > set.s_hi + SATISFACTION_TOL
            || set.x_hi + set.y_hi < set.s_lo - SATISFACTION_TOL
        {
            return Err(Infeasible::Power);
        }
        Ok(set)
    }

    pub fn contains(&self, a: &Action, tol: f64) -> bool {
        let s = a.p_batt + a.p_hvac;
        a.p_batt >= self.x_lo - tol
            && a.p_batt <= self.x_hi + tol
            && a.p_hvac >= self.y_lo - tol
            && a.p_hvac <= self.y_hi + tol
            && s >= self.s_lo - tol
            && s <= self.s_hi + tol
    }

    fn clamp_rect(&self, a: &Action) -> Action {
        Action::new(a.p_batt.clamp(self.x_lo, self.x_hi), a.p_hvac.clamp(self.y_lo, self.y_hi))
    }

    /// Closest point to `a` on the line `x + y = s` inside the rectangle.
    fn on_line(&self, a: &Action, s: f64) -> Option<Action> {
        let lo = self.x_lo.max(s - self.y_hi);
        let hi = self.x_hi.min(s - self.y_lo);
        if lo > hi + SATISFACTION_TOL {
            return None;
        }
        let x = ((a.p_batt - a.p_hvac + s) / 2.0).clamp(lo, hi.max(lo));
        Some(Action::new(x, (s - x).clamp(self.y_lo, self.y_hi)))
    }

    /// Euclidean projection of `a` onto the set.
    pub fn project(&self, a: &Action) -> Action {
        if self.contains(a, 0.0) {
            return *a;
        }
        let clamped = self.clamp_rect(a);
        if self.contains(&clamped, 0.0) {
            return clamped;
        }
        [self.s_lo, self.s_hi]
            .into_iter()
            .filter_map(|s| self.on_line(a, s))
            .filter(|u| self.contains(u, SATISFACTION_TOL))
            .min_by(|u, v| u.distance(a).total_cmp(&v.distance(a)))
            .unwrap_or(clamped)
    }
}

/// Closest action to `action` that satisfies every constraint in `ctx`.
pub fn project(
    action: &Action,
    state: &BuildingState,
    config: &BuildingConfig,
    ctx: &LocalContext,
) -> Result<Action, Infeasible> {
    Ok(FeasibleSet::new(state, config, ctx)?.project(action))
}

/// Fallback when no safe action exists: HVAC off, battery moved toward mid
/// SOC as far as the SOC bounds, device limit and the building's own net
/// bounds allow. Tightening margins are ignored here.
pub fn emergency_action(state: &BuildingState, config: &BuildingConfig, ctx: &LocalContext) -> Action {
    let mid = 0.5 * (config.soc_min + config.soc_max);
    let target = battery_power_for_soc(state.soc, mid, ctx.dt, config);
    let lim = config.battery_power_limit;
    let offset = ctx.load - ctx.solar;
    let lo = [
        -lim,
        battery_power_for_soc(state.soc, config.soc_min, ctx.dt, config),
        -config.p_building_max - offset,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let hi = [
        lim,
        battery_power_for_soc(state.soc, config.soc_max, ctx.dt, config),
        config.p_building_max.min(ctx.headroom) - offset,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if lo > hi {
        return Action::ZERO;
    }
    Action::new(target.clamp(lo, hi), 0.0)
}
