use serde::{Deserialize, Serialize};

use super::barrier::{verify, ConstraintEval, LocalContext};
use super::project::{emergency_action, FeasibleSet, Infeasible};
use crate::sim::{net_consumption, Action, BuildingConfig, BuildingState, ExoAt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetySpec {
    /// System-wide import limit (kW).
    pub p_grid_max: f64,
    /// Constraint tightening, as a fraction (see [`LocalContext::margin`]).
    pub margin: f64,
}

impl Default for SafetySpec {
    fn default() -> Self {
        SafetySpec { p_grid_max: 150.0, margin: 0.0 }
    }
}

impl SafetySpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_grid_max > 0.0) {
            return Err(format!("p_grid_max must be positive, got {}", self.p_grid_max));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(format!("margin must lie in [0, 0.5), got {}", self.margin));
        }
        Ok(())
    }
}

/// Linear decay of the tightening margin, updated every `every` episodes and
/// reaching zero after `episodes`. `initial = 0` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginSchedule {
    pub initial: f64,
    pub every: usize,
    pub episodes: usize,
}

impl Default for MarginSchedule {
    fn default() -> Self {
        MarginSchedule { initial: 0.0, every: 10, episodes: 100 }
    }
}

impl MarginSchedule {
    pub fn margin_at(&self, episode: usize) -> f64 {
        if self.initial == 0.0 || self.episodes == 0 {
            return 0.0;
        }
        let every = self.every.max(1);
        let stage = (episode / every * every) as f64;
        self.initial * (1.0 - stage / self.episodes as f64).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShieldKind {
    Passed,
    Projected,
    Emergency,
}

impl ShieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShieldKind::Passed => "passed",
            ShieldKind::Projected => "projected",
            ShieldKind::Emergency => "emergency",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShieldResult {
    /// The policy's action after clamping to the device box.
    pub proposed: Action,
    pub safe_action: Action,
    pub kind: ShieldKind,
    pub evals_before: ConstraintEval,
    pub evals_after: ConstraintEval,
    /// `‖safe_action − proposed‖`.
    pub distance: f64,
    pub headroom: f64,
    /// Net consumption under `safe_action`.
    pub net: f64,
    pub infeasible: Option<Infeasible>,
}

/// Total positive net consumption, the quantity bounded by `p_grid_max`.
pub fn total_grid_import(nets: &[f64]) -> f64 {
    nets.iter().map(|n| n.max(0.0)).sum()
}

/// Shield every building in ascending id order. Building `i` may import
/// whatever the grid limit leaves after the buildings already committed and
/// the zero-action consumption of those still to come. Results are returned
/// in input order.
pub fn shield_all(
    states: &[BuildingState],
    actions: &[Action],
    configs: &[BuildingConfig],
    exo: &ExoAt<'_>,
    spec: &SafetySpec,
) -> Vec<ShieldResult> {
    let n = configs.len();
    assert!(states.len() == n && actions.len() == n, "one state and action per building");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| configs[i].id);

    let baseline: Vec<f64> = (0..n).map(|i| net_consumption(exo.load[i], 0.0, 0.0, exo.solar[i]).max(0.0)).collect();
    let mut pending: f64 = baseline.iter().sum();
    let mut committed = 0.0;
    let mut results: Vec<Option<ShieldResult>> = vec![None; n];

    for &i in &order {
        pending -= baseline[i];
        let ctx = LocalContext {
            dt: exo.dt,
            load: exo.load[i],
            solar: exo.solar[i],
            headroom: spec.p_grid_max - committed - pending.max(0.0),
            margin: spec.margin,
            p_grid_max: spec.p_grid_max,
        };
        let result = shield_one(&states[i], &actions[i], &configs[i], &ctx);
        committed += result.net.max(0.0);
        results[i] = Some(result);
    }
    results.into_iter().map(|r| r.expect("every building visited")).collect()
}

fn shield_one(state: &BuildingState, raw: &Action, config: &BuildingConfig, ctx: &LocalContext) -> ShieldResult {
    let proposed = raw.clamp_to_box(config);
    let before = verify(state, &proposed, config, ctx);
    let (safe, kind, infeasible) = if before.all_satisfied() {
        (proposed, ShieldKind::Passed, None)
    } else {
        match FeasibleSet::new(state, config, ctx) {
            Ok(set) => (set.project(&proposed), ShieldKind::Projected, None),
            Err(cause) => (emergency_action(state, config, ctx), ShieldKind::Emergency, Some(cause)),
        }
    };
    ShieldResult {
        proposed,
        safe_action: safe,
        kind,
        evals_before: before,
        evals_after: verify(state, &safe, config, ctx),
        distance: safe.distance(&proposed),
        headroom: ctx.headroom,
        net: ctx.net(&safe),
        infeasible,
    }
}
