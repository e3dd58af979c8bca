//! Control-barrier safety filter: per-building constraint margins, exact
//! projection onto the safe action set, a conservative emergency rule, and
//! the sequential multi-building loop that shares the grid limit.

mod barrier;
mod multi;
mod project;

pub use barrier::{h_battery, h_grid, h_power, verify, ConstraintEval, LocalContext, SATISFACTION_TOL};
pub use multi::{shield_all, total_grid_import, MarginSchedule, SafetySpec, ShieldKind, ShieldResult};
pub use project::{emergency_action, project, FeasibleSet, Infeasible};
