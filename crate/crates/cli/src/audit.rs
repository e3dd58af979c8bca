use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stems::shield::shield_all;
use stems::sim::{Action, Environment};

use crate::{write_atomic, CliError, RunConfig};

/// One proposed action. Extra columns are ignored, so an audit's own output
/// can be audited again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionRow {
    pub t: usize,
    pub building_id: usize,
    pub p_batt: f64,
    pub p_hvac: f64,
}

/// The shield's verdict on one proposed action. `p_batt` and `p_hvac` hold
/// the action that was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: usize,
    pub building_id: usize,
    pub p_batt: f64,
    pub p_hvac: f64,
    pub raw_p_batt: f64,
    pub raw_p_hvac: f64,
    pub kind: String,
    pub distance: f64,
    pub h_battery: f64,
    pub h_power: f64,
    pub h_grid: f64,
    pub infeasible: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditSummary {
    pub steps: usize,
    pub passed: usize,
    pub projected: usize,
    pub emergency: usize,
    /// Smallest margin of any applied action over all three families.
    pub min_margin: f64,
    pub out: PathBuf,
    pub rows: Vec<AuditRow>,
}

pub fn read_actions_csv<R: Read>(reader: R) -> Result<Vec<ActionRow>, CliError> {
    let mut rows = Vec::new();
    for (k, r) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let row: ActionRow = r.map_err(|e| CliError::Input(format!("actions row {}: {e}", k + 1)))?;
        if !(row.p_batt.is_finite() && row.p_hvac.is_finite()) {
            return Err(CliError::Input(format!("actions row {}: non-finite action", k + 1)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Group rows by step into building order. Steps must run 0, 1, 2, ...
/// without gaps and name every building exactly once.
fn schedule(rows: &[ActionRow], ids: &[usize], horizon: usize) -> Result<Vec<Vec<Action>>, CliError> {
    let col: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut by_t: BTreeMap<usize, Vec<Option<Action>>> = BTreeMap::new();
    for r in rows {
        let &k = col.get(&r.building_id).ok_or_else(|| CliError::Input(format!("unknown building_id {}", r.building_id)))?;
        let slot = &mut by_t.entry(r.t).or_insert_with(|| vec![None; ids.len()])[k];
        if slot.is_some() {
            return Err(CliError::Input(format!("duplicate action for building {} at t={}", r.building_id, r.t)));
        }
        *slot = Some(Action { p_batt: r.p_batt, p_hvac: r.p_hvac });
    }
    let steps = by_t.len();
    if steps > horizon {
        return Err(CliError::Input(format!("{steps} steps of actions for a {horizon}-step scenario")));
    }
    by_t.into_iter()
        .enumerate()
        .map(|(expect, (t, acts))| {
            if t != expect {
                return Err(CliError::Input(format!("actions skip step {expect}")));
            }
            acts.into_iter()
                .zip(ids)
                .map(|(a, id)| a.ok_or_else(|| CliError::Input(format!("no action for building {id} at t={t}"))))
                .collect()
        })
        .collect()
}

/// Replay a recorded action sequence from the scenario's initial state,
/// shielding every step, and write one audit row per proposed action.
/// `out` defaults to `<output dir>/shield_audit.csv`.
pub fn cmd_shield_audit(cfg: &RunConfig, actions: &Path, out: Option<&Path>) -> Result<AuditSummary, CliError> {
    cfg.validate()?;
    let series = cfg.series()?;
    let configs = cfg.building_configs(&series)?;
    let ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
    let file = std::fs::File::open(actions).map_err(|e| CliError::Input(format!("{}: {e}", actions.display())))?;
    let rows = read_actions_csv(std::io::BufReader::new(file))?;
    let mut env = Environment::new(configs, series)?;
    let plan = schedule(&rows, &ids, env.horizon())?;

    let safety = cfg.safety;
    let mut audit = Vec::with_capacity(rows.len());
    let (mut passed, mut projected, mut emergency) = (0, 0, 0);
    let mut min_margin = f64::INFINITY;
    for (t, raw) in plan.iter().enumerate() {
        let results = {
            let exo = env.exo()?;
            shield_all(env.states(), raw, env.effective_configs(), &exo, &safety)
        };
        for (k, r) in results.iter().enumerate() {
            match r.kind.as_str() {
                "passed" => passed += 1,
                "projected" => projected += 1,
                _ => emergency += 1,
            }
            let e = r.evals_after;
            min_margin = min_margin.min(e.h_battery).min(e.h_power).min(e.h_grid);
            audit.push(AuditRow {
                t,
                building_id: ids[k],
                p_batt: r.safe_action.p_batt,
                p_hvac: r.safe_action.p_hvac,
                raw_p_batt: raw[k].p_batt,
                raw_p_hvac: raw[k].p_hvac,
                kind: r.kind.as_str().to_string(),
                distance: r.distance,
                h_battery: e.h_battery,
                h_power: e.h_power,
                h_grid: e.h_grid,
                infeasible: r.infeasible.map(|i| i.to_string()).unwrap_or_default(),
            });
        }
        let safe: Vec<Action> = results.iter().map(|r| r.safe_action).collect();
        env.step(&safe)?;
    }

    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir().join("shield_audit.csv"));
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &audit {
        w.serialize(row)?;
    }
    write_atomic(&path, &w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)?;
    Ok(AuditSummary { steps: plan.len(), passed, projected, emergency, min_margin, out: path, rows: audit })
}
