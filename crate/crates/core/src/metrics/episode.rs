use serde::{Deserialize, Serialize};

use crate::shield::SATISFACTION_TOL;
use crate::sim::BuildingConfig;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("episode log is empty")]
    EmptyLogs,
    #[error("step {step} has {got} buildings, expected {expected}")]
    Ragged { step: usize, got: usize, expected: usize },
}

/// Which constraint families count toward the safety-violation rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViolationFamilies {
    pub battery: bool,
    pub power: bool,
    pub grid: bool,
    pub comfort: bool,
}

impl Default for ViolationFamilies {
    fn default() -> Self {
        ViolationFamilies { battery: true, power: true, grid: true, comfort: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSpec {
    /// Indoor range counted as comfortable (°C, inclusive).
    pub comfort_band: [f64; 2],
    pub families: ViolationFamilies,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec { comfort_band: [20.0, 26.0], families: ViolationFamilies::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationFlags {
    pub battery: bool,
    pub power: bool,
    pub grid: bool,
    pub comfort: bool,
}

impl ViolationFlags {
    pub fn any(&self, families: &ViolationFamilies) -> bool {
        (families.battery && self.battery)
            || (families.power && self.power)
            || (families.grid && self.grid)
            || (families.comfort && self.comfort)
    }
}

/// Flags for every building after one executed step. `soc_unclamped` is the
/// next SOC before clamping. A grid breach is charged to the buildings that
/// were importing at the time.
pub fn violation_flags(
    soc_unclamped: &[f64],
    nets: &[f64],
    t_in: &[f64],
    configs: &[BuildingConfig],
    p_grid_max: f64,
    comfort_band: [f64; 2],
) -> Vec<ViolationFlags> {
    let import: f64 = nets.iter().map(|e| e.max(0.0)).sum();
    let grid_breach = import > p_grid_max + SATISFACTION_TOL;
    (0..configs.len())
        .map(|i| {
            let c = &configs[i];
            ViolationFlags {
                battery: soc_unclamped[i] < c.soc_min - SATISFACTION_TOL || soc_unclamped[i] > c.soc_max + SATISFACTION_TOL,
                power: nets[i].abs() > c.p_building_max + SATISFACTION_TOL,
                grid: grid_breach && nets[i] > 0.0,
                comfort: t_in[i] < comfort_band[0] || t_in[i] > comfort_band[1],
            }
        })
        .collect()
}

/// Everything recorded about one step of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub price: f64,
    pub carbon: f64,
    pub nets: Vec<f64>,
    /// Indoor temperatures after the step.
    pub t_in: Vec<f64>,
    pub violations: Vec<ViolationFlags>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub dt: f64,
    pub steps_per_day: usize,
    pub steps: Vec<StepLog>,
}

impl EpisodeLog {
    pub fn new(dt: f64, steps_per_day: usize) -> Self {
        EpisodeLog { dt, steps_per_day, steps: Vec::new() }
    }

    pub fn push(&mut self, step: StepLog) {
        self.steps.push(step);
    }

    pub fn system_totals(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.nets.iter().sum()).collect()
    }
}

pub const METRIC_NAMES: [&str; 7] = [
    "cost",
    "emission",
    "avg_daily_peak",
    "consumption",
    "ramping",
    "discomfort_proportion",
    "safety_violation_rate",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub cost: f64,
    pub emission: f64,
    pub avg_daily_peak: f64,
    /// Energy imported from the grid (kWh).
    pub consumption: f64,
    pub ramping: f64,
    pub discomfort_proportion: f64,
    pub safety_violation_rate: f64,
}

impl EpisodeMetrics {
    pub fn values(&self) -> [f64; 7] {
        [
            self.cost,
            self.emission,
            self.avg_daily_peak,
            self.consumption,
            self.ramping,
            self.discomfort_proportion,
            self.safety_violation_rate,
        ]
    }

    pub fn from_values(v: [f64; 7]) -> Self {
        EpisodeMetrics {
            cost: v[0],
            emission: v[1],
            avg_daily_peak: v[2],
            consumption: v[3],
            ramping: v[4],
            discomfort_proportion: v[5],
            safety_violation_rate: v[6],
        }
    }
}

pub fn episode_metrics(log: &EpisodeLog, spec: &MetricsSpec) -> Result<EpisodeMetrics, MetricsError> {
    let n = log.steps.first().ok_or(MetricsError::EmptyLogs)?.nets.len();
    if n == 0 {
        return Err(MetricsError::EmptyLogs);
    }
    for (k, s) in log.steps.iter().enumerate() {
        for got in [s.nets.len(), s.t_in.len(), s.violations.len()] {
            if got != n {
                return Err(MetricsError::Ragged { step: k, got, expected: n });
            }
        }
    }
    let totals = log.system_totals();
    let steps = totals.len();

    let (mut cost, mut emission, mut consumption) = (0.0, 0.0, 0.0);
    for (s, &e) in log.steps.iter().zip(&totals) {
        let import = e.max(0.0) * log.dt;
        cost += s.price * import;
        emission += s.carbon * import;
        consumption += import;
    }

    let per_day = log.steps_per_day.max(1);
    let whole_days = steps / per_day;
    let avg_daily_peak = if whole_days == 0 {
        log::warn!("episode shorter than one day; peak taken over all {steps} steps");
        totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        if steps % per_day != 0 {
            log::warn!("dropping {} steps of a partial trailing day from the peak metric", steps % per_day);
        }
        let peaks: f64 = totals
            .chunks_exact(per_day)
            .map(|day| day.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        peaks / whole_days as f64
    };

    let ramping = if steps < 2 {
        0.0
    } else {
        totals.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (steps - 1) as f64
    };

    let pairs = (steps * n) as f64;
    let [lo, hi] = spec.comfort_band;
    let uncomfortable = log.steps.iter().flat_map(|s| s.t_in.iter()).filter(|&&t| t < lo || t > hi).count();
    let violating = log
        .steps
        .iter()
        .flat_map(|s| s.violations.iter())
        .filter(|v| v.any(&spec.families))
        .count();

    Ok(EpisodeMetrics {
        cost,
        emission,
        avg_daily_peak,
        consumption,
        ramping,
        discomfort_proportion: uncomfortable as f64 / pairs,
        safety_violation_rate: violating as f64 / pairs,
    })
}

/// Metrics relative to a baseline. Discomfort and the violation rate stay
/// raw proportions. A ratio whose baseline is zero is reported as the
/// absolute value and its name listed in `absolute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub metrics: EpisodeMetrics,
    pub absolute: Vec<String>,
}

pub fn normalize(metrics: &EpisodeMetrics, baseline: &EpisodeMetrics) -> NormalizedMetrics {
    let m = metrics.values();
    let b = baseline.values();
    let mut out = m;
    let mut absolute = Vec::new();
    for k in 0..5 {
        if b[k] == 0.0 {
            absolute.push(METRIC_NAMES[k].to_string());
        } else {
            out[k] = m[k] / b[k];
        }
    }
    NormalizedMetrics { metrics: EpisodeMetrics::from_values(out), absolute }
}
