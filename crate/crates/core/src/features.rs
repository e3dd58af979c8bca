//! Node feature assembly `x_i^t = [s_i^t, e_i^t, c_i^t]` and the z-score
//! statistics recorded from a calibration rollout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::sim::{BuildingConfig, BuildingState, ExoAt};

/// Building state block: soc, indoor temperature, previous net, current non-shiftable load.
pub const STATE_DIM: usize = 4;
/// Environment block: outdoor temperature, solar, price, hour-of-day (sin, cos).
pub const ENV_DIM: usize = 5;
/// Characteristics block: type one-hot, capacity, charge/discharge efficiency, COP.
pub const CHAR_DIM: usize = 7;
pub const FEATURE_DIM: usize = STATE_DIM + ENV_DIM + CHAR_DIM;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "soc",
    "t_in",
    "prev_net",
    "load",
    "t_out",
    "solar",
    "price",
    "hour_sin",
    "hour_cos",
    "type_residential",
    "type_commercial",
    "type_mixed",
    "battery_capacity",
    "charge_eff",
    "discharge_eff",
    "hvac_cop",
];

/// Unscaled feature vector for building `i` (position in `exo` columns).
pub fn raw_features(state: &BuildingState, exo: &ExoAt<'_>, i: usize, config: &BuildingConfig) -> Vec<f64> {
    let phase = 2.0 * PI * exo.hour_of_day / 24.0;
    let mut x = Vec::with_capacity(FEATURE_DIM);
    x.extend([state.soc, state.t_in, state.prev_net, exo.load[i]]);
    x.extend([exo.t_out, exo.solar[i], exo.price, phase.sin(), phase.cos()]);
    x.extend(config.attributes());
    debug_assert_eq!(x.len(), FEATURE_DIM);
    x
}

/// Feature-wise mean and scale. Features with (near) zero variance keep unit
/// scale, so they are centred but not rescaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(dim: usize) -> Self {
        FeatureStats {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn fit(samples: &[Vec<f64>]) -> Self {
        let dim = samples.first().map_or(FEATURE_DIM, |s| s.len());
        if samples.is_empty() {
            return FeatureStats::identity(dim);
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for k in 0..dim {
                var[k] += (s[k] - mean[k]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        FeatureStats { mean, scale }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

pub fn node_features(
    state: &BuildingState,
    exo: &ExoAt<'_>,
    i: usize,
    config: &BuildingConfig,
    stats: &FeatureStats,
) -> Vec<f64> {
    stats.apply(&raw_features(state, exo, i, config))
}
