use serde::{Deserialize, Serialize};

use super::building::BuildingConfig;
use super::SimError;

/// Scalings attached to a series by an extreme-weather perturbation. They are
/// applied to building configs through [`ExogenousSeries::effective_config`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherAdjustment {
    /// Multiplier on the envelope heat exchange, i.e. on the HVAC-driving demand.
    pub envelope_scale: f64,
    /// Multiplier on usable battery capacity.
    pub capacity_derating: f64,
}

impl Default for WeatherAdjustment {
    fn default() -> Self {
        WeatherAdjustment {
            envelope_scale: 1.0,
            capacity_derating: 1.0,
        }
    }
}

/// Exogenous inputs over a horizon: per-building loads and solar, shared
/// weather, tariff and carbon intensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousSeries {
    pub horizon: usize,
    /// Step length in hours.
    pub dt: f64,
    /// Building ids, in the same order as `load` and `solar`.
    pub building_ids: Vec<usize>,
    pub load: Vec<Vec<f64>>,
    pub solar: Vec<Vec<f64>>,
    pub t_out: Vec<f64>,
    pub price: Vec<f64>,
    pub carbon: Vec<f64>,
    #[serde(default)]
    pub adjustment: WeatherAdjustment,
}

/// The slice of exogenous inputs seen at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExoAt<'a> {
    pub t: usize,
    pub dt: f64,
    pub hour_of_day: f64,
    pub load: Vec<f64>,
    pub solar: Vec<f64>,
    pub t_out: f64,
    pub price: f64,
    pub carbon: f64,
    pub adjustment: &'a WeatherAdjustment,
}

impl ExogenousSeries {
    pub fn n_buildings(&self) -> usize {
        self.building_ids.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::InvalidSpec("horizon must be positive".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        let n = self.building_ids.len();
        if n == 0 {
            return Err(SimError::Config("empty building set".into()));
        }
        if self.load.len() != n || self.solar.len() != n {
            return Err(SimError::LengthMismatch(format!(
                "{n} building ids but {} load and {} solar columns",
                self.load.len(),
                self.solar.len()
            )));
        }
        let shared = [("t_out", &self.t_out), ("price", &self.price), ("carbon", &self.carbon)];
        for (name, col) in shared {
            if col.len() != self.horizon {
                return Err(SimError::LengthMismatch(format!(
                    "{name} has {} rows, horizon is {}",
                    col.len(),
                    self.horizon
                )));
            }
        }
        for (k, (load, solar)) in self.load.iter().zip(&self.solar).enumerate() {
            if load.len() != self.horizon || solar.len() != self.horizon {
                return Err(SimError::LengthMismatch(format!(
                    "building {} series length differs from horizon {}",
                    self.building_ids[k], self.horizon
                )));
            }
            if let Some(t) = load.iter().position(|v| !(*v >= 0.0)) {
                return Err(SimError::InvalidSpec(format!(
                    "negative load for building {} at step {t}",
                    self.building_ids[k]
                )));
            }
            if let Some(t) = solar.iter().position(|v| !(*v >= 0.0)) {
                return Err(SimError::InvalidSpec(format!(
                    "negative solar for building {} at step {t}",
                    self.building_ids[k]
                )));
            }
        }
        if let Some(t) = self.price.iter().position(|v| !(*v >= 0.0)) {
            return Err(SimError::InvalidSpec(format!("negative price at step {t}")));
        }
        Ok(())
    }

    pub fn at(&self, t: usize) -> Result<ExoAt<'_>, SimError> {
        if t >= self.horizon {
            return Err(SimError::HorizonExceeded {
                t,
                horizon: self.horizon,
            });
        }
        Ok(ExoAt {
            t,
            dt: self.dt,
            hour_of_day: self.hour_of_day(t),
            load: self.load.iter().map(|col| col[t]).collect(),
            solar: self.solar.iter().map(|col| col[t]).collect(),
            t_out: self.t_out[t],
            price: self.price[t],
            carbon: self.carbon[t],
            adjustment: &self.adjustment,
        })
    }

    pub fn hour_of_day(&self, t: usize) -> f64 {
        (t as f64 * self.dt).rem_euclid(24.0)
    }

    pub fn steps_per_day(&self) -> usize {
        (24.0 / self.dt).round().max(1.0) as usize
    }

    /// Config as seen under this series' weather adjustment.
    pub fn effective_config(&self, config: &BuildingConfig) -> BuildingConfig {
        self.adjustment.apply(config)
    }

    /// Keep steps `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> Result<ExogenousSeries, SimError> {
        if len == 0 || start + len > self.horizon {
            return Err(SimError::InvalidSpec(format!(
                "window [{start}, {}) outside horizon {}",
                start + len,
                self.horizon
            )));
        }
        let cut = |v: &Vec<f64>| v[start..start + len].to_vec();
        Ok(ExogenousSeries {
            horizon: len,
            dt: self.dt,
            building_ids: self.building_ids.clone(),
            load: self.load.iter().map(cut).collect(),
            solar: self.solar.iter().map(cut).collect(),
            t_out: cut(&self.t_out),
            price: cut(&self.price),
            carbon: cut(&self.carbon),
            adjustment: self.adjustment,
        })
    }
}

impl WeatherAdjustment {
    pub fn apply(&self, config: &BuildingConfig) -> BuildingConfig {
        let mut c = config.clone();
        c.battery_capacity *= self.capacity_derating;
        c.thermal_conductance *= self.envelope_scale;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremeWeather {
    HeatWave,
    ColdWave,
}

pub const HEAT_WAVE_BAND: (f64, f64) = (35.0, 40.0);
pub const COLD_WAVE_BAND: (f64, f64) = (-10.0, -4.0);
/// Cooling demand +150 %.
pub const HEAT_WAVE_DEMAND_SCALE: f64 = 2.5;
/// Solar generation +20 %.
pub const HEAT_WAVE_SOLAR_SCALE: f64 = 1.2;
/// Heating demand +180 %.
pub const COLD_WAVE_DEMAND_SCALE: f64 = 2.8;
/// Battery capacity -15 %.
pub const COLD_WAVE_CAPACITY_DERATING: f64 = 0.85;

/// Map a temperature column affinely into `[lo, hi]`, keeping its shape.
/// A flat column lands on the band midpoint.
fn remap_into_band(values: &[f64], (lo, hi): (f64, f64)) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    values
        .iter()
        .map(|&v| {
            if span > 1e-12 {
                (lo + (hi - lo) * (v - min) / span).clamp(lo, hi)
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect()
}

pub fn apply_extreme_weather(series: &ExogenousSeries, kind: ExtremeWeather) -> ExogenousSeries {
    let mut out = series.clone();
    match kind {
        ExtremeWeather::HeatWave => {
            out.t_out = remap_into_band(&series.t_out, HEAT_WAVE_BAND);
            for col in &mut out.solar {
                for v in col.iter_mut() {
                    *v *= HEAT_WAVE_SOLAR_SCALE;
                }
            }
            out.adjustment.envelope_scale *= HEAT_WAVE_DEMAND_SCALE;
        }
        ExtremeWeather::ColdWave => {
            out.t_out = remap_into_band(&series.t_out, COLD_WAVE_BAND);
            out.adjustment.envelope_scale *= COLD_WAVE_DEMAND_SCALE;
            out.adjustment.capacity_derating *= COLD_WAVE_CAPACITY_DERATING;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::BuildingType;

    fn flat(horizon: usize, t_out: f64) -> ExogenousSeries {
        ExogenousSeries {
            horizon,
            dt: 1.0,
            building_ids: vec![0, 1],
            load: vec![vec![1.0; horizon], vec![2.0; horizon]],
            solar: vec![vec![0.5; horizon], (0..horizon).map(|t| t as f64).collect()],
            t_out: vec![t_out; horizon],
            price: vec![0.1; horizon],
            carbon: vec![0.4; horizon],
            adjustment: WeatherAdjustment::default(),
        }
    }

    #[test]
    fn heat_wave_band_and_solar() {
        let s = flat(48, 25.0);
        let hw = apply_extreme_weather(&s, ExtremeWeather::HeatWave);
        assert!(hw.t_out.iter().all(|t| (35.0..=40.0).contains(t)));
        for (a, b) in s.solar.iter().flatten().zip(hw.solar.iter().flatten()) {
            assert_eq!(*b, a * 1.2);
        }
        assert_eq!(hw.adjustment.envelope_scale, 2.5);
        assert_eq!(hw.adjustment.capacity_derating, 1.0);
    }

    #[test]
    fn heat_wave_keeps_diurnal_shape() {
        let mut s = flat(24, 0.0);
        s.t_out = (0..24).map(|h| 25.0 + (h as f64 / 3.0)).collect();
        let hw = apply_extreme_weather(&s, ExtremeWeather::HeatWave);
        assert_eq!(hw.t_out[0], 35.0);
        assert_eq!(hw.t_out[23], 40.0);
        assert!(hw.t_out.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cold_wave_derates_capacity() {
        let s = flat(24, 10.0);
        let cw = apply_extreme_weather(&s, ExtremeWeather::ColdWave);
        assert!(cw.t_out.iter().all(|t| *t < -3.0));
        assert_eq!(cw.solar, s.solar);
        let c = BuildingConfig::preset(0, BuildingType::Residential, [0.0, 0.0]);
        let eff = cw.effective_config(&c);
        assert_eq!(eff.battery_capacity, 0.85 * c.battery_capacity);
        assert_eq!(eff.thermal_conductance, 2.8 * c.thermal_conductance);
    }

    #[test]
    fn validate_catches_length_and_sign() {
        let mut s = flat(10, 20.0);
        s.price.pop();
        assert!(matches!(s.validate(), Err(SimError::LengthMismatch(_))));
        let mut s = flat(10, 20.0);
        s.load[1][3] = -0.1;
        assert!(matches!(s.validate(), Err(SimError::InvalidSpec(_))));
    }

    #[test]
    fn at_past_horizon_errors() {
        let s = flat(5, 20.0);
        assert!(s.at(4).is_ok());
        assert!(matches!(s.at(5), Err(SimError::HorizonExceeded { t: 5, horizon: 5 })));
    }
}
