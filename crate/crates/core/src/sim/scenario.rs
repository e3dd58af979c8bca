//! Seeded synthetic scenario generator.
//!
//! Load shapes follow the usual archetypes: residential buildings peak in the
//! morning and (more strongly) in the evening, commercial buildings carry a
//! business-hours plateau with a midday maximum, mixed-use buildings blend
//! both. Solar is a clipped sinusoid over daylight with per-day cloudiness,
//! the tariff is a two-tier time-of-use schedule and grid carbon intensity
//! follows a diurnal curve with a midday dip.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::building::{BuildingConfig, BuildingType};
use super::series::{ExogenousSeries, WeatherAdjustment};
use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClimateSpec {
    /// Annual mean outdoor temperature (°C).
    pub t_mean: f64,
    /// Half the winter-to-summer swing of daily means (°C).
    pub seasonal_amplitude: f64,
    /// Half the day-to-night swing (°C).
    pub daily_amplitude: f64,
    /// Std of the day-to-day weather anomaly (°C).
    pub anomaly_std: f64,
}

impl Default for ClimateSpec {
    fn default() -> Self {
        ClimateSpec {
            t_mean: 20.7,
            seasonal_amplitude: 9.5,
            daily_amplitude: 5.5,
            anomaly_std: 1.5,
        }
    }
}

/// Two-tier time-of-use tariff. The peak window is `[peak_start, peak_end)` in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TariffSpec {
    pub offpeak_price: f64,
    pub peak_price: f64,
    pub peak_start: f64,
    pub peak_end: f64,
}

impl Default for TariffSpec {
    fn default() -> Self {
        TariffSpec {
            offpeak_price: 0.10,
            peak_price: 0.30,
            peak_start: 17.0,
            peak_end: 21.0,
        }
    }
}

impl TariffSpec {
    pub fn price_at(&self, hour: f64) -> f64 {
        if hour >= self.peak_start && hour < self.peak_end {
            self.peak_price
        } else {
            self.offpeak_price
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub building_types: Vec<BuildingType>,
    /// Ids for the generated columns; defaults to `0..n`.
    #[serde(default)]
    pub building_ids: Option<Vec<usize>>,
    pub horizon: i64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Day of year at step 0 (0 = Jan 1).
    #[serde(default = "default_start_day")]
    pub start_day: f64,
    /// Multiplier on every building's solar array size.
    #[serde(default = "default_one")]
    pub solar_scale: f64,
    #[serde(default)]
    pub climate: ClimateSpec,
    #[serde(default)]
    pub tariff: TariffSpec,
}

fn default_dt() -> f64 {
    1.0
}
fn default_start_day() -> f64 {
    // August 1st.
    212.0
}
fn default_one() -> f64 {
    1.0
}

impl ScenarioSpec {
    pub fn new(building_types: Vec<BuildingType>, horizon: i64) -> Self {
        ScenarioSpec {
            building_types,
            building_ids: None,
            horizon,
            dt: default_dt(),
            start_day: default_start_day(),
            solar_scale: 1.0,
            climate: ClimateSpec::default(),
            tariff: TariffSpec::default(),
        }
    }

    pub fn ids(&self) -> Vec<usize> {
        self.building_ids
            .clone()
            .unwrap_or_else(|| (0..self.building_types.len()).collect())
    }
}

fn bump(hour: f64, center: f64, width: f64) -> f64 {
    // Wrap around midnight so late-evening bumps stay continuous.
    let mut d = (hour - center).rem_euclid(24.0);
    if d > 12.0 {
        d -= 24.0;
    }
    (-0.5 * (d / width).powi(2)).exp()
}

fn smooth_step(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean hourly load shape (kW) for an archetype.
pub fn load_shape(ty: BuildingType, hour: f64) -> f64 {
    match ty {
        BuildingType::Residential => {
            0.6 + 1.1 * bump(hour, 7.5, 1.1) + 2.1 * bump(hour, 19.8, 1.5)
        }
        BuildingType::Commercial => {
            let open = smooth_step(2.5 * (hour - 8.5)) * smooth_step(2.5 * (17.5 - hour));
            3.0 + 10.0 * open + 2.5 * bump(hour, 12.5, 1.2)
        }
        BuildingType::Mixed => {
            0.5 * 3.0 * load_shape(BuildingType::Residential, hour)
                + 0.5 * 0.5 * load_shape(BuildingType::Commercial, hour)
        }
    }
}

/// Installed PV size (kW peak) per archetype.
pub fn pv_size(ty: BuildingType) -> f64 {
    match ty {
        BuildingType::Residential => 5.0,
        BuildingType::Commercial => 16.0,
        BuildingType::Mixed => 9.0,
    }
}

fn clear_sky(hour: f64) -> f64 {
    if (6.0..19.0).contains(&hour) {
        (PI * (hour - 6.0) / 13.0).sin().max(0.0).powf(1.2)
    } else {
        0.0
    }
}

/// Preset configs for the scenario's buildings, scattered uniformly over a
/// `extent_km` square. Deterministic in `seed`.
pub fn scenario_buildings(spec: &ScenarioSpec, extent_km: f64, seed: u64) -> Vec<BuildingConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    spec.ids()
        .into_iter()
        .zip(&spec.building_types)
        .map(|(id, &ty)| {
            let loc = [rng.random_range(0.0..=extent_km), rng.random_range(0.0..=extent_km)];
            BuildingConfig::preset(id, ty, loc)
        })
        .collect()
}

pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<ExogenousSeries, SimError> {
    if spec.horizon <= 0 {
        return Err(SimError::InvalidSpec(format!(
            "horizon must be positive, got {}",
            spec.horizon
        )));
    }
    if !(spec.dt > 0.0) {
        return Err(SimError::InvalidSpec(format!("dt must be positive, got {}", spec.dt)));
    }
    if spec.building_types.is_empty() {
        return Err(SimError::Config("empty building set".into()));
    }
    let ids = spec.ids();
    if ids.len() != spec.building_types.len() {
        return Err(SimError::InvalidSpec(format!(
            "{} building ids for {} building types",
            ids.len(),
            spec.building_types.len()
        )));
    }
    let horizon = spec.horizon as usize;
    let n = spec.building_types.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let hours: Vec<f64> = (0..horizon).map(|t| t as f64 * spec.dt).collect();
    let days = (hours.last().copied().unwrap_or(0.0) / 24.0).floor() as usize + 1;

    // Day-level draws: weather anomaly (AR(1)) and cloudiness.
    let mut anomaly = Vec::with_capacity(days);
    let mut a = 0.0;
    for _ in 0..days {
        a = 0.7 * a + (1.0f64 - 0.49).sqrt() * spec.climate.anomaly_std * unit.sample(&mut rng);
        anomaly.push(a);
    }
    let cloud: Vec<f64> = (0..days).map(|_| rng.random_range(0.55..1.0)).collect();

    let mut t_out = Vec::with_capacity(horizon);
    let mut price = Vec::with_capacity(horizon);
    let mut carbon = Vec::with_capacity(horizon);
    for &h in &hours {
        let day = (h / 24.0).floor() as usize;
        let hod = h.rem_euclid(24.0);
        let doy = spec.start_day + h / 24.0;
        let season = -(2.0 * PI * (doy - 20.0) / 365.0).cos();
        let temp = spec.climate.t_mean
            + spec.climate.seasonal_amplitude * season
            + spec.climate.daily_amplitude * (2.0 * PI * (hod - 15.0) / 24.0).cos()
            + anomaly[day]
            + 0.3 * unit.sample(&mut rng);
        t_out.push(temp);
        price.push(spec.tariff.price_at(hod));
        let ci = 0.42 + 0.08 * (2.0 * PI * (hod - 19.0) / 24.0).cos() - 0.12 * clear_sky(hod);
        carbon.push(ci.max(0.05));
    }

    let mut load = Vec::with_capacity(n);
    let mut solar = Vec::with_capacity(n);
    for &ty in &spec.building_types {
        let size = rng.random_range(0.85..1.15);
        let pv = pv_size(ty) * spec.solar_scale * rng.random_range(0.85..1.15);
        let day_factor: Vec<f64> = (0..days)
            .map(|_| (1.0 + 0.08 * unit.sample(&mut rng)).max(0.5))
            .collect();
        let mut lcol = Vec::with_capacity(horizon);
        let mut scol = Vec::with_capacity(horizon);
        for &h in &hours {
            let day = (h / 24.0).floor() as usize;
            let hod = h.rem_euclid(24.0);
            let noise = (1.0 + 0.08 * unit.sample(&mut rng)).max(0.0);
            lcol.push((size * day_factor[day] * load_shape(ty, hod) * noise).max(0.0));
            let flicker = (1.0 + 0.05 * unit.sample(&mut rng)).clamp(0.0, 1.2);
            scol.push((pv * cloud[day] * clear_sky(hod) * flicker).max(0.0));
        }
        load.push(lcol);
        solar.push(scol);
    }

    let series = ExogenousSeries {
        horizon,
        dt: spec.dt,
        building_ids: ids,
        load,
        solar,
        t_out,
        price,
        carbon,
        adjustment: WeatherAdjustment::default(),
    };
    series.validate()?;
    Ok(series)
}
