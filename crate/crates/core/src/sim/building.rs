use serde::{Deserialize, Serialize};

use super::SimError;

/// Building archetype, drives the synthetic load shape and the one-hot attribute block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingType {
    Residential,
    Commercial,
    Mixed,
}

impl BuildingType {
    pub const ALL: [BuildingType; 3] = [
        BuildingType::Residential,
        BuildingType::Commercial,
        BuildingType::Mixed,
    ];

    pub fn one_hot(self) -> [f64; 3] {
        match self {
            BuildingType::Residential => [1.0, 0.0, 0.0],
            BuildingType::Commercial => [0.0, 1.0, 0.0],
            BuildingType::Mixed => [0.0, 0.0, 1.0],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BuildingType::Residential => "residential",
            BuildingType::Commercial => "commercial",
            BuildingType::Mixed => "mixed",
        }
    }
}

/// Static description of one building and its controllable devices.
///
/// Power in kW, energy in kWh, temperatures in °C, thermal capacitance in
/// kWh/°C and conductance in kW/°C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingConfig {
    pub id: usize,
    pub building_type: BuildingType,
    pub battery_capacity: f64,
    pub battery_power_limit: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    pub p_building_max: f64,
    pub hvac_power_max: f64,
    pub hvac_cop: f64,
    pub thermal_capacitance: f64,
    pub thermal_conductance: f64,
    pub t_ref: f64,
    /// (x, y) in km.
    pub location: [f64; 2],
    #[serde(default = "default_initial_soc")]
    pub initial_soc: f64,
}

fn default_initial_soc() -> f64 {
    0.5
}

impl BuildingConfig {
    /// A typical configuration for the given archetype, placed at `location`.
    pub fn preset(id: usize, building_type: BuildingType, location: [f64; 2]) -> Self {
        let (cap, plim, pmax, hvac, cap_th, cond) = match building_type {
            BuildingType::Residential => (13.5, 5.0, 20.0, 3.0, 3.0, 0.25),
            BuildingType::Commercial => (40.0, 15.0, 60.0, 10.0, 12.0, 0.9),
            BuildingType::Mixed => (25.0, 8.0, 35.0, 6.0, 7.0, 0.55),
        };
        BuildingConfig {
            id,
            building_type,
            battery_capacity: cap,
            battery_power_limit: plim,
            soc_min: 0.1,
            soc_max: 0.9,
            charge_eff: 0.95,
            discharge_eff: 0.95,
            p_building_max: pmax,
            hvac_power_max: hvac,
            hvac_cop: 3.0,
            thermal_capacitance: cap_th,
            thermal_conductance: cond,
            t_ref: 22.5,
            location,
            initial_soc: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::Config(format!("building {}: {msg}", self.id)));
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return fail(format!(
                "soc bounds must satisfy 0 <= soc_min < soc_max <= 1, got [{}, {}]",
                self.soc_min, self.soc_max
            ));
        }
        let positive = [
            ("battery_capacity", self.battery_capacity),
            ("battery_power_limit", self.battery_power_limit),
            ("p_building_max", self.p_building_max),
            ("hvac_power_max", self.hvac_power_max),
            ("hvac_cop", self.hvac_cop),
            ("thermal_capacitance", self.thermal_capacitance),
            ("thermal_conductance", self.thermal_conductance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("charge_eff", self.charge_eff), ("discharge_eff", self.discharge_eff)] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return fail(format!("initial_soc must lie in [0, 1], got {}", self.initial_soc));
        }
        if !self.t_ref.is_finite() || !self.location.iter().all(|v| v.is_finite()) {
            return fail("t_ref and location must be finite".into());
        }
        Ok(())
    }

    /// Attribute vector f_i used for similarity edges: type one-hot, capacity,
    /// then efficiency parameters.
    pub fn attributes(&self) -> Vec<f64> {
        let mut f = self.building_type.one_hot().to_vec();
        f.extend([
            self.battery_capacity,
            self.charge_eff,
            self.discharge_eff,
            self.hvac_cop,
        ]);
        f
    }

    pub fn initial_state(&self) -> BuildingState {
        BuildingState {
            soc: self.initial_soc,
            t_in: self.t_ref,
            prev_net: 0.0,
        }
    }
}

/// Dynamic per-building quantities advanced every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildingState {
    pub soc: f64,
    pub t_in: f64,
    /// Net consumption of the previous step (kW).
    pub prev_net: f64,
}

/// Per-building control: battery power (charge positive) and HVAC electrical power.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub p_batt: f64,
    pub p_hvac: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        p_batt: 0.0,
        p_hvac: 0.0,
    };

    pub fn new(p_batt: f64, p_hvac: f64) -> Self {
        Action { p_batt, p_hvac }
    }

    /// Clamp to the device box `|p_batt| <= battery_power_limit`, `0 <= p_hvac <= hvac_power_max`.
    pub fn clamp_to_box(self, config: &BuildingConfig) -> Action {
        let lim = config.battery_power_limit;
        Action {
            p_batt: self.p_batt.clamp(-lim, lim),
            p_hvac: self.p_hvac.clamp(0.0, config.hvac_power_max),
        }
    }

    pub fn in_box(&self, config: &BuildingConfig, tol: f64) -> bool {
        self.p_batt.abs() <= config.battery_power_limit + tol
            && self.p_hvac >= -tol
            && self.p_hvac <= config.hvac_power_max + tol
    }

    pub fn distance(&self, other: &Action) -> f64 {
        (self.p_batt - other.p_batt).hypot(self.p_hvac - other.p_hvac)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.p_batt, self.p_hvac]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Action::new(a[0], a[1])
    }
}

/// Lower and upper corners of the device box, in `[p_batt, p_hvac]` order.
pub fn action_box(config: &BuildingConfig) -> ([f64; 2], [f64; 2]) {
    (
        [-config.battery_power_limit, 0.0],
        [config.battery_power_limit, config.hvac_power_max],
    )
}
