//! Discrete-time simulation of N buildings with batteries, heat pumps and
//! rooftop solar under exogenous load, weather, tariff and carbon series.

mod building;
mod csv_io;
mod dynamics;
mod env;
mod scenario;
mod series;

pub use building::{action_box, Action, BuildingConfig, BuildingState, BuildingType};
pub use csv_io::{load_timeseries_csv, read_timeseries_csv, save_timeseries_csv, write_timeseries_csv};
pub use dynamics::{
    battery_power_for_soc, net_consumption, soc_next_unclamped, soc_update, thermal_update, HvacMode,
    SocUpdate,
};
pub use env::{step, Environment, RewardInputs, StepOutcome};
pub use scenario::{generate_scenario, load_shape, pv_size, scenario_buildings, ClimateSpec, ScenarioSpec, TariffSpec};
pub use series::{
    apply_extreme_weather, ExoAt, ExogenousSeries, ExtremeWeather, WeatherAdjustment,
    COLD_WAVE_BAND, COLD_WAVE_CAPACITY_DERATING, COLD_WAVE_DEMAND_SCALE, HEAT_WAVE_BAND,
    HEAT_WAVE_DEMAND_SCALE, HEAT_WAVE_SOLAR_SCALE,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("step {t} is past the horizon ({horizon})")]
    HorizonExceeded { t: usize, horizon: usize },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error at row {row}, column {column:?}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
