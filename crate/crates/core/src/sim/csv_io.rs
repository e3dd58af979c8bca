//! Time-series CSV ingestion and export.
//!
//! One row per step. Columns: `time` (hours since start), `t_out`, `price`,
//! `carbon`, then for every building id `b_<id>` (non-shiftable load, kW) and
//! `p_<id>` (solar generation, kW). Building columns may appear in any order;
//! buildings are sorted by id.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use super::series::{ExogenousSeries, WeatherAdjustment};
use super::SimError;

const SHARED: [&str; 4] = ["time", "t_out", "price", "carbon"];

pub fn load_timeseries_csv(path: impl AsRef<Path>) -> Result<ExogenousSeries, SimError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_timeseries_csv(file)
}

pub fn read_timeseries_csv<R: Read>(reader: R) -> Result<ExogenousSeries, SimError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| SimError::Schema(format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let col = |name: &str| names.iter().position(|h| *h == name);

    let mut missing: Vec<String> = SHARED
        .iter()
        .filter(|c| col(c).is_none())
        .map(|c| c.to_string())
        .collect();
    let ids_with = |prefix: &str| -> BTreeSet<usize> {
        names
            .iter()
            .filter_map(|h| h.strip_prefix(prefix))
            .filter_map(|id| id.parse().ok())
            .collect()
    };
    let load_ids = ids_with("b_");
    let solar_ids = ids_with("p_");
    for id in load_ids.difference(&solar_ids) {
        missing.push(format!("p_{id}"));
    }
    for id in solar_ids.difference(&load_ids) {
        missing.push(format!("b_{id}"));
    }
    if load_ids.is_empty() && solar_ids.is_empty() {
        missing.push("b_<id>".into());
        missing.push("p_<id>".into());
    }
    if !missing.is_empty() {
        return Err(SimError::Schema(format!("missing columns: {}", missing.join(", "))));
    }
    let ids: Vec<usize> = load_ids.into_iter().collect();

    let idx_time = col("time").unwrap();
    let idx_tout = col("t_out").unwrap();
    let idx_price = col("price").unwrap();
    let idx_carbon = col("carbon").unwrap();
    let idx_load: Vec<usize> = ids.iter().map(|id| col(&format!("b_{id}")).unwrap()).collect();
    let idx_solar: Vec<usize> = ids.iter().map(|id| col(&format!("p_{id}")).unwrap()).collect();

    let mut time = Vec::new();
    let mut t_out = Vec::new();
    let mut price = Vec::new();
    let mut carbon = Vec::new();
    let mut load = vec![Vec::new(); ids.len()];
    let mut solar = vec![Vec::new(); ids.len()];

    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| SimError::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != names.len() {
            return Err(SimError::LengthMismatch(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                names.len()
            )));
        }
        let field = |i: usize, nonneg: bool| -> Result<f64, SimError> {
            let raw = &record[i];
            let v: f64 = raw.parse().map_err(|_| SimError::Parse {
                row,
                column: names[i].to_string(),
                message: format!("not a number: {raw:?}"),
            })?;
            if !v.is_finite() {
                return Err(SimError::Parse {
                    row,
                    column: names[i].to_string(),
                    message: format!("non-finite value {v}"),
                });
            }
            if nonneg && v < 0.0 {
                return Err(SimError::Parse {
                    row,
                    column: names[i].to_string(),
                    message: format!("negative value {v}"),
                });
            }
            Ok(v)
        };
        time.push(field(idx_time, false)?);
        t_out.push(field(idx_tout, false)?);
        price.push(field(idx_price, true)?);
        carbon.push(field(idx_carbon, true)?);
        for k in 0..ids.len() {
            load[k].push(field(idx_load[k], true)?);
            solar[k].push(field(idx_solar[k], true)?);
        }
    }

    let horizon = time.len();
    if horizon == 0 {
        return Err(SimError::LengthMismatch("no data rows".into()));
    }
    let dt = if horizon >= 2 { time[1] - time[0] } else { 1.0 };
    if !(dt > 0.0) {
        return Err(SimError::Parse {
            row: 1,
            column: "time".into(),
            message: "time must be strictly increasing".into(),
        });
    }
    for (row, w) in time.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(SimError::Parse {
                row: row + 1,
                column: "time".into(),
                message: format!("uneven step {} (expected {dt})", w[1] - w[0]),
            });
        }
    }

    let series = ExogenousSeries {
        horizon,
        dt,
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

pub fn write_timeseries_csv<W: Write>(series: &ExogenousSeries, writer: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = SHARED.iter().map(|s| s.to_string()).collect();
    for id in &series.building_ids {
        header.push(format!("b_{id}"));
        header.push(format!("p_{id}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..series.horizon {
        let mut row = vec![
            (t as f64 * series.dt).to_string(),
            series.t_out[t].to_string(),
            series.price[t].to_string(),
            series.carbon[t].to_string(),
        ];
        for k in 0..series.building_ids.len() {
            row.push(series.load[k][t].to_string());
            row.push(series.solar[k][t].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_timeseries_csv(series: &ExogenousSeries, path: impl AsRef<Path>) -> Result<(), SimError> {
    let file = std::fs::File::create(path.as_ref())?;
    write_timeseries_csv(series, std::io::BufWriter::new(file))
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Io(std::io::Error::other(e))
}
