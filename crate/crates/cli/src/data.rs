use std::path::{Path, PathBuf};

use stems::sim::write_timeseries_csv;

use crate::{write_atomic, CliError, RunConfig};

/// Generate the configured scenario and write it as a time-series CSV.
/// `out` defaults to `<output dir>/scenario.csv`.
pub fn cmd_gen_data(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let series = cfg.series()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir().join("scenario.csv"));
    let mut buf = Vec::new();
    write_timeseries_csv(&series, &mut buf)?;
    write_atomic(&path, &buf)?;
    Ok(path)
}
