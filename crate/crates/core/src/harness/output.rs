use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pf::FilterVariant;

use super::config::ScenarioConfig;
use super::metrics::{MetricsSummary, RunRecord};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RMSE_FILE: &str = "rmse_series.csv";

#[derive(Debug, Serialize, Deserialize)]
struct ErrorRow {
    variant: FilterVariant,
    run: usize,
    n: usize,
    sensor: usize,
    err_sq: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RmseRow {
    n: usize,
    rmse: f64,
}

/// Comment header carrying the version and the config echo.
fn write_header(w: &mut impl Write, summary: &MetricsSummary) -> Result<()> {
    writeln!(w, "# version: {}", summary.version)?;
    writeln!(w, "# config: {}", serde_json::to_string(&summary.config)?)?;
    Ok(())
}

fn csv_writer(path: &Path, summary: &MetricsSummary) -> Result<csv::Writer<File>> {
    let mut file = File::create(path)?;
    write_header(&mut file, summary)?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?)
}

/// Writes `results.csv`, `summary.json` and `rmse_series.csv` into `dir`.
pub fn write_outputs(dir: &Path, rec: &RunRecord, summary: &MetricsSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let results = dir.join(RESULTS_FILE);
    let mut w = csv_writer(&results, summary)?;
    for run in 0..rec.runs {
        for n in 0..rec.steps {
            for sensor in 0..rec.sensors {
                w.serialize(ErrorRow {
                    variant: rec.variant,
                    run,
                    n: n + 1,
                    sensor,
                    err_sq: rec.get(run, n, sensor),
                })?;
            }
        }
    }
    w.flush()?;

    let rmse = dir.join(RMSE_FILE);
    let mut w = csv_writer(&rmse, summary)?;
    for (n, &v) in summary.rmse.iter().enumerate() {
        w.serialize(RmseRow { n: n + 1, rmse: v })?;
    }
    w.flush()?;

    let json = dir.join(SUMMARY_FILE);
    fs::write(&json, serde_json::to_string_pretty(summary)?)?;
    Ok(vec![results, json, rmse])
}

pub fn read_summary_json(path: &Path) -> Result<MetricsSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Config echoed in the header of an emitted CSV file.
pub fn read_config_echo(path: &Path) -> Result<ScenarioConfig> {
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        if let Some(json) = line?.strip_prefix("# config: ") {
            return Ok(serde_json::from_str(json)?);
        }
    }
    Err(Error::InvalidConfig(format!("{} has no config echo", path.display())))
}

/// Rebuilds the error grid of a `results.csv` file. Per-run bookkeeping that
/// the file does not carry is left at zero.
pub fn read_results_csv(path: &Path) -> Result<RunRecord> {
    let rows: Vec<ErrorRow> = csv_reader(path)?.deserialize().collect::<std::result::Result<_, _>>()?;
    let first = rows.first().ok_or(Error::EmptySeries)?;
    let variant = first.variant;
    let runs = rows.iter().map(|r| r.run).max().unwrap_or(0) + 1;
    let steps = rows.iter().map(|r| r.n).max().unwrap_or(0);
    let sensors = rows.iter().map(|r| r.sensor).max().unwrap_or(0) + 1;
    if rows.len() != runs * steps * sensors {
        return Err(Error::DimensionMismatch {
            expected: runs * steps * sensors,
            found: rows.len(),
        });
    }
    let mut rec = RunRecord::zeros(variant, runs, steps, sensors);
    for r in rows {
        if r.n == 0 {
            return Err(Error::InvalidConfig("time index starts at 1".into()));
        }
        rec.set(r.run, r.n - 1, r.sensor, r.err_sq);
    }
    Ok(rec)
}

pub fn read_rmse_csv(path: &Path) -> Result<Vec<f64>> {
    let rows: Vec<RmseRow> = csv_reader(path)?.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows.into_iter().map(|r| r.rmse).collect())
}
