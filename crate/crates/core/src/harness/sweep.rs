use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::ScenarioConfig;
use super::metrics::MetricsSummary;
use super::output::write_outputs;
use super::run::run_scenario;

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Polynomial degree.
    Rp,
    /// Particles per filter.
    Particles,
}

impl SweepParam {
    pub fn apply(self, base: &ScenarioConfig, value: u64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepParam::Rp => {
                cfg.degree =
                    u32::try_from(value).map_err(|_| Error::InvalidConfig(format!("degree {value} too large")))?
            }
            SweepParam::Particles => cfg.particles = value as usize,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Rp => "rp",
            SweepParam::Particles => "particles",
        })
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(SweepParam::Rp),
            "particles" => Ok(SweepParam::Particles),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep parameter `{other}` (expected rp or particles)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: u64,
    pub summary: MetricsSummary,
}

/// One full scenario per value; optionally writes each point's files under
/// `out/<param>_<value>/`.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[u64],
    out: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let cfg = param.apply(base, value)?;
            let (rec, summary) = run_scenario(&cfg)?;
            if let Some(dir) = out {
                write_outputs(&dir.join(format!("{param}_{value}")), &rec, &summary)?;
            }
            Ok(SweepPoint { value, summary })
        })
        .collect()
}

/// `sweep.csv` with one ARMSE per swept value.
pub fn write_sweep(dir: &Path, param: SweepParam, points: &[SweepPoint]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    w.write_record(["param", "value", "variant", "armse"])?;
    for p in points {
        w.write_record([
            param.to_string(),
            p.value.to_string(),
            p.summary.config.variant.to_string(),
            p.summary.armse.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
