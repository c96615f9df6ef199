use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pf::{FilterVariant, StepDiagnostics};
use crate::polybasis::enumerate_exponents;
use crate::proposal::fusion_payload_len;

use super::config::ScenarioConfig;

/// Network totals per time step of the two non-adapted reference DPFs.
pub const REFERENCE_DPF1_NETWORK_TOTAL: u64 = 76_875;
pub const REFERENCE_DPF2_NETWORK_TOTAL: u64 = 1_875;

/// Squared position errors on the `(run, n, sensor)` grid, plus per-run
/// bookkeeping. The centralized filter has a single "sensor" column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: FilterVariant,
    pub runs: usize,
    pub steps: usize,
    pub sensors: usize,
    /// Row-major over `(run, n, sensor)`.
    pub err_sq: Vec<f64>,
    /// Hash of every measurement of each run; identical across variants.
    pub measurement_hashes: Vec<u64>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Scalars each sensor sent over the whole run.
    pub scalars_sent_per_sensor: Vec<u64>,
}

impl RunRecord {
    pub fn zeros(variant: FilterVariant, runs: usize, steps: usize, sensors: usize) -> Self {
        Self {
            variant,
            runs,
            steps,
            sensors,
            err_sq: vec![0.0; runs * steps * sensors],
            measurement_hashes: vec![0; runs],
            diagnostics: vec![StepDiagnostics::default(); runs],
            scalars_sent_per_sensor: vec![0; runs],
        }
    }

    fn offset(&self, run: usize, n: usize, sensor: usize) -> usize {
        (run * self.steps + n) * self.sensors + sensor
    }

    pub fn get(&self, run: usize, n: usize, sensor: usize) -> f64 {
        self.err_sq[self.offset(run, n, sensor)]
    }

    pub fn set(&mut self, run: usize, n: usize, sensor: usize, value: f64) {
        let i = self.offset(run, n, sensor);
        self.err_sq[i] = value;
    }

    pub fn is_complete(&self) -> bool {
        self.err_sq.len() == self.runs * self.steps * self.sensors
            && self.measurement_hashes.len() == self.runs
            && self.diagnostics.len() == self.runs
            && self.scalars_sent_per_sensor.len() == self.runs
    }
}

/// `RMSE_n = sqrt(mean over runs and sensors of err²)`.
pub fn rmse_series(rec: &RunRecord) -> Vec<f64> {
    let count = (rec.runs * rec.sensors) as f64;
    (0..rec.steps)
        .map(|n| {
            let mut acc = 0.0;
            for run in 0..rec.runs {
                for s in 0..rec.sensors {
                    acc += rec.get(run, n, s);
                }
            }
            (acc / count).sqrt()
        })
        .collect()
}

/// Root of the mean of the squared series.
pub fn armse(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let ms = series.iter().map(|r| r * r).sum::<f64>() / series.len() as f64;
    Ok(ms.sqrt())
}

/// ARMSE of each run on its own, averaged over sensors and time.
pub fn per_run_armse(rec: &RunRecord) -> Vec<f64> {
    let count = (rec.steps * rec.sensors) as f64;
    (0..rec.runs)
        .map(|run| {
            let start = rec.offset(run, 0, 0);
            let acc: f64 = rec.err_sq[start..start + rec.steps * rec.sensors].iter().sum();
            (acc / count).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommBudget {
    pub per_sensor: u64,
    pub network: u64,
}

/// Scalars sent per time step, by formula.
pub fn comm_budget(cfg: &ScenarioConfig) -> CommBudget {
    let rounds = if cfg.exact_consensus { 0 } else { cfg.iterations as u64 };
    let m = 2;
    let lc_payload = enumerate_exponents(m, cfg.degree).len() as u64 - u64::from(!cfg.include_constant);
    let fusion_payload = fusion_payload_len(m) as u64;
    let per_sensor = match cfg.variant {
        FilterVariant::LcDpf => rounds * (lc_payload + fusion_payload),
        FilterVariant::LcDpfNa => rounds * lc_payload,
        FilterVariant::Cpf => 0,
    };
    let network = if cfg.variant.is_distributed() {
        per_sensor * cfg.sensors as u64
    } else {
        0
    };
    CommBudget { per_sensor, network }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommSummary {
    pub formula: CommBudget,
    /// Counted from the consensus reports of every step of every run.
    pub measured: CommBudget,
    pub reference_dpf1_network: u64,
    pub reference_dpf2_network: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub version: String,
    pub config: ScenarioConfig,
    pub rmse: Vec<f64>,
    pub armse: f64,
    pub per_run_armse: Vec<f64>,
    pub comm: CommSummary,
    pub diagnostics: StepDiagnostics,
    pub measurement_hashes: Vec<u64>,
}

pub fn version_string() -> String {
    match option_env!("LCDPF_GIT_DESCRIBE") {
        Some(describe) => format!("lcdpf {} ({describe})", env!("CARGO_PKG_VERSION")),
        None => format!("lcdpf {}", env!("CARGO_PKG_VERSION")),
    }
}

pub fn summarize(cfg: &ScenarioConfig, rec: &RunRecord) -> Result<MetricsSummary> {
    if !rec.is_complete() {
        return Err(Error::InvalidConfig("incomplete run record".into()));
    }
    let rmse = rmse_series(rec);
    let armse = armse(&rmse)?;
    let mut diagnostics = StepDiagnostics::default();
    for d in &rec.diagnostics {
        diagnostics.merge(d);
    }
    let total: u64 = rec.scalars_sent_per_sensor.iter().sum();
    let sensor_steps = (rec.runs * rec.steps) as u64;
    let measured_per_sensor = total / sensor_steps;
    let measured = CommBudget {
        per_sensor: measured_per_sensor,
        network: if cfg.variant.is_distributed() {
            measured_per_sensor * cfg.sensors as u64
        } else {
            0
        },
    };
    Ok(MetricsSummary {
        version: version_string(),
        config: cfg.clone(),
        per_run_armse: per_run_armse(rec),
        rmse,
        armse,
        comm: CommSummary {
            formula: comm_budget(cfg),
            measured,
            reference_dpf1_network: REFERENCE_DPF1_NETWORK_TOTAL,
            reference_dpf2_network: REFERENCE_DPF2_NETWORK_TOTAL,
        },
        diagnostics,
        measurement_hashes: rec.measurement_hashes.clone(),
    })
}
