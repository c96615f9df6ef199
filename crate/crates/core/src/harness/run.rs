use std::hash::{DefaultHasher, Hasher};

use nalgebra::{DVector, Vector2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussfilter::GaussianBelief;
use crate::models::{propagate_truth, reflect_into_box, sense, AcousticModel, SensorSite, TargetState};
use crate::network::{deploy_jittered_grid, Network, Topology};
use crate::pf::{cpf_step, dpf_step, CentralFilterState, SensorFilterState, StepDiagnostics};
use crate::streams::{stream, Purpose};

use super::config::ScenarioConfig;
use super::metrics::{summarize, MetricsSummary, RunRecord};

/// Sensor layout of `run`. Fixed per master seed unless redeployment per run
/// is requested.
pub fn deployment(cfg: &ScenarioConfig, run: usize) -> Result<Vec<SensorSite>> {
    let index = if cfg.rejitter_per_run { run as u64 } else { 0 };
    let mut rng = stream(cfg.seed, Purpose::Deployment, index, 0);
    deploy_jittered_grid(cfg.sensors, cfg.region(), cfg.jitter_frac, &mut rng)
}

pub fn connected_topology(cfg: &ScenarioConfig, run: usize) -> Result<Topology> {
    let topology = Topology::build(deployment(cfg, run)?, cfg.comm_range);
    if topology.is_connected() {
        Ok(topology)
    } else {
        Err(Error::Disconnected { seed: cfg.seed })
    }
}

/// Truth trajectory `τ_0..τ_N` of `run`.
pub fn simulate_truth(cfg: &ScenarioConfig, run: usize) -> Vec<TargetState> {
    let mut rng = stream(cfg.seed, Purpose::Truth, run as u64, 0);
    let half = 0.5 * cfg.init_box;
    let cx = 0.5 * cfg.region_width;
    let cy = 0.5 * cfg.region_height;
    let start = TargetState::new(
        Vector2::new(
            rng.random_range(cx - half..=cx + half),
            rng.random_range(cy - half..=cy + half),
        ),
        Vector2::from(cfg.initial_velocity),
    );
    let motion = cfg.motion();
    let mut truth = Vec::with_capacity(cfg.steps + 1);
    truth.push(start);
    for _ in 0..cfg.steps {
        let mut next = propagate_truth(*truth.last().unwrap(), &motion, &mut rng);
        if cfg.reflect_truth {
            next = reflect_into_box(next, cfg.region_width, cfg.region_height);
        }
        truth.push(next);
    }
    truth
}

/// Measurements `z[n][k]` for `n = 1..=N`, stored from index 0.
pub fn simulate_measurements(
    cfg: &ScenarioConfig,
    run: usize,
    sites: &[SensorSite],
    truth: &[TargetState],
) -> Vec<Vec<f64>> {
    let sensor = cfg.sensor();
    let mut rngs: Vec<_> = sites
        .iter()
        .map(|s| stream(cfg.seed, Purpose::Measurement, run as u64, s.index as u64))
        .collect();
    truth[1..]
        .iter()
        .enumerate()
        .map(|(n, tau)| {
            sites
                .iter()
                .zip(rngs.iter_mut())
                .map(|(site, rng)| sense(&tau.position, site, &sensor, n + 1, rng).value)
                .collect()
        })
        .collect()
}

fn hash_measurements(z: &[Vec<f64>]) -> u64 {
    let mut h = DefaultHasher::new();
    for row in z {
        for v in row {
            h.write_u64(v.to_bits());
        }
    }
    h.finish()
}

struct RunOutput {
    err_sq: Vec<Vec<f64>>,
    hash: u64,
    diagnostics: StepDiagnostics,
    scalars_sent: u64,
}

/// Sensor filter estimates at every step of one run.
pub type EstimateTrace = Vec<Vec<DVector<f64>>>;

fn execute_run(
    cfg: &ScenarioConfig,
    run: usize,
    shared_topology: Option<&Topology>,
) -> Result<(RunOutput, EstimateTrace)> {
    let topology = match shared_topology {
        Some(t) => t.clone(),
        None => connected_topology(cfg, run)?,
    };
    let truth = simulate_truth(cfg, run);
    let z = simulate_measurements(cfg, run, &topology.sites, &truth);
    let model = AcousticModel::new(topology.sites.clone(), cfg.sensor());
    let filter = cfg.filter_config();
    let prior = GaussianBelief::isotropic(DVector::from_column_slice(truth[0].position.as_slice()), cfg.prior_var)?;
    let filter_rng = |k: usize| {
        let index = if cfg.shared_filter_streams { 0 } else { k as u64 };
        stream(cfg.seed, Purpose::Filter, run as u64, index)
    };
    let sq_err = |est: &DVector<f64>, n: usize| {
        let p = truth[n + 1].position;
        (est[0] - p.x).powi(2) + (est[1] - p.y).powi(2)
    };

    let mut diagnostics = StepDiagnostics::default();
    let mut scalars_sent = 0;
    let mut err_sq = Vec::with_capacity(cfg.steps);
    let mut trace = Vec::with_capacity(cfg.steps);
    if cfg.variant.is_distributed() {
        let network = Network::new(topology);
        let mut states: Vec<SensorFilterState> = (0..cfg.sensors)
            .map(|k| SensorFilterState::new(k, &prior, cfg.particles, filter_rng(k)))
            .collect();
        for (n, zn) in z.iter().enumerate() {
            let out = dpf_step(&mut states, zn, &network, &model, &filter)?;
            diagnostics.merge(&out.diagnostics);
            scalars_sent += out.comm.per_sensor;
            err_sq.push(out.estimates.iter().map(|e| sq_err(e, n)).collect());
            trace.push(out.estimates);
        }
    } else {
        let mut state = CentralFilterState::new(&prior, cfg.particles, filter_rng(0));
        for (n, zn) in z.iter().enumerate() {
            let (est, d) = cpf_step(&mut state, zn, &model, &filter)?;
            diagnostics.merge(&d);
            err_sq.push(vec![sq_err(&est, n)]);
            trace.push(vec![est]);
        }
    }
    let output = RunOutput {
        err_sq,
        hash: hash_measurements(&z),
        diagnostics,
        scalars_sent,
    };
    Ok((output, trace))
}

/// Runs every Monte Carlo run of `cfg` (in parallel) and aggregates the metrics.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(RunRecord, MetricsSummary)> {
    cfg.validate()?;
    let shared = if cfg.rejitter_per_run {
        None
    } else {
        Some(connected_topology(cfg, 0)?)
    };
    let outputs: Vec<RunOutput> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| execute_run(cfg, run, shared.as_ref()).map(|(o, _)| o))
        .collect::<Result<_>>()?;

    let columns = if cfg.variant.is_distributed() { cfg.sensors } else { 1 };
    let mut rec = RunRecord::zeros(cfg.variant, cfg.runs, cfg.steps, columns);
    for (run, out) in outputs.into_iter().enumerate() {
        for (n, row) in out.err_sq.iter().enumerate() {
            for (s, &v) in row.iter().enumerate() {
                rec.set(run, n, s, v);
            }
        }
        rec.measurement_hashes[run] = out.hash;
        rec.diagnostics[run] = out.diagnostics;
        rec.scalars_sent_per_sensor[run] = out.scalars_sent;
    }
    let summary = summarize(cfg, &rec)?;
    Ok((rec, summary))
}

/// Estimates of every filter (one per sensor, or one for the centralized
/// filter) at every step of a single run.
pub fn trace_run(cfg: &ScenarioConfig, run: usize) -> Result<EstimateTrace> {
    cfg.validate()?;
    let topology = connected_topology(cfg, run)?;
    execute_run(cfg, run, Some(&topology)).map(|(_, trace)| trace)
}
