//! Monte Carlo experiment harness: scenario configuration, runs, metrics and
//! result files.

mod config;
mod metrics;
mod output;
mod run;
mod sweep;

pub use config::ScenarioConfig;
pub use metrics::{
    armse, comm_budget, per_run_armse, rmse_series, summarize, version_string, CommBudget, CommSummary, MetricsSummary,
    RunRecord, REFERENCE_DPF1_NETWORK_TOTAL, REFERENCE_DPF2_NETWORK_TOTAL,
};
pub use output::{
    read_config_echo, read_results_csv, read_rmse_csv, read_summary_json, write_outputs, RESULTS_FILE, RMSE_FILE,
    SUMMARY_FILE,
};
pub use run::{
    connected_topology, deployment, run_scenario, simulate_measurements, simulate_truth, trace_run, EstimateTrace,
};
pub use sweep::{run_sweep, write_sweep, SweepParam, SweepPoint};
