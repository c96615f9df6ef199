use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lcdpf::harness::{
    connected_topology, run_scenario, run_sweep, write_outputs, write_sweep, ScenarioConfig, SweepParam,
};
use lcdpf::FilterVariant;

#[derive(Parser)]
#[command(name = "lcdpf", version, about = "Distributed particle filtering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment of one scenario.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<FilterVariant>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Redeploy the sensors for every run.
        #[arg(long)]
        rejitter_per_run: bool,
    },
    /// Repeat the experiment over several values of one parameter.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write the deployed communication graph as JSON.
    Topology {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "topology.json")]
        out: PathBuf,
    },
}

fn load(path: Option<&PathBuf>) -> lcdpf::Result<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::from_file(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn execute(cli: Cli) -> lcdpf::Result<()> {
    match cli.command {
        Command::Run {
            config,
            runs,
            steps,
            seed,
            variant,
            out,
            rejitter_per_run,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(v) = runs {
                cfg.runs = v;
            }
            if let Some(v) = steps {
                cfg.steps = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = variant {
                cfg.variant = v;
            }
            cfg.rejitter_per_run |= rejitter_per_run;
            let (rec, summary) = run_scenario(&cfg)?;
            write_outputs(&out, &rec, &summary)?;
            println!(
                "{}: ARMSE {:.6} m over {} runs x {} steps; {} scalars/sensor/step, network {}",
                cfg.variant,
                summary.armse,
                cfg.runs,
                cfg.steps,
                summary.comm.measured.per_sensor,
                summary.comm.measured.network
            );
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
        } => {
            let cfg = load(config.as_ref())?;
            let points = run_sweep(&cfg, param, &values, Some(&out))?;
            write_sweep(&out, param, &points)?;
            for p in &points {
                println!("{param} = {}: ARMSE {:.6} m", p.value, p.summary.armse);
            }
        }
        Command::Topology { config, out } => {
            let cfg = load(config.as_ref())?;
            let topology = connected_topology(&cfg, 0)?;
            std::fs::write(&out, topology.to_json()?)?;
            println!("wrote {} ({} sensors)", out.display(), topology.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
