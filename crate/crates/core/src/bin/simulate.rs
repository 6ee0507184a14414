use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use uwbsim::config::{load_config, ConfigError};
use uwbsim::experiment::{run_experiment, ExperimentError};

/// Run a simulation experiment and write runs.csv and summary.csv.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Args {
    /// Experiment file (flat `key = value` lines)
    config: PathBuf,
    /// Sweep axis `key=v1,v2,...`; repeatable, replaces an axis of the same key
    #[arg(long, value_name = "KEY=V1,V2,...")]
    sweep: Vec<String>,
    /// Replications per sweep point
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    /// Base seed
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

const CONFIG_ERROR: u8 = 1;
const RUNTIME_ERROR: u8 = 2;

fn config_error(e: &ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(CONFIG_ERROR)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(CONFIG_ERROR);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };

    let mut spec = match load_config(&args.config) {
        Ok(s) => s,
        Err(e) => return config_error(&e),
    };
    for s in &args.sweep {
        if let Err(e) = spec.add_sweep(s) {
            return config_error(&e);
        }
    }
    if let Some(n) = args.reps {
        spec.replications = n;
    }
    if let Some(s) = args.seed {
        spec.base_seed = s;
    }
    if let Some(o) = args.out {
        spec.output = o;
    }
    match spec.validate() {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
        }
        Err(e) => return config_error(&e),
    }

    let total = spec.n_points() * spec.replications;
    eprintln!(
        "{} point(s) x {} replication(s) = {total} run(s)",
        spec.n_points(),
        spec.replications
    );
    let result = match run_experiment(&spec) {
        Ok(r) => r,
        Err(ExperimentError::Config(e)) => return config_error(&e),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    };
    if let Err(e) = result.write_to(&spec.output) {
        eprintln!("error: {e}");
        return ExitCode::from(RUNTIME_ERROR);
    }
    eprintln!("wrote {}", spec.output.display());
    ExitCode::SUCCESS
}
