use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mactrack::harness::{
    allocation_sdp, config_hash, write_outage_csv, write_track_csv, AllocProblem, HarnessError, Strategy, SweepVariable,
};
use mactrack::{
    load_scenario, run_allocate, run_mse_sweep, run_outage, run_power_sweep, run_track, sdp_dump, Preset,
    ScenarioConfig, SweepSpec,
};
use serde::Serialize;

/// Optimal sensor gains for Kalman tracking over a coherent multiple-access
/// channel.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file; missing keys take the preset's values.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Preset used when no scenario file is given.
    #[arg(long, value_enum, default_value = "paper-sec7")]
    preset: Preset,
    /// Overrides the sensor count.
    #[arg(long)]
    sensors: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean filtered MSE per strategy over a grid.
    MseSweep {
        #[command(flatten)]
        grid: GridArgs,
        /// Strategies to compare (default: all).
        #[arg(long, value_enum, value_delimiter = ',')]
        strategy: Vec<Strategy>,
    },
    /// Mean required powers per grid value and MSE target.
    PowerSweep {
        #[command(flatten)]
        grid: GridArgs,
        /// MSE targets (ignored for an epsilon grid).
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
    },
    /// Equal-power MSE outage: closed form against Monte Carlo.
    Outage {
        /// Sum-power grid.
        #[arg(long, value_delimiter = ',', required = true)]
        sum_power: Vec<f64>,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[command(flatten)]
        common: ScenarioArgs,
    },
    /// Tracks the parameter over time with one strategy.
    Track {
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value = "sum")]
        strategy: Strategy,
        /// Optimize gains for the initial prediction MSE at every step.
        #[arg(long)]
        hold_gains: bool,
        #[command(flatten)]
        common: ScenarioArgs,
    },
    /// Solves one problem on one draw and prints the allocation as JSON.
    Allocate {
        #[arg(long, value_enum, default_value = "sum")]
        strategy: AllocProblem,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also write the underlying SDP (individual, min-max-power) as JSON.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
        #[command(flatten)]
        common: ScenarioArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_enum, default_value = "n-sensors")]
    variable: SweepVariable,
    /// Grid values, strictly monotone.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 300)]
    trials: usize,
    /// Draw distances and noise variances afresh for every trial.
    #[arg(long)]
    redraw_geometry: bool,
    #[command(flatten)]
    common: ScenarioArgs,
}

impl GridArgs {
    fn spec(&self) -> SweepSpec {
        SweepSpec {
            variable: self.variable,
            values: self.values.clone(),
            trials: self.trials,
            seed: self.common.seed,
            redraw_geometry: self.redraw_geometry,
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, HarnessError> {
    let config = match &args.scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::from_preset(args.preset, None)?,
    };
    Ok(match args.sensors {
        Some(n) => config.with_n_sensors(n)?,
        None => config,
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Serialize)]
struct RunRecord<'a, T: Serialize> {
    command: &'static str,
    version: &'static str,
    scenario: &'a ScenarioConfig,
    run: T,
}

fn hash<T: Serialize>(command: &'static str, scenario: &ScenarioConfig, run: T) -> String {
    config_hash(&RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        scenario,
        run,
    })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::MseSweep { grid, strategy } => {
            let config = load(&grid.common)?;
            let spec = grid.spec();
            let strategies = if strategy.is_empty() {
                Strategy::ALL.to_vec()
            } else {
                strategy
            };
            let result = run_mse_sweep(&config, &spec, &strategies)?;
            let h = hash("mse-sweep", &config, (&spec, &strategies));
            result.write_csv(output(&grid.common.out)?, &h)
        }
        Command::PowerSweep { grid, epsilon } => {
            let config = load(&grid.common)?;
            let spec = grid.spec();
            let result = run_power_sweep(&config, &spec, &epsilon)?;
            let h = hash("power-sweep", &config, (&spec, &epsilon));
            result.write_csv(output(&grid.common.out)?, &h)
        }
        Command::Outage {
            sum_power,
            epsilon,
            trials,
            common,
        } => {
            let config = load(&common)?;
            let rows = run_outage(&config, &sum_power, epsilon, trials, common.seed)?;
            let h = hash("outage", &config, (&sum_power, epsilon, trials, common.seed));
            write_outage_csv(&rows, output(&common.out)?, &h)
        }
        Command::Track {
            steps,
            strategy,
            hold_gains,
            common,
        } => {
            let config = load(&common)?;
            let rows = run_track(&config, steps, strategy, common.seed, hold_gains)?;
            let h = hash("track", &config, (steps, strategy, hold_gains, common.seed));
            write_track_csv(&rows, output(&common.out)?, &h)
        }
        Command::Allocate {
            strategy,
            epsilon,
            dump_sdp,
            common,
        } => {
            let config = load(&common)?;
            if let Some(path) = &dump_sdp {
                match allocation_sdp(&config, strategy, epsilon, common.seed)? {
                    Some(p) => std::fs::write(path, sdp_dump::to_string(&p))?,
                    None => log::warn!("{strategy:?} is not SDP-based; nothing dumped"),
                }
            }
            let report = run_allocate(&config, strategy, epsilon, common.seed)?;
            let mut out = output(&common.out)?;
            serde_json::to_writer_pretty(&mut out, &report).map_err(io::Error::from)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not an error.
        Err(HarnessError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
