//! `stablepwl`: fit piecewise-linear models, export flow fields and run the
//! contraction diagnostics.
//!
//! Exit status is 0 on success, 1 for usage and input errors and 2 when the
//! numerics fail.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use crate::commands::Outputs;
use crate::config::{FlowKind, RunConfig};

#[derive(Parser)]
#[command(
    name = "stablepwl",
    version,
    about = "Stable learning of piecewise-linear functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a one-input model from the least-squares line.
    Fit1d {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Fit a multi-input model from a model file, a neighbour table or the
    /// least-squares plane.
    Fitnd {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        fit: FitFlags,
        /// Initial model JSON.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Neighbour table; weights and anchors come from the config.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long)]
        input_dim: Option<usize>,
    },
    /// Sample the two-neuron flow in output coordinates.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Repeat for several kinds.
        #[arg(long = "kind", value_enum)]
        kinds: Vec<FlowKind>,
        /// Repeat for several targets.
        #[arg(long = "target", allow_hyphen_values = true)]
        targets: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Observability rank, gradient and Jacobian checks for a model.
    Diag {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Model JSON; defaults to the least-squares fit of the dataset.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input_dim: Option<usize>,
        #[arg(long)]
        time_constant: Option<f64>,
        /// Random states for the gradient check.
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FitFlags {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    time_constant: Option<f64>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    h_min: Option<f64>,
    /// Cap on the total integration time; 0 keeps the initial model.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    final_horizon: Option<f64>,
    #[arg(long)]
    split_threshold: Option<f64>,
    #[arg(long)]
    cost_tol: Option<f64>,
    /// Keep every n-th step in trajectory.csv.
    #[arg(long)]
    stride: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

impl Common {
    fn load(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.out, self.out);
        set(&mut cfg.seed, self.seed);
        Ok(cfg)
    }
}

impl FitFlags {
    fn apply(self, cfg: &mut RunConfig) {
        set(&mut cfg.dataset, self.dataset);
        set(&mut cfg.time_constant, self.time_constant);
        set(&mut cfg.h0, self.h0);
        set(&mut cfg.h_min, self.h_min);
        set(&mut cfg.t_end, self.t_end);
        set(&mut cfg.splits, self.splits);
        set(&mut cfg.horizon, self.horizon);
        set(&mut cfg.final_horizon, self.final_horizon);
        set(&mut cfg.split_threshold, self.split_threshold);
        set(&mut cfg.cost_tol, self.cost_tol);
        set(&mut cfg.trajectory_stride, self.stride);
    }
}

type Runner = fn(&RunConfig) -> Result<(Outputs, String)>;

fn resolve(command: Command) -> Result<(RunConfig, Runner)> {
    Ok(match command {
        Command::Fit1d { common, fit } => {
            let mut cfg = common.load()?;
            fit.apply(&mut cfg);
            (cfg, commands::fit1d_cmd)
        }
        Command::Fitnd {
            common,
            fit,
            model,
            table,
            input_dim,
        } => {
            let mut cfg = common.load()?;
            fit.apply(&mut cfg);
            // A flag for one initial source replaces the config's other one.
            if model.is_some() || table.is_some() {
                cfg.model = model;
                cfg.table = table;
            }
            set(&mut cfg.input_dim, input_dim);
            (cfg, commands::fitnd_cmd)
        }
        Command::Flow {
            common,
            kinds,
            targets,
            lo,
            hi,
            resolution,
        } => {
            let mut cfg = common.load()?;
            if !kinds.is_empty() {
                cfg.kinds = Some(kinds);
            }
            if !targets.is_empty() {
                cfg.targets = Some(targets);
            }
            let grid = cfg
                .grid
                .get_or_insert_with(|| stablepwl::diagnostics::FlowGrid::square(-2.0, 2.0, 21));
            if let Some(lo) = lo {
                grid.lo = [lo, lo];
            }
            if let Some(hi) = hi {
                grid.hi = [hi, hi];
            }
            if let Some(n) = resolution {
                grid.resolution = [n, n];
            }
            (cfg, commands::flow_cmd)
        }
        Command::Diag {
            common,
            dataset,
            model,
            input_dim,
            time_constant,
            trials,
        } => {
            let mut cfg = common.load()?;
            set(&mut cfg.dataset, dataset);
            set(&mut cfg.model, model);
            set(&mut cfg.input_dim, input_dim);
            set(&mut cfg.time_constant, time_constant);
            set(&mut cfg.trials, trials);
            (cfg, commands::diag_cmd)
        }
    })
}

fn run(command: Command) -> Result<String> {
    let (cfg, runner) = resolve(command)?;
    let (outputs, line) = runner(&cfg)?;
    outputs.write(&cfg.out_dir())?;
    Ok(line)
}

/// Numeric failures of the library exit with 2, everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<stablepwl::Error>())
        .any(stablepwl::Error::is_numeric);
    if numeric {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
