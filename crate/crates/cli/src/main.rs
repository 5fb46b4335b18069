//! `lognodal`: solve and verify radial nodal structure for the
//! logarithmically perturbed critical Dirichlet problem on balls.

mod commands;
mod config;
mod output;
mod svg;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use config::{Format, RunConfig, Sign};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lognodal",
    about = "Radial solver and energy-gap verifier for -Δu = λu + |u|^{p-2}u + θ u log u² on balls",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonFlags {
    /// JSON configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Stdout format for summaries.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    plot: bool,
    /// Worker threads for sweeps and scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Dimension N >= 3.
    #[arg(long = "N", global = true)]
    dim: Option<usize>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    theta: Option<f64>,
    /// Power exponent p in (2, 2N/(N-2)]; critical when omitted.
    #[arg(long = "p", global = true)]
    exponent: Option<f64>,
    /// Ball radius.
    #[arg(long = "R", global = true)]
    radius: Option<f64>,
    /// Number of nodal domains.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Sign of the solution at the center: + or -.
    #[arg(long, global = true, allow_hyphen_values = true)]
    sign: Option<Sign>,
    /// Integrator tolerance multiplier.
    #[arg(long, global = true)]
    tol_factor: Option<f64>,
    /// Cutoff inner radius for bubble constructions.
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Largest domain count in gap reports.
    #[arg(long, global = true)]
    k_max: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot for the radial solution with k nodal domains.
    Solve {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Run a named verification and emit a JSON report.
    Verify {
        /// One of: bubbles, bc-gap, nodal-gap, logsob, cross-term, continuation.
        check: String,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Evaluate a quantity over a parameter grid and emit CSV.
    Sweep {
        /// Sweep axis: lambda, theta, p, or eps.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Quantity: bc-gap, nodal-gap, level, ground, or log-moment.
        #[arg(long)]
        quantity: String,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Build the k-domain solution by node-optimized gluing.
    Glue {
        /// Comma-separated initial interior nodes.
        #[arg(long, value_delimiter = ',')]
        init_nodes: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn merge(common: &CommonFlags) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.dim {
        cfg.dim = v;
    }
    if let Some(v) = common.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = common.theta {
        cfg.theta = v;
    }
    if common.exponent.is_some() {
        cfg.exponent = common.exponent;
    }
    if let Some(v) = common.radius {
        cfg.radius = v;
    }
    if let Some(v) = common.k {
        cfg.k = v;
    }
    if let Some(v) = common.sign {
        cfg.sign = v;
    }
    if let Some(v) = common.tol_factor {
        cfg.tol_factor = v;
    }
    if let Some(v) = common.rho {
        cfg.rho = v;
    }
    if let Some(v) = common.k_max {
        cfg.k_max = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.format {
        cfg.format = v;
    }
    if common.plot {
        cfg.plot = true;
    }
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    // documented escape hatch: LOGNODAL_TOL sets the relative integrator
    // tolerance directly (default 1e-10)
    if let Ok(text) = std::env::var("LOGNODAL_TOL") {
        let tol: f64 = text
            .parse()
            .map_err(|_| anyhow::anyhow!("LOGNODAL_TOL must be a number, got '{text}'"))?;
        cfg.tol_factor = tol / 1e-10;
    }
    // fail early on inadmissible parameters
    cfg.params()?;
    Ok(cfg)
}

type CommandFn = Box<dyn FnOnce(&RunConfig) -> Result<i32>>;

fn dispatch() -> Result<i32> {
    let cli = Cli::parse();
    let (common, run): (&CommonFlags, CommandFn) = match &cli.command {
        Command::Solve { common } => (common, Box::new(commands::cmd_solve)),
        Command::Verify { check, common } => {
            let check = check.clone();
            (common, Box::new(move |cfg| commands::cmd_verify(cfg, &check)))
        }
        Command::Sweep {
            axis,
            values,
            quantity,
            common,
        } => {
            let (axis, values, quantity) = (axis.clone(), values.clone(), quantity.clone());
            (
                common,
                Box::new(move |cfg| commands::cmd_sweep(cfg, &axis, &values, &quantity)),
            )
        }
        Command::Glue { init_nodes, common } => {
            let init = init_nodes.clone();
            (
                common,
                Box::new(move |cfg: &RunConfig| {
                    let mut cfg = cfg.clone();
                    if init.is_some() {
                        cfg.init_nodes = init;
                    }
                    if cfg.k < 2 {
                        eprintln!("gluing needs --k of at least 2");
                        return Ok(commands::EXIT_CONFIG);
                    }
                    commands::cmd_glue(&cfg)
                }),
            )
        }
    };
    let cfg = match merge(common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return Ok(commands::EXIT_CONFIG);
        }
    };
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .ok();
    }
    run(&cfg)
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_SOLVER as u8)
        }
    }
}
