//! `poisson-bell` command-line front end.
//!
//! Every subcommand writes its artifacts (JSON reports, CSV curves) and a
//! `manifest.json` into `--out`. Exit codes: 0 success, 1 output error,
//! 2 invalid spec or arguments, 3 solver failure, 4 verification failure.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poisson_bell::Execution;

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "poisson-bell", version, about = "Poisson kernels of y-dependent elliptic operators and their shape")]
struct Cli {
    /// Worker threads for batch evaluation; 0 uses all cores, 1 runs sequentially.
    #[arg(long, global = true, env = "POISSON_BELL_WORKERS", default_value_t = 0)]
    workers: usize,

    /// Directory for reports, curves and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct KernelGrid {
    /// Half-width of the x-window.
    #[arg(long, default_value_t = 50.0)]
    pub x_window: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel P_y on a uniform x-grid, optionally with a bell-shape check.
    Kernel {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        y: f64,
        #[command(flatten)]
        grid: KernelGrid,
        /// Gauss smoothing parameter t; automatic when omitted.
        #[arg(long)]
        smoothing: Option<f64>,
        /// Derivative order in x.
        #[arg(long, default_value_t = 0)]
        order: u32,
        /// Check sign changes of derivatives of orders 0..=N.
        #[arg(long, value_name = "N")]
        bellshape: Option<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2])]
        t: Vec<f64>,
    },
    /// Factorisation of phi_xi at one or more split points.
    VerifyFactorization {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, required = true, value_delimiter = ',')]
        split: Vec<f64>,
        #[command(flatten)]
        xi: XiGrid,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Bell shape of the smoothed kernel at several heights.
    VerifyBellshape {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
        y: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2])]
        t: Vec<f64>,
        #[command(flatten)]
        grid: KernelGrid,
    },
    /// Closed-form kernel profiles as CSV.
    ClosedForm {
        #[arg(long, value_enum)]
        family: Family,
        /// Comma-separated `key=value` pairs, e.g. `p=1,q=0.5,mu=0.8`.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        x_min: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        x_max: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Monte Carlo hitting positions, compared with the spectral solution.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        y0: f64,
        #[arg(long)]
        paths: usize,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e3)]
        max_time: f64,
        /// Half-width of the occupation band at atoms; sqrt(dt) by default.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Frequencies at which the empirical characteristic function is compared.
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        xi: Vec<f64>,
        /// KS tolerance; max(0.01, 1.63/sqrt(hits)) by default.
        #[arg(long)]
        ks_tol: Option<f64>,
        #[command(flatten)]
        grid: KernelGrid,
    },
    /// Re(psi(xi)/xi) >= 0 on a grid of real or complex frequencies.
    Rogers {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        xi: XiGrid,
        /// Also sample the rays arg(xi) = +-angle.
        #[arg(long)]
        angle: Option<f64>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Factorisation, bell shape and Rogers checks together.
    Verify {
        #[arg(long)]
        spec: PathBuf,
        /// Split points; a quarter, half and three quarters of R by default.
        #[arg(long, value_delimiter = ',')]
        split: Vec<f64>,
        /// Kernel heights; 0.1, 0.5, 0.9 (times R on a strip) by default.
        #[arg(long, value_delimiter = ',')]
        y: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        grid: KernelGrid,
        /// Corrupt phi before checking, to exercise the failure path.
        #[arg(long)]
        inject_fault: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct XiGrid {
    #[arg(long, default_value_t = 0.05)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub xi_max: f64,
    #[arg(long, default_value_t = 60)]
    pub xi_count: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Cs,
    Classical,
    Homogeneous,
}

/// A failed run and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Failure { code: 1, message: format!("{}: {err}", path.display()) }
    }
}

impl From<poisson_bell::Error> for Failure {
    fn from(err: poisson_bell::Error) -> Self {
        use poisson_bell::Error as E;
        let code = match err {
            E::InvalidSpec(_) | E::NotLocallyIntegrable { .. } | E::InvalidArgument(_) => 2,
            _ => 3,
        };
        Failure { code, message: err.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub struct Context {
    pub out: PathBuf,
    pub workers: usize,
    pub exec: Execution,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| Failure::invalid(format!("cannot start {} workers: {e}", cli.workers)))?;
    }
    let exec = if cli.workers == 1 { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context { out: cli.out, workers: rayon::current_num_threads(), exec };
    match cli.command {
        Command::Kernel { spec, y, grid, smoothing, order, bellshape, t } => {
            commands::kernel(&ctx, &spec, y, &grid, smoothing, order, bellshape, t)
        }
        Command::VerifyFactorization { spec, split, xi, tol } => {
            commands::verify_factorization(&ctx, &spec, &split, &xi, tol)
        }
        Command::VerifyBellshape { spec, y, n_max, t, grid } => {
            commands::verify_bellshape(&ctx, &spec, &y, n_max, t, &grid)
        }
        Command::ClosedForm { family, params, x_min, x_max, points } => {
            commands::closed_form(&ctx, family, &params, x_min, x_max, points)
        }
        Command::Simulate { spec, y0, paths, dt, seed, max_time, epsilon, xi, ks_tol, grid } => {
            let sim = commands::SimulateArgs { y0, paths, dt, seed, max_time, epsilon, xi, ks_tol };
            commands::simulate(&ctx, &spec, &sim, &grid)
        }
        Command::Rogers { spec, xi, angle, tol } => commands::rogers(&ctx, &spec, &xi, angle, tol),
        Command::Verify { spec, split, y, tol, grid, inject_fault } => {
            commands::verify(&ctx, &spec, split, y, tol, &grid, inject_fault)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
