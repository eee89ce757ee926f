//! `magnomech` command-line interface.

mod commands;
mod grid;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use magnomech::fluctuation::SpectrumMethod;
use magnomech::sensing::SweepKind;
use magnomech::Error;

use crate::commands::{ReportedUnstable, SpectrumArgs, SweepArgs, UsageError};
use crate::grid::GridSpec;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "magnomech",
    version,
    about = "Cavity magnomechanical magnon-population meter"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Resolvent,
    Explicit,
}

impl From<MethodArg> for SpectrumMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Resolvent => SpectrumMethod::Resolvent,
            MethodArg::Explicit => SpectrumMethod::Explicit,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Steady,
    Sensing,
}

impl From<KindArg> for SweepKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Steady => SweepKind::Steady,
            KindArg::Sensing => SweepKind::Sensing,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the mean-field steady state and report the linear measuring window.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Relative error allowed in the linear window.
        #[arg(long, default_value_t = magnomech::steady::DEFAULT_WINDOW_MARGIN)]
        margin: f64,
    },
    /// Noise spectral density of the cavity phase quadrature.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Lower frequency bound, Hz (default 0).
        #[arg(long)]
        omega_min: Option<f64>,
        /// Upper frequency bound, Hz (default twice the mechanical frequency).
        #[arg(long)]
        omega_max: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        n_points: usize,
        #[arg(long, value_enum, default_value = "resolvent")]
        method: MethodArg,
        /// Also evaluate the other method and fail if they differ by more than 1e-9.
        #[arg(long)]
        check: bool,
        /// Write a gnuplot script for the CSV output.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Sweep the meter over one parameter axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// One of N_m, P_L, kappa_c, T.
        #[arg(long, default_value = "N_m")]
        axis: String,
        /// lin:A:B:N, log:A:B:N, list:A,B,... or window:N.
        #[arg(long)]
        grid: GridSpec,
        /// Population grid swept for every value of a non-population axis.
        #[arg(long)]
        nm_grid: Option<GridSpec>,
        #[arg(long, value_enum, default_value = "sensing")]
        kind: KindArg,
        #[arg(long, default_value_t = magnomech::steady::DEFAULT_WINDOW_MARGIN)]
        margin: f64,
        /// Write a gnuplot script for the CSV output.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Magnomechanical coupling from a magnon mode profile.
    Coupling {
        /// Material constants (b1, M_S, gamma) as JSON.
        #[arg(long, alias = "config")]
        material: PathBuf,
        /// Mode-profile CSV; repeat with halving spacing for a convergence study.
        #[arg(long = "mode", required = true)]
        modes: Vec<PathBuf>,
        /// Sidecar metadata per mode (defaults to the CSV path with a .json extension).
        #[arg(long = "sidecar")]
        sidecars: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Eigenvalues and Routh-Hurwitz verdict of the linearized dynamics.
    Stability {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MAGNOMECH_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            UsageError(format!(
                "MAGNOMECH_THREADS must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Steady {
            config,
            out,
            format,
            margin,
        } => commands::steady(&config, out.as_deref(), format, margin),
        Command::Spectrum {
            config,
            out,
            format,
            omega_min,
            omega_max,
            n_points,
            method,
            check,
            plot,
        } => {
            let args = SpectrumArgs {
                omega_min_hz: omega_min,
                omega_max_hz: omega_max,
                n_points,
                method: method.into(),
                check,
                plot,
            };
            commands::spectrum(&config, out.as_deref(), format, &args)
        }
        Command::Sweep {
            config,
            out,
            format,
            axis,
            grid,
            nm_grid,
            kind,
            margin,
            plot,
        } => {
            let args = SweepArgs {
                axis,
                grid,
                nm_grid,
                kind: kind.into(),
                margin,
                plot,
            };
            commands::sweep_cmd(&config, out.as_deref(), format, &args)
        }
        Command::Coupling {
            material,
            modes,
            sidecars,
            out,
            format,
        } => commands::coupling(&material, &modes, &sidecars, out.as_deref(), format),
        Command::Stability { config, out } => commands::stability_cmd(&config, out.as_deref()),
    }
}

/// 2: invalid input, 3: numerical failure, 4: unstable system, 1: other.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if cause.is::<ReportedUnstable>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Validation { .. }
                | Error::Domain(_)
                | Error::WindowEmpty(_)
                | Error::ModeField(_)
                | Error::Parse(_)
                | Error::Io(_) => 2,
                Error::Solver { .. }
                | Error::Quadrature { .. }
                | Error::NonMonotone { .. }
                | Error::OutOfLinearRange { .. } => 3,
                Error::Unstable { .. } => 4,
            };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
