//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::{converge, load, param_study, simulate, CliError};

#[derive(Parser)]
#[command(name = "curvefront", version, about = "Evolve closed curves and reproduce the circle studies")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `out` in the scenario).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the run's random generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write every k-th frame.
    #[arg(long, global = true, value_name = "K")]
    export_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and export frames.
    Simulate { config: PathBuf },
    /// Circle radius error over `converge.N`.
    Converge { config: PathBuf },
    /// Static normal and curvature errors over stencil sizes and degrees.
    ParamStudy { config: PathBuf },
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let path = match &cli.command {
        Command::Simulate { config } | Command::Converge { config } | Command::ParamStudy { config } => config,
    };
    let cfg = load(path)?.with_overrides(cli.seed, cli.export_every, cli.out.clone());
    match cli.command {
        Command::Simulate { .. } => {
            let s = simulate(&cfg)?;
            for key in ["final_time", "final_points", "final_mean_radius"] {
                println!("{key}: {}", s.get(key).unwrap_or("-"));
            }
        }
        Command::Converge { .. } => {
            println!("n,h,error,mean_radius");
            for r in converge(&cfg)? {
                println!("{},{:.4e},{:.4e},{:.7}", r.n, r.h, r.error, r.mean_radius);
            }
        }
        Command::ParamStudy { .. } => {
            println!("m,p,normal_error,curvature_error");
            for r in param_study(&cfg)? {
                println!("{},{},{:.4e},{:.4e}", r.stencil_size, r.degree, r.normal_error, r.curvature_error);
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("curvefront: {e}");
            e.exit_code()
        }
    }
}
