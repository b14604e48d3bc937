use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pllsim_cli::{cmd_analyze, cmd_poles, cmd_simulate, cmd_sweep, CliError};

/// Behavioral simulator and linear analyzer for integer-N clock-recovery
/// PLLs. Configuration is a flat key=value file; all outputs are decimal
/// text with 17 significant digits.
#[derive(Parser)]
#[command(name = "pllsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-loop time-domain simulation; write trace.csv and
    /// metrics.txt
    Simulate {
        /// Configuration file
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Also write waves.vcd (square-rendered clocks; full_wave mode only)
        #[arg(long)]
        vcd: bool,
    },
    /// Emit Bode CSVs for the filter, open loop and jitter transfers, plus a
    /// pole/stability report
    Analyze {
        /// Configuration file
        config: PathBuf,
        /// Output directory
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Lower edge of the frequency grid, Hz
        #[arg(long, default_value_t = 1e3)]
        f_lo: f64,
        /// Upper edge of the frequency grid, Hz
        #[arg(long, default_value_t = 1e10)]
        f_hi: f64,
        /// Number of log-spaced grid points
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
    /// Print the loop-filter poles and stability verdict
    Poles {
        /// Configuration file
        config: PathBuf,
    },
    /// Grid over one or two configuration keys; write a lock-time /
    /// phase-error table
    Sweep {
        /// Configuration file
        config: PathBuf,
        /// Sweep axis as key=lo:hi:n or key=lo:hi:n:log (repeat for a 2-D
        /// grid)
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Worker threads; results merge in grid order regardless
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output CSV path
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
}

fn run() -> Result<(), CliError> {
    // usage mistakes are configuration errors (exit 1), not clap's default 2
    let cli = Cli::try_parse().map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            std::process::exit(0);
        }
        _ => CliError::Config(e.to_string()),
    })?;
    match cli.command {
        Command::Simulate { config, out_dir, vcd } => cmd_simulate(&config, &out_dir, vcd),
        Command::Analyze { config, out_dir, f_lo, f_hi, points } => {
            cmd_analyze(&config, &out_dir, f_lo, f_hi, points)
        }
        Command::Poles { config } => cmd_poles(&config),
        Command::Sweep { config, params, jobs, out } => cmd_sweep(&config, &params, jobs, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pllsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
