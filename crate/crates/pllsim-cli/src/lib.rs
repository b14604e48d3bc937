//! Command implementations behind the `pllsim` binary: configuration
//! parsing, simulation and analysis drivers, and file serialization.

use std::fmt;
use std::fs;
use std::path::Path;

use pllsim::analysis::{
    bode, crossover_freq, input_jitter_tf, open_loop_tf, stability, vco_jitter_tf,
};
use pllsim::blocks::{filter_poles, filter_tf};
use pllsim::engine::simulate;

pub mod config;
pub mod output;
pub mod sweep;
pub mod vcd;

use config::{echo, parse_config, Resolved};

/// Errors mapped onto process exit codes: config = 1, diverged = 2, I/O = 3.
#[derive(Debug, Clone)]
pub enum CliError {
    Config(String),
    Diverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Diverged(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Diverged(msg) => write!(f, "simulation diverged: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<pllsim::Error> for CliError {
    fn from(e: pllsim::Error) -> Self {
        match e {
            pllsim::Error::Diverged(msg) => CliError::Diverged(msg),
            pllsim::Error::Cancelled => CliError::Diverged("cancelled".into()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn load(path: &Path) -> Result<Resolved, CliError> {
    parse_config(&read_config(path)?)
}

/// `simulate <config>`: run the loop, write `trace.csv` and `metrics.txt`
/// (plus `waves.vcd` with `--vcd`), and print the metrics to stdout.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, want_vcd: bool) -> Result<(), CliError> {
    let resolved = load(config_path)?;
    let trace = simulate(&resolved.params, &resolved.filter, &resolved.sim, &resolved.jitters)?;
    ensure_dir(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    let metrics_path = out_dir.join("metrics.txt");
    write_file(&trace_path, &output::trace_csv(&trace))?;
    let report = output::metrics_report(&resolved, &trace);
    write_file(&metrics_path, &report)?;
    if want_vcd {
        let vcd_path = out_dir.join("waves.vcd");
        write_file(&vcd_path, &vcd::render_vcd(&trace)?)?;
        println!("wrote {}", vcd_path.display());
    }
    println!("wrote {}", trace_path.display());
    println!("wrote {}", metrics_path.display());
    for line in report.lines().skip_while(|l| !l.starts_with("# metrics")).skip(1) {
        println!("{line}");
    }
    Ok(())
}

/// `analyze <config>`: emit Bode CSVs for the filter, the open loop and both
/// jitter transfers, plus a pole/stability report.
pub fn cmd_analyze(
    config_path: &Path,
    out_dir: &Path,
    f_lo: f64,
    f_hi: f64,
    points: usize,
) -> Result<(), CliError> {
    let resolved = load(config_path)?;
    let params = &resolved.params;
    let filter = &resolved.filter;

    let g = filter_tf(filter);
    let l = open_loop_tf(params, filter);
    let h_in = input_jitter_tf(params, filter);
    let h_vco = vco_jitter_tf(params, filter);

    ensure_dir(out_dir)?;
    for (name, tf) in [
        ("bode_filter.csv", &g),
        ("bode_open_loop.csv", &l),
        ("bode_input_jitter.csv", &h_in),
        ("bode_vco_jitter.csv", &h_vco),
    ] {
        let table = bode(tf, f_lo, f_hi, points).map_err(CliError::from)?;
        let path = out_dir.join(name);
        write_file(&path, &output::bode_csv(&table))?;
        println!("wrote {}", path.display());
    }

    let poles = filter_poles(filter);
    let mut report = echo(&resolved);
    report.push_str("# analysis\n");
    report.push_str(&format!("filter_a1={:.16e}\n", filter.a1()));
    report.push_str(&format!("filter_a2={:.16e}\n", filter.a2()));
    report.push_str(&format!("filter_pole_s1={:.9e} {:+.9e}j rad/s\n", poles.s1.re, poles.s1.im));
    report.push_str(&format!("filter_pole_s2={:.9e} {:+.9e}j rad/s\n", poles.s2.re, poles.s2.im));
    report.push_str(&format!("filter_stability={}\n", stability(&g).map_err(CliError::from)?));
    report.push_str(&format!(
        "closed_loop_stability={}\n",
        stability(&h_in).map_err(CliError::from)?
    ));
    match crossover_freq(&l) {
        Some(fc) => report.push_str(&format!("open_loop_crossover_hz={fc:.9e}\n")),
        None => report.push_str("open_loop_crossover_hz=none\n"),
    }
    let path = out_dir.join("analysis.txt");
    write_file(&path, &report)?;
    println!("wrote {}", path.display());
    print!("{report}");
    Ok(())
}

/// `poles <config>`: print the filter's denominator roots and verdict.
pub fn cmd_poles(config_path: &Path) -> Result<(), CliError> {
    let resolved = load(config_path)?;
    let filter = &resolved.filter;
    let poles = filter_poles(filter);
    println!("a1 = {:.9e} rad^2/s^2", filter.a1());
    println!("a2 = {:.9e} rad/s", filter.a2());
    println!("s1 = {:.9e} {:+.9e}j rad/s", poles.s1.re, poles.s1.im);
    println!("s2 = {:.9e} {:+.9e}j rad/s", poles.s2.re, poles.s2.im);
    let verdict = stability(&filter_tf(filter)).map_err(CliError::from)?;
    println!("stability = {verdict}");
    Ok(())
}

/// `sweep <config> --param ...`: run the grid, write the result table.
pub fn cmd_sweep(
    config_path: &Path,
    axes: &[String],
    jobs: usize,
    out_path: &Path,
) -> Result<(), CliError> {
    let text = read_config(config_path)?;
    let resolved = parse_config(&text)?;
    let axes = axes
        .iter()
        .map(|s| sweep::parse_axis(s))
        .collect::<Result<Vec<_>, _>>()?;
    let csv = sweep::run_sweep(&text, &axes, jobs)?;
    write_file(out_path, &csv)?;
    print!("{}", echo(&resolved));
    let points: usize = axes.iter().map(|a| a.values.len()).product();
    println!("# sweep: {points} points, {jobs} jobs");
    println!("wrote {}", out_path.display());
    Ok(())
}
