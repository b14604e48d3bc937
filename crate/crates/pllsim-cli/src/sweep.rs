//! Grid sweeps over one or two configuration keys.
//!
//! Each grid point re-resolves the base configuration with the swept values
//! substituted, runs a full simulation and records the lock/error metrics.
//! Workers pull points from a shared index; rows are merged back in grid
//! order, so the output is identical for any `--jobs`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pllsim::engine::simulate;

use crate::config::parse_config_with_overrides;
use crate::output::metrics;
use crate::CliError;

/// One swept key and its grid values.
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

/// Parse `key=lo:hi:n` or `key=lo:hi:n:log`.
pub fn parse_axis(spec: &str) -> Result<SweepAxis, CliError> {
    let bad = |why: &str| CliError::Config(format!("bad sweep spec `{spec}`: {why}"));
    let (key, grid) = spec
        .split_once('=')
        .ok_or_else(|| bad("expected key=lo:hi:n[:log]"))?;
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() < 3 || parts.len() > 4 {
        return Err(bad("expected lo:hi:n or lo:hi:n:log"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad("unparseable lower bound"))?;
    let hi: f64 = parts[1].parse().map_err(|_| bad("unparseable upper bound"))?;
    let n: usize = parts[2].parse().map_err(|_| bad("unparseable point count"))?;
    let log = match parts.get(3) {
        None => false,
        Some(&"log") => true,
        Some(other) => return Err(bad(&format!("unknown spacing `{other}`"))),
    };
    if n < 1 {
        return Err(bad("need at least one point"));
    }
    if n > 1 && hi <= lo {
        return Err(bad("need lo < hi"));
    }
    if log && lo <= 0.0 {
        return Err(bad("log spacing needs lo > 0"));
    }
    let values = (0..n)
        .map(|i| {
            if n == 1 {
                lo
            } else if log {
                let t = i as f64 / (n - 1) as f64;
                lo * (hi / lo).powf(t)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    Ok(SweepAxis { key: key.trim().to_string(), values })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.16e}"))
}

/// Run the grid and render the result table as CSV.
pub fn run_sweep(base_text: &str, axes: &[SweepAxis], jobs: usize) -> Result<String, CliError> {
    if axes.is_empty() || axes.len() > 2 {
        return Err(CliError::Config("sweep takes one or two --param axes".into()));
    }
    // validate the base once up front so grid workers only see numeric issues
    parse_config_with_overrides(base_text, &[])?;

    let mut grid: Vec<Vec<(String, f64)>> = Vec::new();
    match axes {
        [a] => {
            for &v in &a.values {
                grid.push(vec![(a.key.clone(), v)]);
            }
        }
        [a, b] => {
            for &va in &a.values {
                for &vb in &b.values {
                    grid.push(vec![(a.key.clone(), va), (b.key.clone(), vb)]);
                }
            }
        }
        _ => unreachable!(),
    }

    let results: Mutex<Vec<Option<Result<String, CliError>>>> =
        Mutex::new(vec![None; grid.len()]);
    let next = AtomicUsize::new(0);
    let workers = jobs.max(1).min(grid.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= grid.len() {
                    break;
                }
                let row = run_point(base_text, &grid[i]);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let mut out = String::new();
    match axes {
        [a] => out.push_str(&format!(
            "{},lock_time_s,final_phase_err_rad,mean_v_cont_v,freq_err_rel_final\n",
            a.key
        )),
        [a, b] => out.push_str(&format!(
            "{},{},lock_time_s,final_phase_err_rad,mean_v_cont_v,freq_err_rel_final\n",
            a.key, b.key
        )),
        _ => unreachable!(),
    }
    for row in results.into_inner().unwrap() {
        out.push_str(&row.expect("every grid point ran")?);
    }
    Ok(out)
}

fn run_point(base_text: &str, overrides: &[(String, f64)]) -> Result<String, CliError> {
    let resolved = parse_config_with_overrides(base_text, overrides)?;
    let trace = simulate(&resolved.params, &resolved.filter, &resolved.sim, &resolved.jitters)
        .map_err(CliError::from)?;
    let m = metrics(&trace, &resolved.params);
    let mut row = String::new();
    for (_, v) in overrides {
        row.push_str(&format!("{v:.16e},"));
    }
    row.push_str(&format!(
        "{},{},{:.16e},{:.16e}\n",
        opt(m.lock_time_s),
        opt(m.final_phase_err_rad),
        m.mean_v_cont_v,
        m.freq_err_rel_final
    ));
    Ok(row)
}
