//! Serialization of traces, Bode tables and metrics reports.
//!
//! All floating-point output is decimal text with 17 significant digits, so
//! files round-trip f64 values bit-exactly and diff cleanly under regression.

use pllsim::analysis::BodeTable;
use pllsim::{LoopParams, SimTrace};

use crate::config::{echo, Resolved};

/// Fixed trace schema; the header is part of the file contract.
pub const TRACE_CSV_HEADER: &str = "t_s,v_pd_v,v_cont_v,phase_out_rad,freq_out_hz";

pub fn trace_csv(trace: &SimTrace) -> String {
    let mut out = String::with_capacity(trace.t_s.len() * 100 + 64);
    out.push_str(TRACE_CSV_HEADER);
    out.push('\n');
    for i in 0..trace.t_s.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            trace.t_s[i],
            trace.v_pd_v[i],
            trace.v_cont_v[i],
            trace.phase_out_rad[i],
            trace.freq_out_hz[i],
        ));
    }
    out
}

pub fn bode_csv(table: &BodeTable) -> String {
    let mut out = String::with_capacity(table.freqs_hz.len() * 60 + 32);
    out.push_str("f_hz,mag_db,phase_deg\n");
    for i in 0..table.freqs_hz.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            table.freqs_hz[i], table.mag_db[i], table.phase_deg[i],
        ));
    }
    out
}

/// Post-lock metrics extracted from a trace. Uses the samples from
/// `lock_time` onward, or the last half of the run when lock never fired.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub lock_time_s: Option<f64>,
    pub final_phase_err_rad: Option<f64>,
    pub mean_v_cont_v: f64,
    pub freq_err_rel_final: f64,
}

pub fn metrics(trace: &SimTrace, params: &LoopParams) -> Metrics {
    let f_target = params.f_target();
    let start_t = trace
        .lock_time_s
        .unwrap_or_else(|| trace.t_s[trace.t_s.len() / 2]);
    let start = trace.t_s.iter().position(|&t| t >= start_t).unwrap_or(0);
    let tail = &trace.v_cont_v[start..];
    let mean_v_cont_v = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let freq_final = *trace.freq_out_hz.last().expect("trace is never empty");
    Metrics {
        lock_time_s: trace.lock_time_s,
        final_phase_err_rad: trace.final_phase_err_rad,
        mean_v_cont_v,
        freq_err_rel_final: (freq_final - f_target).abs() / f_target,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.16e}"))
}

/// key=value metrics report, prefixed with the re-parseable config echo.
pub fn metrics_report(resolved: &Resolved, trace: &SimTrace) -> String {
    let m = metrics(trace, &resolved.params);
    let mut out = echo(resolved);
    out.push_str("# metrics\n");
    out.push_str(&format!("lock_time_s={}\n", opt(m.lock_time_s)));
    out.push_str(&format!("final_phase_err_rad={}\n", opt(m.final_phase_err_rad)));
    out.push_str(&format!("mean_v_cont_v={:.16e}\n", m.mean_v_cont_v));
    out.push_str(&format!("freq_err_rel_final={:.16e}\n", m.freq_err_rel_final));
    out
}

/// Extract the echo block (everything above `# metrics`) from a report.
pub fn echo_section(report: &str) -> String {
    report
        .lines()
        .take_while(|line| !line.starts_with("# metrics"))
        .map(|l| format!("{l}\n"))
        .collect()
}
