//! VCD rendering of full-wave carrier samples as square clocks.
//!
//! The reference and output carriers are thresholded at zero and emitted as
//! 1-bit wires; edges are resolved to the trace sample grid (use
//! `decimation=1` for full resolution). No date header is written so output
//! is byte-stable across runs.

use pllsim::SimTrace;

use crate::CliError;

pub fn render_vcd(trace: &SimTrace) -> Result<String, CliError> {
    let waves = trace.carrier.as_ref().ok_or_else(|| {
        CliError::Config("VCD export needs carrier data: run with mode=full_wave".into())
    })?;
    let mut out = String::new();
    out.push_str("$version pllsim $end\n");
    out.push_str("$timescale 1fs $end\n");
    out.push_str("$scope module pll $end\n");
    out.push_str("$var wire 1 ! ref_clk $end\n");
    out.push_str("$var wire 1 @ out_clk $end\n");
    out.push_str("$upscope $end\n");
    out.push_str("$enddefinitions $end\n");

    let bit = |v: f64| u8::from(v >= 0.0);
    let mut last_ref = None;
    let mut last_out = None;
    for i in 0..trace.t_s.len() {
        let r = bit(waves.reference[i]);
        let o = bit(waves.output[i]);
        let changed = last_ref != Some(r) || last_out != Some(o);
        if changed {
            let t_fs = (trace.t_s[i] * 1e15).round() as u64;
            out.push_str(&format!("#{t_fs}\n"));
            if last_ref != Some(r) {
                out.push_str(&format!("{r}!\n"));
            }
            if last_out != Some(o) {
                out.push_str(&format!("{o}@\n"));
            }
            last_ref = Some(r);
            last_out = Some(o);
        }
    }
    Ok(out)
}
