//! Flat key=value configuration format.
//!
//! One key per line, `#` starts a comment, numbers accept scientific
//! notation. Unknown and duplicate keys are errors; a typo never silently
//! falls back to a default. Every key has a documented default, so the
//! empty file is a valid configuration (the stock 50 MHz -> 5 GHz loop).
//!
//! Jitter sources are numbered blocks:
//!
//! ```text
//! jitter.0.injection=pd_input      # pd_input | vco
//! jitter.0.kind=sinusoidal         # sinusoidal | random_walk | white_phase
//! jitter.0.amplitude_rad=0.05
//! jitter.0.freq_hz=1e6             # sinusoidal only
//! jitter.0.seed=42                 # random kinds only
//! ```

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use pllsim::{
    InjectionPoint, JitterKind, JitterSpec, LoopParams, RlcFilter, SimConfig, SimMode,
};

use crate::CliError;

pub const DEFAULT_F_IN_HZ: f64 = 5e7;
pub const DEFAULT_N_DIV: u32 = 100;
pub const DEFAULT_K_PD: f64 = 1.0;
pub const DEFAULT_K_VCO: f64 = TAU * 1e8;
pub const DEFAULT_R_OHM: f64 = 50.0;
pub const DEFAULT_L_H: f64 = 1e-6;
pub const DEFAULT_C_F: f64 = 1e-12;
pub const DEFAULT_DT_S: f64 = 1e-10;
pub const DEFAULT_DURATION_S: f64 = 2e-4;
pub const DEFAULT_LOCK_FREQ_TOL: f64 = 1e-4;
pub const DEFAULT_LOCK_WINDOW_S: f64 = 2e-6;
pub const DEFAULT_DECIMATION: u32 = 100;
pub const DEFAULT_JITTER_AMPLITUDE_RAD: f64 = 0.05;
pub const DEFAULT_JITTER_FREQ_HZ: f64 = 1e6;
pub const DEFAULT_JITTER_SEED: u64 = 42;

const SCALAR_KEYS: &[&str] = &[
    "f_in_hz",
    "f_free_hz",
    "n_div",
    "k_pd_v_per_rad",
    "k_vco_rad_per_s_per_v",
    "r_ohm",
    "l_h",
    "c_f",
    "mode",
    "dt_s",
    "duration_s",
    "lock_freq_tol",
    "lock_window_s",
    "decimation",
];

const JITTER_FIELDS: &[&str] = &["injection", "kind", "amplitude_rad", "freq_hz", "seed"];

/// Keys a sweep may vary.
pub const SWEEPABLE_KEYS: &[&str] = &[
    "f_in_hz",
    "f_free_hz",
    "n_div",
    "k_pd_v_per_rad",
    "k_vco_rad_per_s_per_v",
    "r_ohm",
    "l_h",
    "c_f",
    "dt_s",
    "duration_s",
    "lock_freq_tol",
    "lock_window_s",
    "decimation",
];

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub params: LoopParams,
    pub filter: RlcFilter,
    pub sim: SimConfig,
    pub jitters: Vec<JitterSpec>,
}

#[derive(Debug, Default, Clone)]
struct RawConfig {
    scalars: BTreeMap<String, (String, usize)>,
    jitters: BTreeMap<u32, BTreeMap<String, (String, usize)>>,
}

pub fn parse_config(text: &str) -> Result<Resolved, CliError> {
    resolve(parse_raw(text)?)
}

/// Parse, then force `key=value` replacements before validation (used by
/// sweeps; an override may either replace or introduce its key).
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, f64)],
) -> Result<Resolved, CliError> {
    let mut raw = parse_raw(text)?;
    for (key, value) in overrides {
        if !SWEEPABLE_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("key `{key}` is not sweepable")));
        }
        raw.scalars.insert(key.clone(), (format!("{value:e}"), 0));
    }
    resolve(raw)
}

fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::default();
    for (idx, full_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = full_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {lineno}: expected key=value, got `{line}`"
            )));
        };
        let key = key.trim();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(CliError::Config(format!("line {lineno}: key `{key}` has no value")));
        }
        if let Some(rest) = key.strip_prefix("jitter.") {
            let Some((index, field)) = rest.split_once('.') else {
                return Err(CliError::Config(format!(
                    "line {lineno}: jitter keys look like jitter.<n>.<field>, got `{key}`"
                )));
            };
            let index: u32 = index.parse().map_err(|_| {
                CliError::Config(format!("line {lineno}: bad jitter block index in `{key}`"))
            })?;
            if !JITTER_FIELDS.contains(&field) {
                return Err(CliError::Config(format!(
                    "line {lineno}: unknown key `{key}` (jitter fields: {})",
                    JITTER_FIELDS.join(", ")
                )));
            }
            let block = raw.jitters.entry(index).or_default();
            if block.insert(field.to_string(), (value, lineno)).is_some() {
                return Err(CliError::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
        } else {
            if !SCALAR_KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {lineno}: unknown key `{key}`")));
            }
            if raw.scalars.insert(key.to_string(), (value, lineno)).is_some() {
                return Err(CliError::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
        }
    }
    Ok(raw)
}

fn resolve(raw: RawConfig) -> Result<Resolved, CliError> {
    let mut raw = raw;
    let f_in = take_f64(&mut raw, "f_in_hz")?.unwrap_or(DEFAULT_F_IN_HZ);
    let n_div = take_u32(&mut raw, "n_div")?.unwrap_or(DEFAULT_N_DIV);
    let f_free = take_f64(&mut raw, "f_free_hz")?.unwrap_or(n_div as f64 * f_in);
    let k_pd = take_f64(&mut raw, "k_pd_v_per_rad")?.unwrap_or(DEFAULT_K_PD);
    let k_vco = take_f64(&mut raw, "k_vco_rad_per_s_per_v")?.unwrap_or(DEFAULT_K_VCO);
    let r = take_f64(&mut raw, "r_ohm")?.unwrap_or(DEFAULT_R_OHM);
    let l = take_f64(&mut raw, "l_h")?.unwrap_or(DEFAULT_L_H);
    let c = take_f64(&mut raw, "c_f")?.unwrap_or(DEFAULT_C_F);
    let mode = match raw.scalars.remove("mode") {
        None => SimMode::PhaseDomain,
        Some((v, lineno)) => match v.as_str() {
            "phase_domain" => SimMode::PhaseDomain,
            "full_wave" => SimMode::FullWave,
            other => {
                return Err(CliError::Config(format!(
                    "line {lineno}: key `mode`: expected phase_domain or full_wave, got `{other}`"
                )))
            }
        },
    };
    let dt = take_f64(&mut raw, "dt_s")?.unwrap_or(DEFAULT_DT_S);
    let duration = take_f64(&mut raw, "duration_s")?.unwrap_or(DEFAULT_DURATION_S);
    let lock_freq_tol = take_f64(&mut raw, "lock_freq_tol")?.unwrap_or(DEFAULT_LOCK_FREQ_TOL);
    let lock_window = take_f64(&mut raw, "lock_window_s")?.unwrap_or(DEFAULT_LOCK_WINDOW_S);
    let decimation = take_u32(&mut raw, "decimation")?.unwrap_or(DEFAULT_DECIMATION);

    let params = LoopParams::new(k_pd, k_vco, n_div, f_in, f_free)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let filter = RlcFilter::new(r, l, c).map_err(|e| CliError::Config(e.to_string()))?;
    let sim = SimConfig::new(mode, dt, duration, lock_freq_tol, lock_window, decimation)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let mut jitters = Vec::new();
    for (index, mut block) in raw.jitters {
        let (injection, inj_line) = block.remove("injection").ok_or_else(|| {
            CliError::Config(format!("jitter block {index} needs jitter.{index}.injection"))
        })?;
        let injection = match injection.as_str() {
            "pd_input" => InjectionPoint::PdInput,
            "vco" => InjectionPoint::Vco,
            other => {
                return Err(CliError::Config(format!(
                    "line {inj_line}: jitter.{index}.injection: expected pd_input or vco, got `{other}`"
                )))
            }
        };
        let (kind, kind_line) = block.remove("kind").ok_or_else(|| {
            CliError::Config(format!("jitter block {index} needs jitter.{index}.kind"))
        })?;
        let amplitude = match block.remove("amplitude_rad") {
            Some((v, lineno)) => parse_f64(&v, &format!("jitter.{index}.amplitude_rad"), lineno)?,
            None => DEFAULT_JITTER_AMPLITUDE_RAD,
        };
        let freq = block.remove("freq_hz");
        let seed = block.remove("seed");
        let spec = match kind.as_str() {
            "sinusoidal" => {
                if let Some((_, lineno)) = seed {
                    return Err(CliError::Config(format!(
                        "line {lineno}: jitter.{index}.seed does not apply to sinusoidal jitter"
                    )));
                }
                let freq_hz = match freq {
                    Some((v, lineno)) => parse_f64(&v, &format!("jitter.{index}.freq_hz"), lineno)?,
                    None => DEFAULT_JITTER_FREQ_HZ,
                };
                JitterSpec::sinusoidal(injection, amplitude, freq_hz)
            }
            "random_walk" | "white_phase" => {
                if let Some((_, lineno)) = freq {
                    return Err(CliError::Config(format!(
                        "line {lineno}: jitter.{index}.freq_hz applies to sinusoidal jitter only"
                    )));
                }
                let seed = match seed {
                    Some((v, lineno)) => parse_u64(&v, &format!("jitter.{index}.seed"), lineno)?,
                    None => DEFAULT_JITTER_SEED,
                };
                if kind == "random_walk" {
                    JitterSpec::random_walk(injection, amplitude, seed)
                } else {
                    JitterSpec::white_phase(injection, amplitude, seed)
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "line {kind_line}: jitter.{index}.kind: expected sinusoidal, random_walk or white_phase, got `{other}`"
                )))
            }
        }
        .map_err(|e| CliError::Config(format!("jitter block {index}: {e}")))?;
        jitters.push(spec);
    }

    Ok(Resolved { params, filter, sim, jitters })
}

fn take_f64(raw: &mut RawConfig, key: &str) -> Result<Option<f64>, CliError> {
    match raw.scalars.remove(key) {
        None => Ok(None),
        Some((v, lineno)) => parse_f64(&v, key, lineno).map(Some),
    }
}

fn take_u32(raw: &mut RawConfig, key: &str) -> Result<Option<u32>, CliError> {
    match raw.scalars.remove(key) {
        None => Ok(None),
        Some((v, lineno)) => {
            let x = parse_f64(&v, key, lineno)?;
            if x.fract() != 0.0 || x < 0.0 || x > u32::MAX as f64 {
                return Err(CliError::Config(format!(
                    "line {lineno}: key `{key}`: expected a non-negative integer, got `{v}`"
                )));
            }
            Ok(Some(x as u32))
        }
    }
}

fn parse_f64(v: &str, key: &str, lineno: usize) -> Result<f64, CliError> {
    v.parse::<f64>().map_err(|_| {
        CliError::Config(format!("line {lineno}: key `{key}`: unparseable number `{v}`"))
    })
}

fn parse_u64(v: &str, key: &str, lineno: usize) -> Result<u64, CliError> {
    if let Ok(x) = v.parse::<u64>() {
        return Ok(x);
    }
    // scientific notation for seeds is accepted while it stays integral
    let x = parse_f64(v, key, lineno)?;
    if x.fract() != 0.0 || x < 0.0 || x >= 2f64.powi(53) {
        return Err(CliError::Config(format!(
            "line {lineno}: key `{key}`: expected a non-negative integer, got `{v}`"
        )));
    }
    Ok(x as u64)
}

/// Canonical re-parseable echo of a resolved configuration. Every report
/// starts with this block.
pub fn echo(resolved: &Resolved) -> String {
    let p = &resolved.params;
    let f = &resolved.filter;
    let s = &resolved.sim;
    let mut out = String::new();
    out.push_str(&format!(
        "# resolved configuration (re-parseable); lock target f_out = {:.16e} Hz\n",
        p.f_target()
    ));
    out.push_str(&format!("f_in_hz={:.16e}\n", p.f_in()));
    out.push_str(&format!("f_free_hz={:.16e}\n", p.f_free()));
    out.push_str(&format!("n_div={}\n", p.n_div()));
    out.push_str(&format!("k_pd_v_per_rad={:.16e}\n", p.k_pd()));
    out.push_str(&format!("k_vco_rad_per_s_per_v={:.16e}\n", p.k_vco()));
    out.push_str(&format!("r_ohm={:.16e}\n", f.r()));
    out.push_str(&format!("l_h={:.16e}\n", f.l()));
    out.push_str(&format!("c_f={:.16e}\n", f.c()));
    out.push_str(&format!(
        "mode={}\n",
        match s.mode() {
            SimMode::PhaseDomain => "phase_domain",
            SimMode::FullWave => "full_wave",
        }
    ));
    out.push_str(&format!("dt_s={:.16e}\n", s.dt()));
    out.push_str(&format!("duration_s={:.16e}\n", s.duration()));
    out.push_str(&format!("lock_freq_tol={:.16e}\n", s.lock_freq_tol()));
    out.push_str(&format!("lock_window_s={:.16e}\n", s.lock_window()));
    out.push_str(&format!("decimation={}\n", s.decimation()));
    for (i, j) in resolved.jitters.iter().enumerate() {
        let injection = match j.injection() {
            InjectionPoint::PdInput => "pd_input",
            InjectionPoint::Vco => "vco",
        };
        out.push_str(&format!("jitter.{i}.injection={injection}\n"));
        match j.kind() {
            JitterKind::Sinusoidal { freq_hz } => {
                out.push_str(&format!("jitter.{i}.kind=sinusoidal\n"));
                out.push_str(&format!("jitter.{i}.amplitude_rad={:.16e}\n", j.amplitude_rad()));
                out.push_str(&format!("jitter.{i}.freq_hz={freq_hz:.16e}\n"));
            }
            JitterKind::RandomWalk { seed } => {
                out.push_str(&format!("jitter.{i}.kind=random_walk\n"));
                out.push_str(&format!("jitter.{i}.amplitude_rad={:.16e}\n", j.amplitude_rad()));
                out.push_str(&format!("jitter.{i}.seed={seed}\n"));
            }
            JitterKind::WhitePhase { seed } => {
                out.push_str(&format!("jitter.{i}.kind=white_phase\n"));
                out.push_str(&format!("jitter.{i}.amplitude_rad={:.16e}\n", j.amplitude_rad()));
                out.push_str(&format!("jitter.{i}.seed={seed}\n"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_documented_defaults() {
        let r = parse_config("").unwrap();
        assert_eq!(r.params.f_in(), DEFAULT_F_IN_HZ);
        assert_eq!(r.params.n_div(), DEFAULT_N_DIV);
        assert_eq!(r.params.f_free(), 5e9);
        assert_eq!(r.filter.r(), DEFAULT_R_OHM);
        assert_eq!(r.sim.dt(), DEFAULT_DT_S);
        assert!(r.jitters.is_empty());
    }

    #[test]
    fn minimal_config_applies_defaults_elsewhere() {
        let r = parse_config("f_in_hz=5e7\nn_div=100\n").unwrap();
        assert_eq!(r.params.f_target(), 5e9);
        assert_eq!(r.sim.decimation(), DEFAULT_DECIMATION);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected_with_location() {
        let err = parse_config("n_divv=3\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 1") && msg.contains("n_divv"), "{msg}");

        let err = parse_config("n_div=3\nn_div=4\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 2") && msg.contains("duplicate"), "{msg}");
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let err = parse_config("n_div=0\n").unwrap_err();
        assert!(format!("{err}").contains("n_div"));
        let err = parse_config("l_h=-1e-6\n").unwrap_err();
        assert!(format!("{err}").to_lowercase().contains("l must be"));
    }

    #[test]
    fn scientific_notation_accepted_for_integers() {
        let r = parse_config("n_div=1e2\ndecimation=1e1\n").unwrap();
        assert_eq!(r.params.n_div(), 100);
        assert_eq!(r.sim.decimation(), 10);
        assert!(parse_config("n_div=1.5\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# heading\n\nf_in_hz=1e8  # trailing comment\n";
        let r = parse_config(text).unwrap();
        assert_eq!(r.params.f_in(), 1e8);
    }

    #[test]
    fn jitter_blocks_resolve_and_validate() {
        let text = "jitter.0.injection=pd_input\njitter.0.kind=sinusoidal\n\
                    jitter.1.injection=vco\njitter.1.kind=white_phase\njitter.1.seed=7\n";
        let r = parse_config(text).unwrap();
        assert_eq!(r.jitters.len(), 2);
        assert_eq!(r.jitters[0].amplitude_rad(), DEFAULT_JITTER_AMPLITUDE_RAD);
        assert!(matches!(r.jitters[1].kind(), JitterKind::WhitePhase { seed: 7 }));

        // freq on a random kind is a typo, not a silent no-op
        let bad = "jitter.0.injection=vco\njitter.0.kind=white_phase\njitter.0.freq_hz=1e6\n";
        assert!(parse_config(bad).is_err());
        // seed on a sinusoid likewise
        let bad = "jitter.0.injection=vco\njitter.0.kind=sinusoidal\njitter.0.seed=3\n";
        assert!(parse_config(bad).is_err());
        // missing kind
        assert!(parse_config("jitter.0.injection=vco\n").is_err());
    }

    #[test]
    fn echo_round_trips_exactly() {
        let text = "f_in_hz=2.5e7\nn_div=200\nk_pd_v_per_rad=0.5\nr_ohm=75\nmode=full_wave\n\
                    dt_s=5e-12\nduration_s=1e-6\njitter.0.injection=vco\n\
                    jitter.0.kind=random_walk\njitter.0.amplitude_rad=0.01\njitter.0.seed=99\n";
        let first = parse_config(text).unwrap();
        let echoed = echo(&first);
        let second = parse_config(&echoed).unwrap();
        assert_eq!(first, second);
        // lock target appears in the header
        assert!(echoed.contains("lock target f_out = 5.0000000000000000e9 Hz"));
    }

    #[test]
    fn overrides_replace_values_before_validation() {
        let r = parse_config_with_overrides("n_div=100\n", &[("n_div".into(), 50.0)]).unwrap();
        assert_eq!(r.params.n_div(), 50);
        assert!(parse_config_with_overrides("", &[("mode".into(), 1.0)]).is_err());
    }
}
