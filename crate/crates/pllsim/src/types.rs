//! Value types shared by every stage: loop constants, filter components,
//! rational transfer functions, jitter descriptions and simulation output.
//!
//! All types validate on construction and are immutable afterwards, so they
//! can be copied freely between threads. Frequencies are stored in hertz and
//! converted to angular form (rad/s) at the point of use.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};

/// Loop constants of the integer-N feedback topology.
///
/// `f_free` is the VCO free-running frequency (the frequency at zero control
/// voltage); the nominal lock target is `n_div * f_in`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopParams {
    k_pd: f64,
    k_vco: f64,
    n_div: u32,
    f_in: f64,
    f_free: f64,
}

impl LoopParams {
    /// New parameter set. `k_pd` in V/rad, `k_vco` in rad/s/V, `f_in` and
    /// `f_free` in Hz.
    pub fn new(k_pd: f64, k_vco: f64, n_div: u32, f_in: f64, f_free: f64) -> Result<Self> {
        ensure_finite("k_pd", k_pd)?;
        ensure_finite("k_vco", k_vco)?;
        ensure_finite("f_in", f_in)?;
        ensure_finite("f_free", f_free)?;
        if k_pd <= 0.0 {
            return Err(Error::InvalidInput(format!("k_pd must be > 0, got {k_pd}")));
        }
        if k_vco <= 0.0 {
            return Err(Error::InvalidInput(format!("k_vco must be > 0, got {k_vco}")));
        }
        if n_div < 1 {
            return Err(Error::InvalidInput("n_div must be >= 1".into()));
        }
        if f_in <= 0.0 {
            return Err(Error::InvalidInput(format!("f_in must be > 0, got {f_in}")));
        }
        if f_free <= 0.0 {
            return Err(Error::InvalidInput(format!("f_free must be > 0, got {f_free}")));
        }
        let omega_target = TAU * n_div as f64 * f_in;
        if !omega_target.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lock target n_div * f_in = {} Hz overflows as an angular frequency",
                n_div as f64 * f_in
            )));
        }
        Ok(Self { k_pd, k_vco, n_div, f_in, f_free })
    }

    /// Parameter set with the VCO centered on the lock target
    /// (`f_free = n_div * f_in`), making zero static phase error the nominal case.
    pub fn centered(k_pd: f64, k_vco: f64, n_div: u32, f_in: f64) -> Result<Self> {
        Self::new(k_pd, k_vco, n_div, f_in, n_div as f64 * f_in)
    }

    /// Phase-detector gain, V/rad.
    pub fn k_pd(&self) -> f64 {
        self.k_pd
    }

    /// VCO tuning gain, rad/s per volt.
    pub fn k_vco(&self) -> f64 {
        self.k_vco
    }

    /// Feedback divider ratio.
    pub fn n_div(&self) -> u32 {
        self.n_div
    }

    /// Reference input frequency, Hz.
    pub fn f_in(&self) -> f64 {
        self.f_in
    }

    /// VCO free-running frequency, Hz.
    pub fn f_free(&self) -> f64 {
        self.f_free
    }

    /// Nominal lock target `n_div * f_in`, Hz.
    pub fn f_target(&self) -> f64 {
        self.n_div as f64 * self.f_in
    }
}

/// Series-RLC low-pass loop filter component values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlcFilter {
    r: f64,
    l: f64,
    c: f64,
}

impl RlcFilter {
    /// New filter from resistance (ohms), inductance (henries) and
    /// capacitance (farads).
    pub fn new(r: f64, l: f64, c: f64) -> Result<Self> {
        ensure_finite("r", r)?;
        ensure_finite("l", l)?;
        ensure_finite("c", c)?;
        if r < 0.0 {
            return Err(Error::InvalidInput(format!("r must be >= 0, got {r}")));
        }
        if l <= 0.0 {
            return Err(Error::InvalidInput(format!("l must be > 0, got {l}")));
        }
        if c <= 0.0 {
            return Err(Error::InvalidInput(format!("c must be > 0, got {c}")));
        }
        let filter = Self { r, l, c };
        if !filter.a1().is_finite() || !filter.a2().is_finite() || filter.a1() <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "derived coefficients 1/(L*C) = {} and R/L = {} must be finite and positive",
                filter.a1(),
                filter.a2()
            )));
        }
        Ok(filter)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Denominator constant term `1/(L*C)`, rad^2/s^2.
    pub fn a1(&self) -> f64 {
        1.0 / (self.l * self.c)
    }

    /// Denominator linear term `R/L`, rad/s.
    pub fn a2(&self) -> f64 {
        self.r / self.l
    }
}

/// Tolerance on the cancellation ratio |den(s)| / sum(|d_k| |s|^k) below which
/// an evaluation counts as "at a pole". Chosen so a point within ~1e-6
/// relative distance of a pole trips the error.
const POLE_CANCEL_TOL: f64 = 1e-6;

/// Rational transfer function in `s`, stored as real polynomial coefficients
/// in ascending powers. Only proper systems (deg num <= deg den) are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTf {
    /// New transfer function from ascending-order coefficient lists.
    /// Trailing (highest-order) zero coefficients are trimmed.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        for (name, coeffs) in [("num", &num), ("den", &den)] {
            for (i, c) in coeffs.iter().enumerate() {
                if !c.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "{name}[{i}] must be finite, got {c}"
                    )));
                }
            }
        }
        let num = trim_poly(num);
        let den = trim_poly(den);
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidInput(
                "denominator must have at least one nonzero coefficient".into(),
            ));
        }
        if num.len() > den.len() && num.iter().skip(den.len()).any(|&c| c != 0.0) {
            return Err(Error::InvalidInput(format!(
                "improper system: deg(num) = {} > deg(den) = {}",
                num.len() - 1,
                den.len() - 1
            )));
        }
        Ok(Self { num, den })
    }

    /// Numerator coefficients, ascending powers of s.
    pub fn num(&self) -> &[f64] {
        &self.num
    }

    /// Denominator coefficients, ascending powers of s.
    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// Degree of the denominator polynomial.
    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// Evaluate at a complex frequency `s` (rad/s).
    ///
    /// Fails with [`Error::PoleEvaluation`] when the denominator cancels so
    /// strongly that `s` is effectively on a pole.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let den = horner(&self.den, s);
        // Cancellation guard: compare against the no-cancellation magnitude.
        let mut scale = 0.0;
        let mut pow = 1.0;
        let smag = s.norm();
        for &c in &self.den {
            scale += c.abs() * pow;
            pow *= smag;
        }
        if den.norm() <= POLE_CANCEL_TOL * scale {
            return Err(Error::PoleEvaluation { s });
        }
        Ok(horner(&self.num, s) / den)
    }
}

fn trim_poly(mut coeffs: Vec<f64>) -> Vec<f64> {
    while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
        coeffs.pop();
    }
    if coeffs.is_empty() {
        coeffs.push(0.0);
    }
    coeffs
}

fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * s + c;
    }
    acc
}

/// The two roots of a second-order denominator, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolePair {
    pub s1: Complex64,
    pub s2: Complex64,
}

/// Where a jitter sequence enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionPoint {
    /// Added to the reference excess phase seen by the phase detector.
    PdInput,
    /// Added to the VCO output phase.
    Vco,
}

/// Jitter waveform family. Slow frequency wander is modelled by the random
/// walk, per-period scatter by white phase noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JitterKind {
    /// `amplitude * sin(2*pi*freq*t)`.
    Sinusoidal { freq_hz: f64 },
    /// Cumulative sum of i.i.d. Gaussian steps (std = amplitude per step).
    RandomWalk { seed: u64 },
    /// I.i.d. zero-mean Gaussian samples (std = amplitude).
    WhitePhase { seed: u64 },
}

/// A jitter sequence description: what it looks like and where it enters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterSpec {
    injection: InjectionPoint,
    kind: JitterKind,
    amplitude_rad: f64,
}

impl JitterSpec {
    pub fn sinusoidal(injection: InjectionPoint, amplitude_rad: f64, freq_hz: f64) -> Result<Self> {
        ensure_finite("amplitude_rad", amplitude_rad)?;
        ensure_finite("freq_hz", freq_hz)?;
        if amplitude_rad < 0.0 {
            return Err(Error::InvalidInput(format!(
                "jitter amplitude must be >= 0, got {amplitude_rad}"
            )));
        }
        if freq_hz <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sinusoidal jitter freq must be > 0, got {freq_hz}"
            )));
        }
        Ok(Self { injection, kind: JitterKind::Sinusoidal { freq_hz }, amplitude_rad })
    }

    pub fn random_walk(injection: InjectionPoint, amplitude_rad: f64, seed: u64) -> Result<Self> {
        Self::random(injection, JitterKind::RandomWalk { seed }, amplitude_rad)
    }

    pub fn white_phase(injection: InjectionPoint, amplitude_rad: f64, seed: u64) -> Result<Self> {
        Self::random(injection, JitterKind::WhitePhase { seed }, amplitude_rad)
    }

    fn random(injection: InjectionPoint, kind: JitterKind, amplitude_rad: f64) -> Result<Self> {
        ensure_finite("amplitude_rad", amplitude_rad)?;
        if amplitude_rad < 0.0 {
            return Err(Error::InvalidInput(format!(
                "jitter amplitude must be >= 0, got {amplitude_rad}"
            )));
        }
        Ok(Self { injection, kind, amplitude_rad })
    }

    pub fn injection(&self) -> InjectionPoint {
        self.injection
    }

    pub fn kind(&self) -> JitterKind {
        self.kind
    }

    /// Peak amplitude for sinusoidal jitter, per-step standard deviation for
    /// the random kinds. Radians.
    pub fn amplitude_rad(&self) -> f64 {
        self.amplitude_rad
    }
}

/// Time-domain solver mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// Simulate on phase variables directly; carriers are eliminated so large
    /// time steps are valid.
    PhaseDomain,
    /// Same loop dynamics, plus sampled `sin(phase)` carrier waveforms for
    /// export. Requires >= 20 samples per output-carrier period.
    FullWave,
}

/// Fixed-step solver configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    mode: SimMode,
    dt: f64,
    duration: f64,
    lock_freq_tol: f64,
    lock_window: f64,
    decimation: u32,
}

impl SimConfig {
    pub fn new(
        mode: SimMode,
        dt: f64,
        duration: f64,
        lock_freq_tol: f64,
        lock_window: f64,
        decimation: u32,
    ) -> Result<Self> {
        ensure_finite("dt", dt)?;
        ensure_finite("duration", duration)?;
        ensure_finite("lock_freq_tol", lock_freq_tol)?;
        ensure_finite("lock_window", lock_window)?;
        if dt <= 0.0 {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if duration <= dt {
            return Err(Error::InvalidInput(format!(
                "duration must exceed dt, got duration = {duration}, dt = {dt}"
            )));
        }
        if !(lock_freq_tol > 0.0 && lock_freq_tol < 1.0) {
            return Err(Error::InvalidInput(format!(
                "lock_freq_tol must lie in (0, 1), got {lock_freq_tol}"
            )));
        }
        if lock_window <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "lock_window must be > 0, got {lock_window}"
            )));
        }
        if decimation < 1 {
            return Err(Error::InvalidInput("decimation must be >= 1".into()));
        }
        Ok(Self { mode, dt, duration, lock_freq_tol, lock_window, decimation })
    }

    pub fn mode(&self) -> SimMode {
        self.mode
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn lock_freq_tol(&self) -> f64 {
        self.lock_freq_tol
    }

    pub fn lock_window(&self) -> f64 {
        self.lock_window
    }

    pub fn decimation(&self) -> u32 {
        self.decimation
    }
}

/// Sampled carrier waveforms recorded in full-wave mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierWaves {
    /// `sin` of the reference phase (input carrier).
    pub reference: Vec<f64>,
    /// `sin` of the VCO output phase (output carrier).
    pub output: Vec<f64>,
}

/// Decimated time series of the loop state plus lock metrics.
///
/// All series share one length; `t_s` advances by `dt * decimation`.
/// `freq_out_hz[k]` equals the phase difference quotient
/// `(phase_out_rad[k] - phase_out_rad[k-1]) / (2*pi*(t_s[k] - t_s[k-1]))` for
/// `k >= 1`; index 0 holds the instantaneous model frequency at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub t_s: Vec<f64>,
    pub v_pd_v: Vec<f64>,
    pub v_cont_v: Vec<f64>,
    pub phase_out_rad: Vec<f64>,
    pub freq_out_hz: Vec<f64>,
    /// Earliest time the frequency stayed within tolerance for a full lock
    /// window; `None` if lock was never reached.
    pub lock_time_s: Option<f64>,
    /// Loop phase error at the end of the run; present only when locked.
    pub final_phase_err_rad: Option<f64>,
    /// Carrier samples, full-wave mode only.
    pub carrier: Option<CarrierWaves>,
}
