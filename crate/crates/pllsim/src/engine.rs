//! Closed-loop time-domain simulation with jitter injection, lock detection
//! and steady-state metrics.
//!
//! Each fixed step computes the reference phase (plus any injected input
//! jitter), the divided VCO phase, the PD voltage, the filtered control
//! voltage, and then advances the VCO (plus any injected VCO phase jitter).
//! The divided VCO phase drives the subtracting PD input so the loop is
//! negative feedback; with a positive tuning gain this is the only polarity
//! that settles.
//!
//! Phases are unbounded accumulators in double precision; there is no phase
//! wrapping anywhere. A guard trips once the accumulator passes 1e15 rad,
//! where f64 spacing would start to erode the step resolution.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::blocks::{divide_phase, filter_tf, pd_output, vco_advance, FilterStepper};
use crate::error::{Error, Result};
use crate::jitter::gen_jitter;
use crate::types::{
    CarrierWaves, InjectionPoint, JitterSpec, LoopParams, RlcFilter, SimConfig, SimMode, SimTrace,
};

/// Phase accumulator bound; beyond this the 1e-10-second step resolution is
/// no longer representable.
const PHASE_OVERFLOW_RAD: f64 = 1e15;

/// Check the cancellation flag every this many steps.
const CANCEL_CHECK_STRIDE: usize = 4096;

/// Static phase error the loop settles to when absorbing the frequency
/// offset between the lock target and the VCO free-running point:
/// `(2*pi*n_div*f_in - 2*pi*f_free) / (k_pd * k_vco)` radians.
pub fn steady_state_phase_error(params: &LoopParams) -> f64 {
    TAU * (params.f_target() - params.f_free()) / (params.k_pd() * params.k_vco())
}

/// Streaming lock detector: lock is declared at the earliest time the
/// relative frequency error has stayed within tolerance for one full window.
#[derive(Debug, Clone)]
pub struct LockDetector {
    f_target: f64,
    tol: f64,
    window: f64,
    window_start: Option<f64>,
    lock_time: Option<f64>,
    last_in_tol: bool,
}

impl LockDetector {
    pub fn new(params: &LoopParams, cfg: &SimConfig) -> Self {
        Self {
            f_target: params.f_target(),
            tol: cfg.lock_freq_tol(),
            window: cfg.lock_window(),
            window_start: None,
            lock_time: None,
            last_in_tol: false,
        }
    }

    /// Feed one frequency observation: `freq_hz` realized over the step
    /// `[t_start, t_end]`. Observations must arrive in time order.
    pub fn observe(&mut self, t_start: f64, t_end: f64, freq_hz: f64) {
        if self.lock_time.is_some() {
            return;
        }
        let rel = (freq_hz - self.f_target).abs() / self.f_target;
        if rel <= self.tol {
            let start = *self.window_start.get_or_insert(t_start);
            if t_end - start >= self.window {
                self.lock_time = Some(start + self.window);
            }
        } else {
            self.window_start = None;
        }
        self.last_in_tol = rel <= self.tol;
    }

    /// Earliest lock time seen so far, if any.
    pub fn lock_time_s(&self) -> Option<f64> {
        self.lock_time
    }

    /// Whether the most recent observation was within tolerance.
    pub fn in_tolerance(&self) -> bool {
        self.last_in_tol
    }
}

/// Run the closed-loop simulation. Deterministic: identical inputs
/// (including jitter seeds) give a bitwise-identical trace.
pub fn simulate(
    params: &LoopParams,
    filter: &RlcFilter,
    cfg: &SimConfig,
    jitters: &[JitterSpec],
) -> Result<SimTrace> {
    let cancel = AtomicBool::new(false);
    simulate_cancellable(params, filter, cfg, jitters, &cancel)
}

/// [`simulate`] with a cooperative cancellation flag, checked between steps.
pub fn simulate_cancellable(
    params: &LoopParams,
    filter: &RlcFilter,
    cfg: &SimConfig,
    jitters: &[JitterSpec],
    cancel: &AtomicBool,
) -> Result<SimTrace> {
    let mut input_jitter = None;
    let mut vco_jitter = None;
    for spec in jitters {
        let slot = match spec.injection() {
            InjectionPoint::PdInput => &mut input_jitter,
            InjectionPoint::Vco => &mut vco_jitter,
        };
        if slot.replace(*spec).is_some() {
            return Err(Error::Config(
                "at most one jitter spec per injection point".into(),
            ));
        }
    }

    let full_wave = cfg.mode() == SimMode::FullWave;
    if full_wave {
        let dt_max = 1.0 / (20.0 * params.f_target());
        if cfg.dt() > dt_max {
            return Err(Error::Config(format!(
                "full-wave mode needs >= 20 samples per output period: dt = {:e} s exceeds {:e} s",
                cfg.dt(),
                dt_max
            )));
        }
    }

    let dt = cfg.dt();
    let n_steps = (cfg.duration() / dt).round() as usize;
    let dec = cfg.decimation() as usize;
    let t_grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();

    let phi_in = match &input_jitter {
        Some(spec) => Some(gen_jitter(spec, &t_grid)?),
        None => None,
    };
    let phi_vco = match &vco_jitter {
        Some(spec) => Some(gen_jitter(spec, &t_grid)?),
        None => None,
    };

    let mut stepper = FilterStepper::new(&filter_tf(filter), dt)?;
    let mut detector = LockDetector::new(params, cfg);

    let n_rec = n_steps / dec + 1;
    let mut t_s = Vec::with_capacity(n_rec);
    let mut v_pd_v = Vec::with_capacity(n_rec);
    let mut v_cont_v = Vec::with_capacity(n_rec);
    let mut phase_out_rad = Vec::with_capacity(n_rec);
    let mut carrier = full_wave.then(|| CarrierWaves {
        reference: Vec::with_capacity(n_rec),
        output: Vec::with_capacity(n_rec),
    });

    let k_pd = params.k_pd();
    let k_vco = params.k_vco();
    let n_div = params.n_div();
    let f_in = params.f_in();
    let f_free = params.f_free();

    let mut phase_vco = 0.0f64;
    let mut first_v_cont = 0.0;
    let mut last_v_pd = 0.0;

    for k in 0..=n_steps {
        if k % CANCEL_CHECK_STRIDE == 0 && cancel.load(Ordering::Relaxed) {
            return Err(Error::Cancelled);
        }
        let t = t_grid[k];
        let phi_ref = TAU * f_in * t + phi_in.as_ref().map_or(0.0, |j| j[k]);
        let phi_fb = divide_phase(phase_vco, n_div);
        // feedback enters the subtracting input (negative feedback)
        let v_pd = pd_output(k_pd, phi_fb, phi_ref)?;
        let v_cont = stepper.step(v_pd);
        if k == 0 {
            first_v_cont = v_cont;
        }
        last_v_pd = v_pd;

        if !v_cont.is_finite() {
            return Err(Error::Diverged(format!(
                "control voltage became non-finite at t = {t:e} s"
            )));
        }
        if phase_vco.abs() > PHASE_OVERFLOW_RAD {
            return Err(Error::Diverged(format!(
                "phase accumulator exceeded {PHASE_OVERFLOW_RAD:e} rad at t = {t:e} s"
            )));
        }

        if k % dec == 0 {
            t_s.push(t);
            v_pd_v.push(v_pd);
            v_cont_v.push(v_cont);
            phase_out_rad.push(phase_vco);
            if let Some(waves) = carrier.as_mut() {
                waves.reference.push(phi_ref.sin());
                waves.output.push(phase_vco.sin());
            }
        }

        if k < n_steps {
            let mut next = vco_advance(phase_vco, f_free, k_vco, v_cont, dt)?;
            if let Some(j) = &phi_vco {
                next += j[k + 1] - j[k];
            }
            detector.observe(t, t_grid[k + 1], (next - phase_vco) / (TAU * dt));
            phase_vco = next;
        }
    }

    let mut freq_out_hz = Vec::with_capacity(t_s.len());
    // index 0: instantaneous model frequency at t = 0
    freq_out_hz.push(f_free + k_vco * first_v_cont / TAU);
    for j in 1..t_s.len() {
        freq_out_hz.push((phase_out_rad[j] - phase_out_rad[j - 1]) / (TAU * (t_s[j] - t_s[j - 1])));
    }

    let lock_time_s = detector.lock_time_s();
    let final_phase_err_rad = lock_time_s.map(|_| last_v_pd / k_pd);

    Ok(SimTrace {
        t_s,
        v_pd_v,
        v_cont_v,
        phase_out_rad,
        freq_out_hz,
        lock_time_s,
        final_phase_err_rad,
        carrier,
    })
}
