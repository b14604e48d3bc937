//! Models of the four loop blocks: phase detector, RLC low-pass filter,
//! VCO and feedback divider.
//!
//! Everything here is pure except [`FilterStepper`], which carries the
//! explicit delay-line state of the discretized filter. A stepper has a
//! single owner; spawn one per thread for parallel runs.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::types::{PolePair, RationalTf, RlcFilter};

/// Ideal linear phase detector: `k_pd * (phi_fb - phi_ref)` volts.
///
/// No saturation and no phase wrapping; wrap policy belongs to the loop
/// engine, which decides which input is the subtracting one.
pub fn pd_output(k_pd: f64, phi_ref: f64, phi_fb: f64) -> Result<f64> {
    ensure_finite("k_pd", k_pd)?;
    ensure_finite("phi_ref", phi_ref)?;
    ensure_finite("phi_fb", phi_fb)?;
    if k_pd <= 0.0 {
        return Err(Error::InvalidInput(format!("k_pd must be > 0, got {k_pd}")));
    }
    Ok(k_pd * (phi_fb - phi_ref))
}

/// Component impedance magnitudes at a spot frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reactances {
    /// Inductive reactance `2*pi*f*L`, ohms.
    pub x_l_ohm: f64,
    /// Capacitive reactance `1/(2*pi*f*C)`, ohms.
    pub x_c_ohm: f64,
    /// Series combination `sqrt((X_L - X_C)^2 + R^2)`, ohms.
    pub z_mag_ohm: f64,
}

/// Reactances and total impedance magnitude of the filter at frequency `f` Hz.
pub fn reactances(filter: &RlcFilter, f_hz: f64) -> Result<Reactances> {
    ensure_finite("f", f_hz)?;
    if f_hz <= 0.0 {
        return Err(Error::InvalidInput(format!("f must be > 0, got {f_hz}")));
    }
    let x_l = TAU * f_hz * filter.l();
    let x_c = 1.0 / (TAU * f_hz * filter.c());
    let z = ((x_l - x_c).powi(2) + filter.r().powi(2)).sqrt();
    Ok(Reactances { x_l_ohm: x_l, x_c_ohm: x_c, z_mag_ohm: z })
}

/// Second-order low-pass transfer function of the filter:
/// `a1 / (s^2 + a2*s + a1)` with `a1 = 1/(L*C)`, `a2 = R/L`. Unity DC gain.
pub fn filter_tf(filter: &RlcFilter) -> RationalTf {
    let a1 = filter.a1();
    let a2 = filter.a2();
    RationalTf::new(vec![a1], vec![a1, a2, 1.0]).expect("valid filter yields a valid tf")
}

/// Roots of the filter denominator via the quadratic formula, computed in
/// complex arithmetic so the underdamped case needs no special path:
/// `s1 = -(a2 + sqrt(a2^2 - 4*a1))/2`, `s2 = -(a2 - sqrt(a2^2 - 4*a1))/2`.
pub fn filter_poles(filter: &RlcFilter) -> PolePair {
    let a1 = filter.a1();
    let a2 = filter.a2();
    let sqrt_disc = Complex64::new(a2 * a2 - 4.0 * a1, 0.0).sqrt();
    let s1 = (-a2 - sqrt_disc) / 2.0;
    let s2 = (-a2 + sqrt_disc) / 2.0;
    PolePair { s1, s2 }
}

/// Stateful fixed-step realization of a proper transfer function (order <= 2)
/// under the bilinear (trapezoidal) transform.
///
/// The trapezoidal rule preserves stability of the continuous system for any
/// step size. State is two delayed inputs and two delayed outputs.
#[derive(Debug, Clone)]
pub struct FilterStepper {
    // digital coefficients, normalized: y = b0*u + b1*u1 + b2*u2 - a1*y1 - a2*y2
    b: [f64; 3],
    a: [f64; 2],
    u1: f64,
    u2: f64,
    y1: f64,
    y2: f64,
}

impl FilterStepper {
    /// Discretize `tf` at step `dt` seconds.
    pub fn new(tf: &RationalTf, dt: f64) -> Result<Self> {
        ensure_finite("dt", dt)?;
        if dt <= 0.0 {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        if tf.den_degree() > 2 {
            return Err(Error::InvalidInput(format!(
                "stepper supports order <= 2, got denominator degree {}",
                tf.den_degree()
            )));
        }
        let n = pad3(tf.num());
        let d = pad3(tf.den());
        let k = 2.0 / dt;
        // Substituting s = k*(1 - z^-1)/(1 + z^-1) and clearing (1 + z^-1)^2:
        // c0 + c1*s + c2*s^2 maps to
        //   z^0:  c0 + c1*k + c2*k^2
        //   z^-1: 2*c0 - 2*c2*k^2
        //   z^-2: c0 - c1*k + c2*k^2
        let map = |c: [f64; 3]| {
            [
                c[0] + c[1] * k + c[2] * k * k,
                2.0 * c[0] - 2.0 * c[2] * k * k,
                c[0] - c[1] * k + c[2] * k * k,
            ]
        };
        let bz = map(n);
        let az = map(d);
        if az[0] == 0.0 || !az[0].is_finite() {
            return Err(Error::InvalidInput(format!(
                "bilinear transform is singular at dt = {dt:e} for this system"
            )));
        }
        let b = [bz[0] / az[0], bz[1] / az[0], bz[2] / az[0]];
        let a = [az[1] / az[0], az[2] / az[0]];
        if b.iter().chain(a.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite digital coefficients at dt = {dt:e}"
            )));
        }
        // A stable continuous system must map strictly inside (onto, when
        // marginal) the unit circle. Violations indicate a broken input.
        if continuous_stable(&d) {
            let (z1, z2) = quadratic_roots(1.0, a[0], a[1]);
            if z1.norm() > 1.0 + 1e-9 || z2.norm() > 1.0 + 1e-9 {
                return Err(Error::Discretization { dt });
            }
        }
        Ok(Self { b, a, u1: 0.0, u2: 0.0, y1: 0.0, y2: 0.0 })
    }

    /// Advance one step with input `u`, returning the new output.
    pub fn step(&mut self, u: f64) -> f64 {
        let y = self.b[0] * u + self.b[1] * self.u1 + self.b[2] * self.u2
            - self.a[0] * self.y1
            - self.a[1] * self.y2;
        self.u2 = self.u1;
        self.u1 = u;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }

    /// Zero the delay-line state.
    pub fn reset(&mut self) {
        self.u1 = 0.0;
        self.u2 = 0.0;
        self.y1 = 0.0;
        self.y2 = 0.0;
    }
}

fn pad3(coeffs: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, &c) in coeffs.iter().take(3).enumerate() {
        out[i] = c;
    }
    out
}

/// Both roots of `c2*s^2 + c1*s + c0` have non-positive real part?
/// (degree < 2 handled by the same formulas with zero padding).
fn continuous_stable(d: &[f64; 3]) -> bool {
    if d[2] != 0.0 {
        let (r1, r2) = quadratic_roots(d[2], d[1], d[0]);
        r1.re <= 0.0 && r2.re <= 0.0
    } else if d[1] != 0.0 {
        -d[0] / d[1] <= 0.0
    } else {
        true // constant: no poles
    }
}

/// Roots of `a*x^2 + b*x + c` (a != 0) in complex arithmetic.
fn quadratic_roots(a: f64, b: f64, c: f64) -> (Complex64, Complex64) {
    let sqrt_disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
    (
        (-b - sqrt_disc.re) / (2.0 * a) + Complex64::new(0.0, -sqrt_disc.im / (2.0 * a)),
        (-b + sqrt_disc.re) / (2.0 * a) + Complex64::new(0.0, sqrt_disc.im / (2.0 * a)),
    )
}

/// Advance the VCO phase by one step: the time-domain form of the
/// `K_VCO/s` integrator with free-running term.
///
/// Returns `phase + (2*pi*f_free + k_vco*v_cont) * dt` radians.
pub fn vco_advance(phase: f64, f_free: f64, k_vco: f64, v_cont: f64, dt: f64) -> Result<f64> {
    ensure_finite("phase", phase)?;
    ensure_finite("f_free", f_free)?;
    ensure_finite("k_vco", k_vco)?;
    ensure_finite("v_cont", v_cont)?;
    ensure_finite("dt", dt)?;
    if dt <= 0.0 {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    Ok(phase + (TAU * f_free + k_vco * v_cont) * dt)
}

/// Phase-domain divider: dividing frequency by N divides accumulated phase
/// by N.
pub fn divide_phase(phase: f64, n_div: u32) -> f64 {
    debug_assert!(n_div >= 1, "n_div must be >= 1");
    phase / n_div as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn default_filter() -> RlcFilter {
        RlcFilter::new(50.0, 1e-6, 1e-12).unwrap()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn pd_locked_case_is_zero() {
        assert_eq!(pd_output(1.0, 0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn pd_direct_evaluation() {
        assert!((pd_output(0.5, 0.0, 0.2).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn pd_sign_and_linearity() {
        assert!((pd_output(2.0, PI / 4.0, 0.0).unwrap() - (-PI / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn pd_rejects_non_finite() {
        assert!(pd_output(1.0, f64::NAN, 0.0).is_err());
        assert!(pd_output(1.0, 0.0, f64::INFINITY).is_err());
        assert!(pd_output(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reactances_at_resonance_leave_only_r() {
        let f = default_filter();
        let f_res = 1.0 / (TAU * (f.l() * f.c()).sqrt());
        let r = reactances(&f, f_res).unwrap();
        assert!((r.x_l_ohm - r.x_c_ohm).abs() / r.x_l_ohm < 1e-12);
        assert!((r.z_mag_ohm - 50.0).abs() < 1e-9);

        let lossless = RlcFilter::new(0.0, 1e-6, 1e-12).unwrap();
        let r0 = reactances(&lossless, f_res).unwrap();
        assert!(r0.z_mag_ohm < 1e-6);
    }

    #[test]
    fn reactances_frozen_point() {
        // Independently recomputed with 40-digit arithmetic.
        let r = reactances(&default_filter(), 1e9).unwrap();
        assert!(rel_err(r.x_l_ohm, 6283.18530717958647) < 1e-12);
        assert!(rel_err(r.x_c_ohm, 159.154943091895336) < 1e-12);
        assert!(rel_err(r.z_mag_ohm, 6124.23447463) < 1e-9);
    }

    #[test]
    fn reactances_rejects_bad_frequency() {
        assert!(reactances(&default_filter(), 0.0).is_err());
        assert!(reactances(&default_filter(), -1e6).is_err());
        assert!(reactances(&default_filter(), f64::NAN).is_err());
    }

    #[test]
    fn filter_tf_dc_gain_is_exactly_one() {
        let tf = filter_tf(&default_filter());
        let g0 = tf.eval(Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!(g0, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn filter_tf_coefficients() {
        let tf = filter_tf(&default_filter());
        assert!(rel_err(tf.num()[0], 1e18) < 1e-12);
        assert!(rel_err(tf.den()[0], 1e18) < 1e-12);
        assert!(rel_err(tf.den()[1], 5e7) < 1e-12);
        assert_eq!(tf.den()[2], 1.0);

        let lossless = RlcFilter::new(0.0, 1e-6, 1e-12).unwrap();
        let tf0 = filter_tf(&lossless);
        assert_eq!(tf0.den()[1], 0.0);
        assert_eq!(tf0.den()[2], 1.0);
    }

    #[test]
    fn filter_poles_critically_damped() {
        // r = 2*sqrt(L/C) makes the discriminant vanish.
        let l = 1e-6;
        let c = 1e-12;
        let r = 2.0 * (l / c as f64).sqrt();
        let f = RlcFilter::new(r, l, c).unwrap();
        let p = filter_poles(&f);
        let expect = -f.a2() / 2.0;
        assert!(rel_err(p.s1.re, expect) < 1e-7);
        assert!(rel_err(p.s2.re, expect) < 1e-7);
        // double roots split by sqrt of the coefficient rounding
        assert!(p.s1.im.abs() < 1e-7 * expect.abs());
        assert!(p.s2.im.abs() < 1e-7 * expect.abs());
    }

    #[test]
    fn filter_poles_undamped_pair() {
        let f = RlcFilter::new(0.0, 1e-6, 1e-12).unwrap();
        let p = filter_poles(&f);
        let w0 = f.a1().sqrt();
        assert_eq!(p.s1.re, 0.0);
        assert_eq!(p.s2.re, 0.0);
        assert!(rel_err(p.s1.im, -w0) < 1e-12);
        assert!(rel_err(p.s2.im, w0) < 1e-12);
    }

    #[test]
    fn filter_poles_frozen_point() {
        // Independently recomputed: -2.5e7 +/- j*9.99687451157e8 rad/s.
        let p = filter_poles(&default_filter());
        assert!(rel_err(p.s1.re, -2.5e7) < 1e-9);
        assert!(rel_err(p.s1.im, -9.99687451157e8) < 1e-9);
        assert_eq!(p.s1.re, p.s2.re);
        assert_eq!(p.s1.im, -p.s2.im);
    }

    #[test]
    fn eval_tf_rolls_off_at_high_frequency() {
        let tf = filter_tf(&default_filter());
        let hi = tf.eval(Complex64::new(0.0, 1e14)).unwrap();
        assert!(hi.norm() < 1e-9);
    }

    #[test]
    fn eval_tf_frozen_point() {
        // G(j*2*pi*1e8) for den [1e18, 5e7, 1], num [1e18]; 40-digit reference.
        let tf = filter_tf(&default_filter());
        let v = tf.eval(Complex64::new(0.0, TAU * 1e8)).unwrap();
        assert!(rel_err(v.re, 1.6478629525541) < 1e-12);
        assert!(rel_err(v.im, -0.085538314448292) < 1e-11);
    }

    #[test]
    fn eval_tf_refuses_poles() {
        let f = default_filter();
        let tf = filter_tf(&f);
        let p = filter_poles(&f).s1;
        assert!(matches!(tf.eval(p), Err(Error::PoleEvaluation { .. })));
        // near-pole (1e-7 relative offset) also trips the guard
        let near = p * Complex64::new(1.0 + 1e-7, 0.0);
        assert!(tf.eval(near).is_err());
        // a point 1% away evaluates fine
        let far = p * Complex64::new(1.01, 0.0);
        assert!(tf.eval(far).is_ok());
    }

    #[test]
    fn stepper_converges_to_dc_gain() {
        let f = default_filter();
        let mut stepper = FilterStepper::new(&filter_tf(&f), 1e-9).unwrap();
        // >= 10 time constants: tau = 2*L/R = 4e-8 s -> 4000 steps is plenty
        let mut y = 0.0;
        for _ in 0..4000 {
            y = stepper.step(1.0);
        }
        assert!((y - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stepper_zero_in_zero_out() {
        let mut stepper = FilterStepper::new(&filter_tf(&default_filter()), 1e-10).unwrap();
        for _ in 0..1000 {
            assert_eq!(stepper.step(0.0), 0.0);
        }
    }

    #[test]
    fn stepper_reset_zeroes_state() {
        let mut stepper = FilterStepper::new(&filter_tf(&default_filter()), 1e-10).unwrap();
        for _ in 0..100 {
            stepper.step(1.0);
        }
        stepper.reset();
        assert_eq!(stepper.step(0.0), 0.0);
    }

    #[test]
    fn stepper_matches_closed_form_step_response() {
        // Underdamped closed form: 1 - exp(-a*t)*(cos(wd*t) + (a/wd)*sin(wd*t)).
        // The trapezoidal rule sees a unit step applied midway between samples
        // -1 and 0, so sample n corresponds to t = n*dt + dt/2.
        let f = default_filter();
        let dt = 1e-11;
        let mut stepper = FilterStepper::new(&filter_tf(&f), dt).unwrap();
        let alpha = f.a2() / 2.0;
        let wd = (f.a1() - alpha * alpha).sqrt();
        let mut y = 0.0;
        for n in 0..=500 {
            y = stepper.step(1.0);
            let t = n as f64 * dt + dt / 2.0;
            let exact = 1.0 - (-alpha * t).exp() * ((wd * t).cos() + alpha / wd * (wd * t).sin());
            assert!(
                (y - exact).abs() < 1e-4,
                "step {n}: |{y} - {exact}| = {}",
                (y - exact).abs()
            );
        }
        // frozen discrete output at the 5 ns sample
        assert!((y - 0.7679713424).abs() < 1e-6);
    }

    #[test]
    fn stepper_rejects_high_order_and_bad_dt() {
        let tf = RationalTf::new(vec![1.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(FilterStepper::new(&tf, 1e-9).is_err());
        let tf2 = filter_tf(&default_filter());
        assert!(FilterStepper::new(&tf2, 0.0).is_err());
        assert!(FilterStepper::new(&tf2, -1e-9).is_err());
    }

    #[test]
    fn stepper_tracks_continuous_frequency_response() {
        // Drive with sinusoids well below Nyquist; steady-state amplitude and
        // phase must match eval() within 1% up to f = 1/(50*dt).
        let f = default_filter();
        let dt = 1e-11;
        let tf = filter_tf(&f);
        for f_hz in [1e6, 1e7, 1e8, 1.0 / (50.0 * dt)] {
            let mut stepper = FilterStepper::new(&tf, dt).unwrap();
            let w = TAU * f_hz;
            let period_steps = (1.0 / (f_hz * dt)).round() as usize;
            let settle = 20_000.max(4 * period_steps); // filter tau = 4e-8 s = 4000 steps
            let measure = 10 * period_steps;
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..(settle + measure) {
                let t = n as f64 * dt;
                let y = stepper.step((w * t).sin());
                if n >= settle {
                    // quadrature demodulation against exp(-j*w*t)
                    acc += y * Complex64::new(0.0, -w * t).exp();
                }
            }
            // y = A*sin(wt + ph) demodulates to (A/2)*exp(j*(ph - pi/2))
            let meas = acc * 2.0 / measure as f64;
            let amp = meas.norm();
            let phase = meas.arg() + PI / 2.0;
            let expect = tf.eval(Complex64::new(0.0, w)).unwrap();
            assert!(
                rel_err(amp, expect.norm()) < 0.01,
                "f = {f_hz}: amp {amp} vs {}",
                expect.norm()
            );
            let dphase = (phase - expect.arg() + PI).rem_euclid(TAU) - PI;
            assert!(dphase.abs() < 0.01 * expect.arg().abs().max(0.01), "f = {f_hz}: phase");
        }
    }

    #[test]
    fn vco_advances_free_running_phase() {
        let p = vco_advance(0.0, 5e9, TAU * 1e8, 0.0, 1e-12).unwrap();
        assert!(rel_err(p, TAU * 5e-3) < 1e-12);
    }

    #[test]
    fn vco_instantaneous_frequency_shift() {
        let dt = 1e-12;
        let p = vco_advance(0.0, 5e9, TAU * 1e8, 1.0, dt).unwrap();
        let f_inst = p / (TAU * dt);
        assert!(rel_err(f_inst, 5.1e9) < 1e-12);
    }

    #[test]
    fn vco_constant_control_integrates_exactly() {
        let f_free = 5e9;
        let k_vco = TAU * 1e8;
        let v = 0.25;
        let dt = 1e-10;
        let steps = 10_000;
        let mut phase = 0.0;
        for _ in 0..steps {
            phase = vco_advance(phase, f_free, k_vco, v, dt).unwrap();
        }
        let expect = (TAU * f_free + k_vco * v) * dt * steps as f64;
        assert!(rel_err(phase, expect) < 1e-12);
    }

    #[test]
    fn vco_rejects_non_finite() {
        assert!(vco_advance(f64::NAN, 5e9, 1.0, 0.0, 1e-10).is_err());
        assert!(vco_advance(0.0, 5e9, 1.0, f64::INFINITY, 1e-10).is_err());
        assert!(vco_advance(0.0, 5e9, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn divider_scales_phase() {
        assert!((divide_phase(TAU * 100.0, 100) - TAU).abs() < 1e-12);
        assert_eq!(divide_phase(1.2345, 1), 1.2345);
        // growth rate divides too
        let d1 = divide_phase(TAU * 5e9 * 1e-9, 100);
        let d0 = divide_phase(0.0, 100);
        assert!(rel_err((d1 - d0) / 1e-9, TAU * 5e7) < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_filter() -> impl Strategy<Value = RlcFilter> {
            // log-uniform component values spanning realistic decades,
            // occasionally lossless
            (0.0f64..=4.0, -9.0f64..=-3.0, -15.0f64..=-9.0, any::<bool>()).prop_map(
                |(lr, ll, lc, lossless)| {
                    let r = if lossless { 0.0 } else { 10f64.powf(lr) };
                    RlcFilter::new(r, 10f64.powf(ll), 10f64.powf(lc)).unwrap()
                },
            )
        }

        proptest! {
            #[test]
            fn pd_is_linear(a in -10.0f64..10.0, b in -10.0f64..10.0,
                            c in -10.0f64..10.0, d in -10.0f64..10.0,
                            k in 0.1f64..10.0) {
                let lhs = pd_output(k, a, b).unwrap() + pd_output(k, c, d).unwrap();
                let rhs = pd_output(k, a + c, b + d).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            }

            #[test]
            fn poles_satisfy_vieta(f in arb_filter()) {
                let p = filter_poles(&f);
                let sum = p.s1 + p.s2;
                let prod = p.s1 * p.s2;
                prop_assert!((sum.re + f.a2()).abs() <= 1e-9 * f.a2().max(1.0));
                prop_assert!(sum.im.abs() <= 1e-9 * f.a2().max(1.0));
                prop_assert!((prod.re - f.a1()).abs() <= 1e-9 * f.a1());
                prop_assert!(prod.im.abs() <= 1e-9 * f.a1());
            }

            #[test]
            fn damped_poles_sit_in_left_half_plane(f in arb_filter()) {
                prop_assume!(f.r() > 0.0);
                let p = filter_poles(&f);
                prop_assert!(p.s1.re < 0.0);
                prop_assert!(p.s2.re < 0.0);
            }

            #[test]
            fn near_pole_evaluation_errors(f in arb_filter()) {
                let tf = filter_tf(&f);
                let p = filter_poles(&f);
                for pole in [p.s1, p.s2] {
                    let near = pole * Complex64::new(1.0 + 1e-8, 0.0);
                    prop_assert!(tf.eval(near).is_err());
                    let far = pole * Complex64::new(1.5, 0.0);
                    prop_assert!(tf.eval(far).is_ok());
                }
            }
        }
    }
}
