//! s-domain loop analysis: open- and closed-loop transfer functions, jitter
//! transfer, Bode data and stability verdicts.
//!
//! Closed-loop functions are formed by exact polynomial algebra (coefficient
//! convolution and addition) rather than pointwise division, so their poles
//! stay available for the stability check. All operations are pure and safe
//! to call from parallel sweeps.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{LoopParams, RationalTf, RlcFilter};

/// Log-spaced frequency response samples.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeTable {
    pub freqs_hz: Vec<f64>,
    pub mag_db: Vec<f64>,
    /// Unwrapped phase: adjacent points continue by the nearest multiple
    /// of 360 degrees.
    pub phase_deg: Vec<f64>,
}

/// Loop gain around the topology:
/// `L(s) = K_PD * G(s) * (K_VCO / s) * (1 / N)`.
///
/// The denominator gains an exact integrator pole at s = 0, so
/// `|L(j*2*pi*f)| -> infinity` as `f -> 0`.
pub fn open_loop_tf(params: &LoopParams, filter: &RlcFilter) -> RationalTf {
    let g = crate::blocks::filter_tf(filter);
    let gain = params.k_pd() * params.k_vco() / params.n_div() as f64;
    let num = poly_scale(g.num(), gain);
    let den = poly_mul(&[0.0, 1.0], g.den());
    RationalTf::new(num, den).expect("loop gain composition is proper")
}

/// Jitter transfer from the reference input to the output phase:
/// `H_in(s) = K_PD*G*K_VCO/s / (1 + K_PD*G*K_VCO/(s*N))`.
///
/// Low-pass in character: `|H_in(0)| = N`, rolling off past the loop
/// crossover.
pub fn input_jitter_tf(params: &LoopParams, filter: &RlcFilter) -> RationalTf {
    let l = open_loop_tf(params, filter);
    let num = poly_scale(l.num(), params.n_div() as f64);
    let den = poly_add(l.den(), l.num());
    RationalTf::new(num, den).expect("closed-loop composition is proper")
}

/// Jitter transfer from VCO phase noise to the output phase:
/// `H_vco(s) = 1 / (1 + K_PD*G*K_VCO/(s*N))`.
///
/// High-pass in character: the loop nulls slow VCO wander
/// (`H_vco(0) = 0`) and passes fast VCO jitter (`|H_vco| -> 1`).
pub fn vco_jitter_tf(params: &LoopParams, filter: &RlcFilter) -> RationalTf {
    let l = open_loop_tf(params, filter);
    let den = poly_add(l.den(), l.num());
    RationalTf::new(l.den().to_vec(), den).expect("closed-loop composition is proper")
}

/// Log-spaced Bode data over `[f_lo, f_hi]` Hz.
pub fn bode(tf: &RationalTf, f_lo: f64, f_hi: f64, n_points: usize) -> Result<BodeTable> {
    if !(f_lo.is_finite() && f_hi.is_finite()) || f_lo <= 0.0 || f_hi <= f_lo {
        return Err(Error::InvalidInput(format!(
            "need 0 < f_lo < f_hi, got f_lo = {f_lo}, f_hi = {f_hi}"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidInput(format!("need n_points >= 2, got {n_points}")));
    }
    let ratio = f_hi / f_lo;
    let mut freqs_hz = Vec::with_capacity(n_points);
    let mut mag_db = Vec::with_capacity(n_points);
    let mut phase_deg = Vec::with_capacity(n_points);
    let mut prev_phase: Option<f64> = None;
    for i in 0..n_points {
        let f = f_lo * ratio.powf(i as f64 / (n_points - 1) as f64);
        let h = tf.eval(Complex64::new(0.0, TAU * f))?;
        let mut ph = h.arg().to_degrees();
        if let Some(prev) = prev_phase {
            ph += 360.0 * ((prev - ph) / 360.0).round();
        }
        prev_phase = Some(ph);
        freqs_hz.push(f);
        mag_db.push(20.0 * h.norm().log10());
        phase_deg.push(ph);
    }
    Ok(BodeTable { freqs_hz, mag_db, phase_deg })
}

/// Distance from the imaginary axis below which a pole counts as marginal.
/// Far below any physical pole magnitude in this problem (1e7..1e10 rad/s),
/// far above double-precision noise.
pub const STABILITY_AXIS_TOL: f64 = 1e-3;

/// Stability classification of a transfer function's denominator roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    Stable,
    Marginal,
    Unstable,
}

impl std::fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StabilityVerdict::Stable => "stable",
            StabilityVerdict::Marginal => "marginal",
            StabilityVerdict::Unstable => "unstable",
        };
        f.write_str(s)
    }
}

/// Classify stability from the denominator roots: stable iff every root has
/// `Re < -1e-3` rad/s, marginal if any root sits within 1e-3 of the axis,
/// otherwise unstable.
pub fn stability(tf: &RationalTf) -> Result<StabilityVerdict> {
    if tf.den_degree() == 0 {
        return Err(Error::InvalidInput(
            "stability needs a denominator of degree >= 1".into(),
        ));
    }
    let roots = poly_roots(tf.den());
    let mut verdict = StabilityVerdict::Stable;
    for root in roots {
        if root.re > STABILITY_AXIS_TOL {
            return Ok(StabilityVerdict::Unstable);
        }
        if root.re >= -STABILITY_AXIS_TOL {
            verdict = StabilityVerdict::Marginal;
        }
    }
    Ok(verdict)
}

/// Unity-gain crossover of `|tf(j*2*pi*f)|`, found by bracketing on a log
/// grid and bisecting. `None` when no crossing exists in 1 Hz .. 1e12 Hz.
pub fn crossover_freq(tf: &RationalTf) -> Option<f64> {
    let mag = |f: f64| tf.eval(Complex64::new(0.0, TAU * f)).ok().map(|h| h.norm());
    let n = 241;
    let (f_lo, f_hi) = (1.0f64, 1e12f64);
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let f = f_lo * (f_hi / f_lo).powf(i as f64 / (n - 1) as f64);
        let Some(m) = mag(f) else { continue };
        if let Some((fp, mp)) = prev {
            if (mp - 1.0) * (m - 1.0) <= 0.0 && mp != m {
                // bisect [fp, f] in log space
                let (mut a, mut b) = (fp, f);
                let above_at_a = mp > 1.0;
                for _ in 0..200 {
                    let mid = (a * b).sqrt();
                    let Some(mm) = mag(mid) else { break };
                    if (mm > 1.0) == above_at_a {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Some((a * b).sqrt());
            }
        }
        prev = Some((f, m));
    }
    None
}

/// All complex roots of a real-coefficient polynomial (ascending order),
/// via the Durand-Kerner simultaneous iteration with magnitude pre-scaling.
///
/// Independent of the closed-form quadratic path in
/// [`crate::blocks::filter_poles`]; the two act as mutual oracles.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    // strip leading (high-order) zeros
    let mut hi = coeffs.len();
    while hi > 0 && coeffs[hi - 1] == 0.0 {
        hi -= 1;
    }
    let coeffs = &coeffs[..hi];
    if coeffs.len() <= 1 {
        return Vec::new();
    }
    // factor out exact roots at the origin
    let mut lo = 0;
    while lo < coeffs.len() - 1 && coeffs[lo] == 0.0 {
        lo += 1;
    }
    let mut roots = vec![Complex64::new(0.0, 0.0); lo];
    let work = &coeffs[lo..];
    let n = work.len() - 1;
    if n == 0 {
        return roots;
    }

    // monic in the scaled variable x = s / sigma keeps the iteration
    // conditioned even when coefficients span many decades
    let lead = work[n];
    let mut sigma: f64 = 0.0;
    for (k, &c) in work.iter().enumerate().take(n) {
        if c != 0.0 {
            sigma = sigma.max((c / lead).abs().powf(1.0 / (n - k) as f64));
        }
    }
    if sigma == 0.0 {
        sigma = 1.0;
    }
    // q(x) = p(sigma*x) / (lead * sigma^n): coefficient k is
    // (c_k / lead) / sigma^(n-k), leaving q monic with roots at root/sigma
    let monic: Vec<f64> = work
        .iter()
        .enumerate()
        .map(|(k, &c)| c / lead / sigma.powi((n - k) as i32))
        .collect();

    let eval = |z: Complex64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };

    // standard Durand-Kerner seeds: powers of (0.4 + 0.9i)
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|j| seed.powu(j as u32 + 1)).collect();
    for _ in 0..200 {
        let mut max_step: f64 = 0.0;
        for j in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for k in 0..n {
                if k != j {
                    denom *= z[j] - z[k];
                }
            }
            if denom.norm() == 0.0 {
                // perturb coincident estimates
                z[j] += Complex64::new(1e-8, 1e-8);
                continue;
            }
            let step = eval(z[j]) / denom;
            z[j] -= step;
            max_step = max_step.max(step.norm() / z[j].norm().max(1.0));
        }
        if max_step < 1e-15 {
            break;
        }
    }
    roots.extend(z.into_iter().map(|zj| zj * sigma));
    roots
}

// ---- small real-polynomial helpers (ascending coefficients) ----

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

pub(crate) fn poly_scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|&c| c * k).collect()
}
