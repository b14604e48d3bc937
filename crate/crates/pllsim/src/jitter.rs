//! Deterministic, seedable jitter-sequence generation.
//!
//! Random sequences are pinned to a named algorithm with published constants
//! so golden vectors stay portable: seeds expand through SplitMix64 into
//! xoshiro256++ state, uniforms map to (0, 1] by `((x >> 11) + 1) * 2^-53`,
//! and Gaussian variates come from the Box-Muller transform applied to
//! consecutive uniform pairs (both outputs of each pair are consumed, in
//! order). No library RNG defaults are involved anywhere.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::types::{JitterKind, JitterSpec};

/// xoshiro256++ generator (Blackman/Vigna reference constants), seeded from
/// a single `u64` via SplitMix64.
#[derive(Debug, Clone)]
pub struct JitterRng {
    s: [u64; 4],
}

impl JitterRng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let mut next_sm = || {
            sm = sm.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = sm;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        };
        Self { s: [next_sm(), next_sm(), next_sm(), next_sm()] }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform double in (0, 1]: the top 53 bits, shifted into (0, 1] so the
    /// Box-Muller logarithm never sees zero.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One Box-Muller pair of independent standard normal variates.
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }
}

/// Standard normal samples, consuming Box-Muller pairs in order (the second
/// half of the final pair is dropped for odd lengths).
fn gaussian_sequence(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = JitterRng::new(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (z0, z1) = rng.next_gaussian_pair();
        out.push(z0);
        if out.len() < n {
            out.push(z1);
        }
    }
    out
}

/// Generate the jitter sequence described by `spec` over a uniform time grid.
///
/// Equal `(kind, amplitude, freq, seed)` and equal grids always reproduce the
/// same bits. The grid must be strictly increasing with uniform step.
pub fn gen_jitter(spec: &JitterSpec, t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.len() >= 2 {
        let dt = t_grid[1] - t_grid[0];
        if dt <= 0.0 {
            return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
        }
        for w in t_grid.windows(2) {
            let step = w[1] - w[0];
            if step <= 0.0 || (step - dt).abs() > 1e-9 * dt {
                return Err(Error::InvalidInput(format!(
                    "time grid must be uniform: step {} differs from {}",
                    step, dt
                )));
            }
        }
    }
    let amp = spec.amplitude_rad();
    let out = match spec.kind() {
        JitterKind::Sinusoidal { freq_hz } => {
            t_grid.iter().map(|&t| amp * (TAU * freq_hz * t).sin()).collect()
        }
        JitterKind::WhitePhase { seed } => {
            let mut g = gaussian_sequence(seed, t_grid.len());
            for z in g.iter_mut() {
                *z *= amp;
            }
            g
        }
        JitterKind::RandomWalk { seed } => {
            // walk increments are exactly the white-phase sequence for the
            // same seed
            let mut g = gaussian_sequence(seed, t_grid.len());
            let mut acc = 0.0;
            for z in g.iter_mut() {
                acc += *z * amp;
                *z = acc;
            }
            g
        }
    };
    Ok(out)
}
