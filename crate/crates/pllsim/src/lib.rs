//! Behavioral simulation and linear analysis of an integer-N phase-locked
//! loop as used for multi-gigahertz clock recovery.
//!
//! The loop is composed of four block models — a linear phase detector, a
//! second-order RLC low-pass filter, a VCO (phase integrator) and a feedback
//! divider — wired into a fixed-step time-domain engine with deterministic
//! jitter injection at the reference input or the VCO. A parallel s-domain
//! path builds the open-loop and jitter-transfer functions by polynomial
//! algebra and cross-checks the time-domain results.
//!
//! ```
//! use pllsim::{analysis, engine, LoopParams, RlcFilter, SimConfig, SimMode};
//! use std::f64::consts::TAU;
//!
//! // 50 MHz reference multiplied to 5 GHz
//! let params = LoopParams::centered(1.0, TAU * 1e8, 100, 5e7).unwrap();
//! let filter = RlcFilter::new(50.0, 1e-6, 1e-12).unwrap();
//! let cfg = SimConfig::new(SimMode::PhaseDomain, 1e-10, 2e-5, 1e-4, 2e-6, 100).unwrap();
//!
//! let trace = engine::simulate(&params, &filter, &cfg, &[]).unwrap();
//! assert!(trace.lock_time_s.is_some());
//!
//! let l = analysis::open_loop_tf(&params, &filter);
//! assert!(analysis::crossover_freq(&l).unwrap() > 0.0);
//! ```

pub mod analysis;
pub mod blocks;
pub mod engine;
pub mod error;
pub mod jitter;
pub mod types;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use types::{
    CarrierWaves, InjectionPoint, JitterKind, JitterSpec, LoopParams, PolePair, RationalTf,
    RlcFilter, SimConfig, SimMode, SimTrace,
};
