//! Streaming, reference-free cancellation of 50/60 Hz power-line
//! interference and its harmonics in biosignal recordings.
//!
//! The pipeline for every sample is:
//!
//! 1. a 4th-order Butterworth bandpass plus first difference
//!    ([`dsp`]) that emphasises the interference fundamental,
//! 2. a lattice adaptive-notch frequency estimator with scheduled
//!    bandwidth and forgetting factor ([`freq`]),
//! 3. a bank of gain-controlled waveguide oscillators driven by the
//!    Chebyshev recurrence on the fundamental ([`oscillator`]),
//! 4. a cascade of per-harmonic diagonal RLS amplitude/phase estimators
//!    ([`rls`]) whose summed output is subtracted from the input.
//!
//! [`canceller`] wires these together. [`siggen`], [`metrics`], [`psd`] and
//! [`notch`] provide the synthetic-experiment harness, [`experiments`]
//! the canned protocols, and [`fixedpoint`] a 16/24-bit word-length
//! simulation of the same dataflow.
//!
//! ```
//! use plic_core::{AltParams, Canceller};
//!
//! let params = AltParams::default();
//! let mut canceller = Canceller::new(&params).unwrap();
//! let fs = params.fs;
//! let mut last = 0.0;
//! for n in 0..5000 {
//!     let t = n as f64 / fs;
//!     let x = (2.0 * std::f64::consts::PI * 60.0 * t).cos();
//!     last = canceller.process_sample(x).unwrap();
//! }
//! assert!(last.abs() < 0.1);
//! ```

pub mod batch;
pub mod canceller;
pub mod dsp;
mod error;
pub mod experiments;
pub mod fixedpoint;
pub mod freq;
pub mod metrics;
pub mod notch;
pub mod oscillator;
pub mod params;
pub mod psd;
pub mod rls;
pub mod siggen;
mod signal;

pub use canceller::{process_stream, Canceller, Diagnostics};
pub use error::{Error, Result};
pub use params::{map_params, ActualParams, AltParams};
pub use signal::Signal;
