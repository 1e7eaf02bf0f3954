//! Fixed IIR notch cascade used as the comparison baseline.

use std::f64::consts::PI;

use crate::dsp::{Biquad, FilterCoefficients, FilterState};
use crate::{Error, Result};

/// Second-order notch at `f0` with -3 dB bandwidth `bw`:
/// `H(z) = (1 + a)/2 * (1 - 2 cos w0 z^-1 + z^-2) / (1 - (1 + a) cos w0 z^-1 + a z^-2)`
/// with `a = (1 - tan(pi bw / fs)) / (1 + tan(pi bw / fs))`.
pub fn notch_section(fs: f64, f0: f64, bw: f64) -> Result<Biquad> {
    if !(f0 > 0.0 && f0 < fs / 2.0) {
        return Err(Error::param(
            "f0",
            format!("notch centre {f0} Hz must lie in (0, {}) Hz", fs / 2.0),
        ));
    }
    if !(bw > 0.0 && bw < fs / 2.0) {
        return Err(Error::param(
            "bw",
            format!("bandwidth must lie in (0, fs/2), got {bw}"),
        ));
    }
    let t = (PI * bw / fs).tan();
    let a = (1.0 - t) / (1.0 + t);
    let c = (2.0 * PI * f0 / fs).cos();
    let g = (1.0 + a) / 2.0;
    Ok(Biquad {
        b0: g,
        b1: -2.0 * c * g,
        b2: g,
        a1: -(1.0 + a) * c,
        a2: a,
    })
}

/// Notches at `k * f0`, `k = 1..=harmonics`.
pub fn notch_cascade(fs: f64, f0: f64, bw: f64, harmonics: usize) -> Result<FilterCoefficients> {
    let sections = (1..=harmonics)
        .map(|k| notch_section(fs, k as f64 * f0, bw))
        .collect::<Result<Vec<_>>>()?;
    Ok(FilterCoefficients { sections })
}

/// Filters `x` through [`notch_cascade`].
pub fn baseline_notch(x: &[f64], fs: f64, f0: f64, bw: f64, harmonics: usize) -> Result<Vec<f64>> {
    let coeffs = notch_cascade(fs, f0, bw, harmonics)?;
    let mut state = FilterState::new(&coeffs);
    Ok(x.iter().map(|&v| state.filter_sample(&coeffs, v)).collect())
}
