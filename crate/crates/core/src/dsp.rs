//! Fixed (non-adaptive) filtering: the bandpass preprocessor, the
//! first-difference stage that feeds the frequency estimator, and an
//! optional DC blocker.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Second-order section with the leading denominator coefficient fixed at 1:
/// `H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Stability triangle: both poles strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    /// Complex response at `omega` rad/sample.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + z1 * self.b1 + z2 * self.b2) / (1.0 + z1 * self.a1 + z2 * self.a2)
    }

    /// Pole radius of the section (largest pole magnitude).
    pub fn pole_radius(&self) -> f64 {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc < 0.0 {
            self.a2.sqrt()
        } else {
            let s = disc.sqrt();
            ((-self.a1 + s) / 2.0)
                .abs()
                .max(((-self.a1 - s) / 2.0).abs())
        }
    }
}

/// Cascade of second-order sections, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
}

impl FilterCoefficients {
    pub fn response(&self, omega: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(omega))
    }

    /// Magnitude response at `freq` Hz for sampling rate `fs`.
    pub fn magnitude_at(&self, freq: f64, fs: f64) -> f64 {
        self.response(2.0 * PI * freq / fs).norm()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }
}

/// Designs a 4th-order Butterworth bandpass (two second-order sections)
/// with -3 dB edges at `f_lo` and `f_hi`, unity gain at `sqrt(f_lo * f_hi)`.
///
/// A 2nd-order analog Butterworth lowpass prototype is frequency-transformed
/// to a bandpass with pre-warped edges and mapped through the bilinear
/// transform. Each section carries one conjugate pole pair and the zero pair
/// at `z = +1, -1`.
pub fn design_bandpass(fs: f64, f_lo: f64, f_hi: f64) -> Result<FilterCoefficients> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::param(
            "fs",
            format!("sampling rate must be positive, got {fs}"),
        ));
    }
    if !(f_lo > 0.0 && f_lo < f_hi) {
        return Err(Error::param(
            "band",
            format!("need 0 < f_lo < f_hi, got f_lo = {f_lo}, f_hi = {f_hi}"),
        ));
    }
    if f_hi >= fs / 2.0 {
        return Err(Error::param(
            "band",
            format!(
                "upper edge {f_hi} Hz is at or above Nyquist ({} Hz)",
                fs / 2.0
            ),
        ));
    }

    // Pre-warped edges for s = (1 - z^-1) / (1 + z^-1).
    let w_lo = (PI * f_lo / fs).tan();
    let w_hi = (PI * f_hi / fs).tan();
    let bw = w_hi - w_lo;
    let w0_sq = w_lo * w_hi;

    // Upper-half-plane prototype pole; its conjugate yields the conjugate
    // bandpass poles, so the two roots below each define one section.
    let proto = Complex64::from_polar(1.0, 3.0 * PI / 4.0);
    let pb = proto * bw;
    let disc = (pb * pb - 4.0 * w0_sq).sqrt();
    let roots = [(pb + disc) / 2.0, (pb - disc) / 2.0];

    let centre = 2.0 * PI * (f_lo * f_hi).sqrt() / fs;
    let sections = roots
        .iter()
        .map(|&s| {
            let z = (1.0 + s) / (1.0 - s);
            let mut sec = Biquad {
                b0: 1.0,
                b1: 0.0,
                b2: -1.0,
                a1: -2.0 * z.re,
                a2: z.norm_sqr(),
            };
            let g = 1.0 / sec.response(centre).norm();
            sec.b0 *= g;
            sec.b2 *= g;
            sec
        })
        .collect();
    Ok(FilterCoefficients { sections })
}

/// Delay registers for a [`FilterCoefficients`] cascade (transposed direct
/// form II, two per section) plus the differentiator's previous input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterState {
    regs: Vec<[f64; 2]>,
    prev: f64,
}

impl FilterState {
    pub fn new(coeffs: &FilterCoefficients) -> Self {
        Self {
            regs: vec![[0.0; 2]; coeffs.sections.len()],
            prev: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.regs.iter_mut().for_each(|r| *r = [0.0; 2]);
        self.prev = 0.0;
    }

    /// One sample through the cascade.
    pub fn filter_sample(&mut self, coeffs: &FilterCoefficients, x: f64) -> f64 {
        debug_assert_eq!(self.regs.len(), coeffs.sections.len());
        let mut v = x;
        for (s, r) in coeffs.sections.iter().zip(self.regs.iter_mut()) {
            let y = s.b0 * v + r[0];
            r[0] = s.b1 * v - s.a1 * y + r[1];
            r[1] = s.b2 * v - s.a2 * y;
            v = y;
        }
        v
    }

    /// First difference `x_f(n) - x_f(n-1)`, with `x_f(-1) = 0`.
    pub fn differentiate(&mut self, x_f: f64) -> f64 {
        let d = x_f - self.prev;
        self.prev = x_f;
        d
    }

    pub fn filter_slice(&mut self, coeffs: &FilterCoefficients, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.filter_sample(coeffs, v)).collect()
    }
}

pub const DEFAULT_DC_POLE: f64 = 0.995;

/// One-pole DC blocker `y(n) = x(n) - x(n-1) + pole * y(n-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcBlocker {
    pole: f64,
    x1: f64,
    y1: f64,
}

impl DcBlocker {
    pub fn new(pole: f64) -> Result<Self> {
        if !(pole > 0.0 && pole < 1.0) {
            return Err(Error::param(
                "dc_pole",
                format!("must lie in (0, 1), got {pole}"),
            ));
        }
        Ok(Self {
            pole,
            x1: 0.0,
            y1: 0.0,
        })
    }

    pub fn dc_block(&mut self, x: f64) -> f64 {
        let y = x - self.x1 + self.pole * self.y1;
        self.x1 = x;
        self.y1 = y;
        y
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.y1 = 0.0;
    }
}

impl Default for DcBlocker {
    fn default() -> Self {
        Self {
            pole: DEFAULT_DC_POLE,
            x1: 0.0,
            y1: 0.0,
        }
    }
}
