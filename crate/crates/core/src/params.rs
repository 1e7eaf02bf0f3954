//! Parameter sets.
//!
//! [`AltParams`] is the human-facing form: bandwidths in Hz and settling
//! times in seconds, independent of the sampling rate. [`map_params`]
//! turns it into the pole radii, forgetting factors and smoothing factor
//! the estimators actually use.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Human-facing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AltParams {
    /// Initial notch bandwidth of the frequency estimator (Hz).
    pub b0: f64,
    /// Asymptotic notch bandwidth (Hz).
    pub b_inf: f64,
    /// Settling time from `b0` to `b_inf` (s).
    pub b_st: f64,
    /// Initial settling time of the frequency estimator (s).
    pub p0: f64,
    /// Asymptotic settling time of the frequency estimator (s).
    pub p_inf: f64,
    /// Settling time from `p0` to `p_inf` (s).
    pub p_st: f64,
    /// Settling time of the amplitude/phase estimators (s).
    pub w: f64,
    /// Number of harmonics to remove.
    pub m_prime: usize,
    /// Sampling rate (Hz).
    pub fs: f64,
    /// Bandpass preprocessor edges (Hz).
    pub band_lo: f64,
    pub band_hi: f64,
    /// Cutoff of the frequency-estimate smoother (Hz).
    pub gamma_cutoff: f64,
    /// Run a DC blocker ahead of the pipeline.
    pub dc_block: bool,
    /// Track the second harmonic and derive the fundamental from it.
    /// Experimental: re-centres the default band on 90-130 Hz.
    pub second_harmonic_mode: bool,
}

impl Default for AltParams {
    fn default() -> Self {
        Self {
            b0: 50.0,
            b_inf: 0.1,
            b_st: 1.0,
            p0: 0.1,
            p_inf: 2.0,
            p_st: 1.0,
            w: 2.0,
            m_prime: 3,
            fs: 1000.0,
            band_lo: DEFAULT_BAND.0,
            band_hi: DEFAULT_BAND.1,
            gamma_cutoff: 90.0,
            dc_block: false,
            second_harmonic_mode: false,
        }
    }
}

pub const DEFAULT_BAND: (f64, f64) = (40.0, 70.0);
pub const SECOND_HARMONIC_BAND: (f64, f64) = (90.0, 130.0);

/// Recommended ranges. Values outside are accepted with a warning.
pub const RECOMMENDED: [(&str, f64, f64); 7] = [
    ("b0", 10.0, 50.0),
    ("b_inf", 0.01, 0.1),
    ("b_st", 0.5, 10.0),
    ("p0", 0.01, 0.5),
    ("p_inf", 1.0, 5.0),
    ("p_st", 1.0, 10.0),
    ("w", 0.5, 5.0),
];

impl AltParams {
    pub fn with_fs(mut self, fs: f64) -> Self {
        self.fs = fs;
        self
    }

    /// Bandpass edges actually used, after the second-harmonic re-centring.
    pub fn band(&self) -> (f64, f64) {
        if self.second_harmonic_mode && (self.band_lo, self.band_hi) == DEFAULT_BAND {
            SECOND_HARMONIC_BAND
        } else {
            (self.band_lo, self.band_hi)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::param(
                "fs",
                format!("must be positive, got {}", self.fs),
            ));
        }
        let durations = [
            ("b_st", self.b_st),
            ("p0", self.p0),
            ("p_inf", self.p_inf),
            ("p_st", self.p_st),
            ("w", self.w),
        ];
        for (name, v) in durations {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("durations must be > 0, got {v}"),
                ));
            }
        }
        if self.b_inf.is_nan() || self.b_inf <= 0.0 {
            return Err(Error::param(
                "b_inf",
                format!("must be > 0, got {}", self.b_inf),
            ));
        }
        if self.b_inf > self.b0 {
            return Err(Error::param(
                "b0",
                format!(
                    "need b_inf <= b0, got b_inf = {}, b0 = {}",
                    self.b_inf, self.b0
                ),
            ));
        }
        if self.b0 >= self.fs / 2.0 {
            return Err(Error::param(
                "b0",
                format!("must be below fs/2, got {}", self.b0),
            ));
        }
        if self.m_prime == 0 {
            return Err(Error::param("m_prime", "at least one harmonic is required"));
        }
        if !(self.gamma_cutoff.is_finite() && self.gamma_cutoff >= 0.0) {
            return Err(Error::param(
                "gamma_cutoff",
                format!("must be >= 0, got {}", self.gamma_cutoff),
            ));
        }
        let (lo, hi) = self.band();
        if !(lo > 0.0 && lo < hi && hi < self.fs / 2.0) {
            return Err(Error::param(
                "band",
                format!(
                    "need 0 < band_lo < band_hi < fs/2, got {lo}..{hi} at fs = {}",
                    self.fs
                ),
            ));
        }
        Ok(())
    }

    /// Human-readable notes for every value outside its recommended range.
    pub fn warnings(&self) -> Vec<String> {
        let values = [
            self.b0, self.b_inf, self.b_st, self.p0, self.p_inf, self.p_st, self.w,
        ];
        RECOMMENDED
            .iter()
            .zip(values)
            .filter(|((_, lo, hi), v)| v < lo || v > hi)
            .map(|((name, lo, hi), v)| {
                format!("{name} = {v} is outside the recommended range {lo}..{hi}")
            })
            .collect()
    }
}

/// Machine parameters derived from [`AltParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActualParams {
    pub alpha_0: f64,
    pub alpha_inf: f64,
    pub alpha_st: f64,
    pub lambda_0: f64,
    pub lambda_inf: f64,
    pub lambda_st: f64,
    pub lambda_a: f64,
    pub gamma: f64,
}

/// Forgetting factor whose exponentially weighted sum reaches 95% of its
/// asymptote after `t_set` seconds: `exp(ln 0.05 / (t_set * fs + 1))`.
pub fn forgetting_factor(t_set: f64, fs: f64) -> f64 {
    (0.05f64.ln() / (t_set * fs + 1.0)).exp()
}

/// Pole radius of the lattice notch for a -3 dB bandwidth of `b` Hz.
pub fn pole_radius(b: f64, fs: f64) -> f64 {
    let t = (PI * b / fs).tan();
    (1.0 - t) / (1.0 + t)
}

/// Smoothing factor of the first-order frequency-estimate smoother for a
/// cutoff of `cutoff` Hz: the bandwidth mapping applied to `cutoff / 2`,
/// with the cutoff limited to Nyquist.
pub fn smoothing_factor(cutoff: f64, fs: f64) -> f64 {
    if cutoff <= 0.0 {
        return 0.0;
    }
    pole_radius(0.5 * cutoff.min(fs / 2.0), fs).clamp(0.0, 0.999)
}

fn in_open_unit(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(Error::param(field, format!("maps to {v}, outside (0, 1)")))
    }
}

pub fn map_params(alt: &AltParams) -> Result<ActualParams> {
    alt.validate()?;
    let fs = alt.fs;
    Ok(ActualParams {
        alpha_0: in_open_unit("b0", pole_radius(alt.b0, fs))?,
        alpha_inf: in_open_unit("b_inf", pole_radius(alt.b_inf, fs))?,
        alpha_st: in_open_unit("b_st", forgetting_factor(alt.b_st, fs))?,
        lambda_0: in_open_unit("p0", forgetting_factor(alt.p0, fs))?,
        lambda_inf: in_open_unit("p_inf", forgetting_factor(alt.p_inf, fs))?,
        lambda_st: in_open_unit("p_st", forgetting_factor(alt.p_st, fs))?,
        lambda_a: in_open_unit("w", forgetting_factor(alt.w, fs))?,
        gamma: smoothing_factor(alt.gamma_cutoff, fs),
    })
}
