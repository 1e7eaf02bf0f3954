//! Welch power spectral density estimate.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::{Error, Result};

/// One-sided PSD in power per Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

/// Averages Hann-windowed periodograms of `segment`-sample blocks with
/// fractional `overlap` in `[0, 1)`.
pub fn welch_psd(x: &[f64], fs: f64, segment: usize, overlap: f64) -> Result<Psd> {
    if segment < 2 {
        return Err(Error::param("segment", "must be at least 2"));
    }
    if segment > x.len() {
        return Err(Error::param(
            "segment",
            format!("segment {segment} exceeds signal length {}", x.len()),
        ));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param(
            "overlap",
            format!("must lie in [0, 1), got {overlap}"),
        ));
    }
    let hop = ((segment as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..segment)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment as f64).cos())
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        for (b, (v, w)) in buf
            .iter_mut()
            .zip(x[start..start + segment].iter().zip(&window))
        {
            *b = Complex64::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += hop;
    }
    let scale = 1.0 / (fs * win_power * count as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let edge = k == 0 || (segment.is_multiple_of(2) && k == bins - 1);
            a * scale * if edge { 1.0 } else { 2.0 }
        })
        .collect();
    let freqs = (0..bins).map(|k| k as f64 * fs / segment as f64).collect();
    Ok(Psd { freqs, power })
}
