//! Synthetic test signals: `1/f^alpha` carriers standing in for neural
//! recordings, harmonic interference with piecewise-linear frequency and
//! amplitude profiles, and SNR-controlled mixing.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::signal::mean_power;
use crate::{Error, Result, Signal};

/// Zero-mean, unit-variance noise with a `1/f^alpha` power spectrum.
///
/// Seeded white Gaussian noise is shaped in the frequency domain by
/// `|k|^(-alpha/2)` (DC removed), transformed back, re-centred and
/// re-scaled.
pub fn gen_pink_noise(n: usize, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::param(
            "n",
            format!("need at least 2 samples, got {n}"),
        ));
    }
    if !(1.0..=3.0).contains(&alpha) {
        return Err(Error::param(
            "alpha",
            format!("must lie in [1, 3], got {alpha}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let bin = k.min(n - k) as f64;
        *v *= bin.powf(-alpha / 2.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = out.iter().sum::<f64>() / n as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let sd = mean_power(&out).sqrt();
    if sd > 0.0 {
        out.iter_mut().for_each(|v| *v /= sd);
    }
    // Second centring pass removes the residual rounding of the first.
    let mean = out.iter().sum::<f64>() / n as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    Ok(out)
}

/// Piecewise-linear function of time, held constant outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    /// `(time_s, value)` knots with strictly increasing times.
    pub knots: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(v: f64) -> Self {
        Self {
            knots: vec![(0.0, v)],
        }
    }

    /// Linear ramp from `v0` at `t0` to `v1` at `t1`.
    pub fn ramp(t0: f64, v0: f64, t1: f64, v1: f64) -> Self {
        Self {
            knots: vec![(t0, v0), (t1, v1)],
        }
    }

    /// Jump from `v0` to `v1` at time `t`.
    pub fn step(t: f64, v0: f64, v1: f64) -> Self {
        Self {
            knots: vec![(0.0, v0), (t, v0), (t, v1)],
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t < k[0].0 {
            return k[0].1;
        }
        // Last knot at or before t; equal times resolve to the later value.
        let i = k.partition_point(|&(tk, _)| tk <= t);
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let (t0, v0) = k[i - 1];
        let (t1, v1) = k[i];
        if t1 == t0 {
            v1
        } else {
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        }
    }

    pub fn max(&self) -> f64 {
        self.knots
            .iter()
            .map(|k| k.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.knots.iter().map(|k| k.1).fold(f64::INFINITY, f64::min)
    }

    fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::param("profile", "needs at least one knot"));
        }
        if self.knots.windows(2).any(|w| w[1].0 < w[0].0) {
            return Err(Error::param("profile", "knot times must be non-decreasing"));
        }
        Ok(())
    }
}

/// Harmonic interference `sum_k a_k(t) cos(k theta(t) + phi_k)` with
/// `theta` the running integral of the fundamental frequency profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSpec {
    pub f0: Profile,
    pub amplitudes: Vec<Profile>,
    pub phases: Vec<f64>,
}

impl InterferenceSpec {
    /// Stationary interference at `f0` with the given amplitudes.
    pub fn stationary(f0: f64, amplitudes: &[f64], phases: &[f64]) -> Self {
        Self {
            f0: Profile::constant(f0),
            amplitudes: amplitudes.iter().map(|&a| Profile::constant(a)).collect(),
            phases: phases.to_vec(),
        }
    }

    pub fn harmonics(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        self.f0.validate()?;
        if self.amplitudes.len() != self.phases.len() {
            return Err(Error::param("phases", "one phase per harmonic is required"));
        }
        if self.f0.min() <= 0.0 {
            return Err(Error::param("f0", "fundamental must stay positive"));
        }
        let m = self.amplitudes.len() as f64;
        if m * self.f0.max() >= fs / 2.0 {
            return Err(Error::param(
                "f0",
                format!(
                    "harmonic {} reaches {} Hz, at or above Nyquist ({} Hz)",
                    m,
                    m * self.f0.max(),
                    fs / 2.0
                ),
            ));
        }
        for a in &self.amplitudes {
            a.validate()?;
            if a.min() < 0.0 {
                return Err(Error::param(
                    "amplitudes",
                    "amplitudes must be non-negative",
                ));
            }
        }
        Ok(())
    }
}

/// Samples `spec` at rate `fs`. The phase accumulates the trapezoidal
/// integral of the frequency profile, so sweeps and steps are continuous.
pub fn gen_interference(spec: &InterferenceSpec, n: usize, fs: f64) -> Result<Vec<f64>> {
    spec.validate(fs)?;
    let mut theta = 0.0;
    let mut prev_f = spec.f0.at(0.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let f = spec.f0.at(t);
        if i > 0 {
            theta += PI * (prev_f + f) / fs;
        }
        prev_f = f;
        let v: f64 = spec
            .amplitudes
            .iter()
            .zip(&spec.phases)
            .enumerate()
            .map(|(k, (a, phi))| a.at(t) * ((k + 1) as f64 * theta + phi).cos())
            .sum();
        out.push(v);
    }
    Ok(out)
}

/// `carrier + g * interference` with `g` chosen so that
/// `10 log10(P_carrier / P_interference) = snr_db`.
pub fn mix_at_snr(carrier: &[f64], interference: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    let g = snr_gain(carrier, interference, snr_db)?;
    Ok(carrier
        .iter()
        .zip(interference)
        .map(|(c, p)| c + g * p)
        .collect())
}

/// Gain applied to `interference` by [`mix_at_snr`].
pub fn snr_gain(carrier: &[f64], interference: &[f64], snr_db: f64) -> Result<f64> {
    if carrier.len() != interference.len() {
        return Err(Error::param(
            "interference",
            format!(
                "length {} differs from carrier length {}",
                interference.len(),
                carrier.len()
            ),
        ));
    }
    let pc = mean_power(carrier);
    let pi = mean_power(interference);
    if pc == 0.0 {
        return Err(Error::param("carrier", "zero power"));
    }
    if pi == 0.0 {
        return Err(Error::param("interference", "zero power"));
    }
    Ok((pc / pi / 10f64.powf(snr_db / 10.0)).sqrt())
}

/// Carrier description for a synthetic run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    pub alpha: f64,
    pub seed: u64,
}

/// One synthetic experiment: carrier, interference, input SNR, length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub carrier: CarrierSpec,
    pub interference: InterferenceSpec,
    pub snr_in: f64,
    pub duration: f64,
    pub fs: f64,
    /// If set, `snr_in` holds over `[0, snr_reference)` seconds rather than
    /// the whole run (used for interference power steps).
    #[serde(default)]
    pub snr_reference: Option<f64>,
}

/// Realised signals of a [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub clean: Signal,
    /// Interference after SNR scaling, so `mixed = clean + interference`.
    pub interference: Signal,
    pub mixed: Signal,
    /// True fundamental frequency per sample.
    pub f0: Vec<f64>,
    /// True per-harmonic amplitude per sample (after SNR scaling).
    pub amplitudes: Vec<Vec<f64>>,
}

impl ScenarioConfig {
    pub fn samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn generate(&self) -> Result<Scenario> {
        if !(self.carrier.alpha > 1.0 && self.carrier.alpha < 3.0) {
            return Err(Error::param(
                "alpha",
                format!(
                    "carrier exponent must lie in (1, 3), got {}",
                    self.carrier.alpha
                ),
            ));
        }
        let n = self.samples();
        let clean = gen_pink_noise(n, self.carrier.alpha, self.carrier.seed)?;
        let raw = gen_interference(&self.interference, n, self.fs)?;
        let m = match self.snr_reference {
            Some(t) => ((t * self.fs).round() as usize).clamp(1, n),
            None => n,
        };
        let g = snr_gain(&clean[..m], &raw[..m], self.snr_in)?;
        let interference: Vec<f64> = raw.iter().map(|v| g * v).collect();
        let mixed = clean
            .iter()
            .zip(&interference)
            .map(|(c, p)| c + p)
            .collect();
        let times = (0..n).map(|i| i as f64 / self.fs);
        let f0 = times.clone().map(|t| self.interference.f0.at(t)).collect();
        let amplitudes = self
            .interference
            .amplitudes
            .iter()
            .map(|a| times.clone().map(|t| g * a.at(t)).collect())
            .collect();
        Ok(Scenario {
            clean: Signal::new(clean, self.fs),
            interference: Signal::new(interference, self.fs),
            mixed: Signal::new(mixed, self.fs),
            f0,
            amplitudes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psd::welch_psd;

    #[test]
    fn pink_noise_is_reproducible_and_normalised() {
        let a = gen_pink_noise(10_000, 2.0, 5).unwrap();
        let b = gen_pink_noise(10_000, 2.0, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_pink_noise(10_000, 2.0, 6).unwrap());
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-10);
        assert!((mean_power(&a) - 1.0).abs() < 1e-9);
        assert!(gen_pink_noise(100, 0.5, 1).is_err());
        assert!(gen_pink_noise(100, 3.5, 1).is_err());
        assert!(gen_pink_noise(1, 2.0, 1).is_err());
    }

    fn fitted_slope(x: &[f64], fs: f64) -> f64 {
        let psd = welch_psd(x, fs, 8192, 0.5).unwrap();
        let pts: Vec<(f64, f64)> = psd
            .freqs
            .iter()
            .zip(&psd.power)
            .filter(|(f, _)| **f >= 1.0 && **f <= fs / 4.0)
            .map(|(f, p)| (f.log10(), p.log10()))
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn pink_noise_slope() {
        let x = gen_pink_noise(1 << 20, 2.0, 42).unwrap();
        let s = fitted_slope(&x, 1000.0);
        assert!((s + 2.0).abs() < 0.3, "{s}");
        let x = gen_pink_noise(1 << 18, 1.0, 43).unwrap();
        let s = fitted_slope(&x, 1000.0);
        assert!((s + 1.0).abs() < 0.3, "{s}");
    }

    #[test]
    fn stationary_interference() {
        let spec = InterferenceSpec::stationary(60.0, &[1.0], &[0.0]);
        let x = gen_interference(&spec, 4096, 1000.0).unwrap();
        assert_eq!(x[0], 1.0);
        // FFT peak within one bin of 60 Hz.
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(4096).process(&mut buf);
        let peak = (0..2048)
            .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
            .unwrap();
        let bin_hz = 1000.0 / 4096.0;
        assert!((peak as f64 * bin_hz - 60.0).abs() <= bin_hz);
    }

    #[test]
    fn sweep_instantaneous_frequency_tracks_profile() {
        let fs = 1000.0;
        let spec = InterferenceSpec {
            f0: Profile::ramp(0.0, 59.0, 60.0, 61.0),
            amplitudes: vec![Profile::constant(1.0)],
            phases: vec![0.0],
        };
        let n = 60_000;
        let x = gen_interference(&spec, n, fs).unwrap();
        // Analytic signal phase via a quadrature partner generated from the
        // same recursion would reuse the implementation; instead recover the
        // phase from the real signal with acos on the known unit envelope,
        // unwrapped using the sign of the derivative.
        let mut max_err: f64 = 0.0;
        for i in (1000..n - 1000).step_by(997) {
            // Local frequency from zero crossings in a 200 ms window.
            let w = &x[i - 100..i + 100];
            let crossings: Vec<f64> = w
                .windows(2)
                .enumerate()
                .filter(|(_, p)| p[0] < 0.0 && p[1] >= 0.0)
                .map(|(j, p)| j as f64 + p[0] / (p[0] - p[1]))
                .collect();
            let f_est =
                fs * (crossings.len() - 1) as f64 / (crossings[crossings.len() - 1] - crossings[0]);
            max_err = max_err.max((f_est - spec.f0.at(i as f64 / fs)).abs());
        }
        assert!(max_err < 0.05, "{max_err}");
        // Phase continuity: no sample-to-sample phase jump beyond pi.
        assert!(x.windows(2).all(|p| (p[1] - p[0]).abs() < 2.0));
    }

    #[test]
    fn interference_rejects_nyquist() {
        let spec = InterferenceSpec::stationary(200.0, &[1.0, 1.0, 1.0], &[0.0; 3]);
        assert!(gen_interference(&spec, 10, 1000.0).is_err());
        let spec = InterferenceSpec::stationary(60.0, &[1.0, -1.0], &[0.0; 2]);
        assert!(gen_interference(&spec, 10, 1000.0).is_err());
    }

    #[test]
    fn mixing_hits_requested_snr() {
        let c = gen_pink_noise(5000, 2.0, 1).unwrap();
        let spec = InterferenceSpec::stationary(60.0, &[1.0, 0.5], &[0.1, 0.2]);
        let p = gen_interference(&spec, 5000, 1000.0).unwrap();
        for snr in [-20.0, 0.0, 20.0] {
            let x = mix_at_snr(&c, &p, snr).unwrap();
            let added: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
            let measured = 10.0 * (mean_power(&c) / mean_power(&added)).log10();
            assert!((measured - snr).abs() < 1e-6, "{measured}");
        }
        let x = mix_at_snr(&c, &p, 20.0).unwrap();
        let added: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        assert!((mean_power(&c) / mean_power(&added) / 100.0 - 1.0).abs() < 1e-9);
        assert!(mix_at_snr(&c, &vec![0.0; 5000], 0.0).is_err());
        assert!(mix_at_snr(&vec![0.0; 5000], &p, 0.0).is_err());
        assert!(mix_at_snr(&c[..10], &p, 0.0).is_err());
    }

    #[test]
    fn profile_shapes() {
        let s = Profile::step(10.0, 50.0, 60.0);
        assert_eq!(s.at(0.0), 50.0);
        assert_eq!(s.at(9.999), 50.0);
        assert_eq!(s.at(10.0), 60.0);
        assert_eq!(s.at(100.0), 60.0);
        let r = Profile::ramp(0.0, 59.0, 60.0, 61.0);
        assert!((r.at(30.0) - 60.0).abs() < 1e-12);
        assert_eq!(r.at(-1.0), 59.0);
        assert_eq!(r.at(61.0), 61.0);
    }

    #[test]
    fn scenario_is_clean_plus_interference() {
        let cfg = ScenarioConfig {
            carrier: CarrierSpec {
                alpha: 2.0,
                seed: 9,
            },
            interference: InterferenceSpec::stationary(61.0, &[1.0, 0.5, 0.25], &[0.0, 1.0, 2.0]),
            snr_in: -10.0,
            duration: 2.0,
            fs: 1000.0,
            snr_reference: None,
        };
        let s = cfg.generate().unwrap();
        assert_eq!(s.mixed.len(), 2000);
        for i in 0..2000 {
            assert_eq!(
                s.mixed.samples[i],
                s.clean.samples[i] + s.interference.samples[i]
            );
        }
        let snr = 10.0 * (s.clean.power() / s.interference.power()).log10();
        assert!((snr + 10.0).abs() < 1e-9);
    }

    #[test]
    fn snr_reference_window() {
        let cfg = ScenarioConfig {
            carrier: CarrierSpec {
                alpha: 2.0,
                seed: 9,
            },
            interference: InterferenceSpec {
                f0: Profile::constant(59.0),
                amplitudes: vec![Profile::step(1.0, 1.0, 10f64.sqrt())],
                phases: vec![0.0],
            },
            snr_in: 0.0,
            duration: 2.0,
            fs: 1000.0,
            snr_reference: Some(1.0),
        };
        let s = cfg.generate().unwrap();
        let db = |a: &[f64], b: &[f64]| 10.0 * (mean_power(a) / mean_power(b)).log10();
        assert!(db(&s.clean.samples[..1000], &s.interference.samples[..1000]).abs() < 1e-9);
        let step = db(
            &s.interference.samples[1000..],
            &s.interference.samples[..1000],
        );
        assert!((step - 10.0).abs() < 0.1, "{step}");
    }
}
