//! The streaming canceller: bandpass and first difference feed the
//! frequency estimator, whose output drives the harmonic oscillators; each
//! harmonic's estimator subtracts its estimate from the running error, and
//! the final error is the cleaned sample.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dsp::{design_bandpass, DcBlocker, FilterCoefficients, FilterState};
use crate::freq::{freq_hz, kappa_from_second_harmonic, AnfState};
use crate::oscillator::HarmonicBank;
use crate::params::{map_params, ActualParams, AltParams};
use crate::rls::{AmplitudeEstimator, RlsState};
use crate::{Error, Result, Signal};

/// Largest harmonic count that keeps every harmonic below Nyquist,
/// `min(m_requested, floor(pi / acos(kappa_f)))`. With `kappa_f = 1` no
/// bound can be derived and `m_requested` is returned.
pub fn clamp_harmonic_count(kappa_f: f64, m_requested: usize) -> usize {
    let omega = kappa_f.clamp(-1.0, 1.0).acos();
    if omega <= 0.0 {
        return m_requested;
    }
    let max = (PI / omega).floor() as usize;
    m_requested.min(max.max(1))
}

/// Per-sample traces captured by [`process_stream`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub freq_hz: Vec<f64>,
    /// `harmonic_amps[k][n]`: instantaneous amplitude estimate of harmonic
    /// `k + 1` at sample `n`.
    pub harmonic_amps: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl Diagnostics {
    fn with_harmonics(m: usize, capacity: usize) -> Self {
        Self {
            freq_hz: Vec::with_capacity(capacity),
            harmonic_amps: (0..m).map(|_| Vec::with_capacity(capacity)).collect(),
            residual: Vec::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residual.is_empty()
    }
}

/// Per-channel canceller state.
#[derive(Debug, Clone)]
pub struct Canceller<E = RlsState> {
    params: AltParams,
    actual: ActualParams,
    bandpass: FilterCoefficients,
    filter: FilterState,
    dc: Option<DcBlocker>,
    anf: AnfState,
    bank: HarmonicBank,
    estimators: Vec<E>,
    harmonics: Vec<f64>,
    kappa_f: f64,
    active: usize,
    samples: u64,
    warned_dc_kappa: bool,
}

impl Canceller<RlsState> {
    pub fn new(params: &AltParams) -> Result<Self> {
        Self::with_estimator(params)
    }
}

impl<E: AmplitudeEstimator> Canceller<E> {
    /// Builds a canceller using estimator type `E` for every harmonic.
    pub fn with_estimator(params: &AltParams) -> Result<Self> {
        let actual = map_params(params)?;
        for w in params.warnings() {
            log::warn!("{w}");
        }
        let (lo, hi) = params.band();
        let bandpass = design_bandpass(params.fs, lo, hi)?;
        let m = params.m_prime;
        Ok(Self {
            params: params.clone(),
            actual,
            filter: FilterState::new(&bandpass),
            bandpass,
            dc: params.dc_block.then(DcBlocker::default),
            anf: AnfState::new(&actual),
            bank: HarmonicBank::new(m),
            estimators: vec![E::new(actual.lambda_a); m],
            harmonics: vec![0.0; m],
            kappa_f: 0.0,
            active: m,
            samples: 0,
            warned_dc_kappa: false,
        })
    }

    /// Processes one input sample and returns the cleaned sample.
    ///
    /// Non-finite input is rejected and leaves the state untouched.
    pub fn process_sample(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                index: self.samples,
                value: x,
            });
        }
        let x = match self.dc.as_mut() {
            Some(dc) => dc.dc_block(x),
            None => x,
        };

        let x_f = self.filter.filter_sample(&self.bandpass, x);
        let x_d = self.filter.differentiate(x_f);
        let kappa = self.anf.step(x_d);
        self.kappa_f = if self.params.second_harmonic_mode {
            kappa_from_second_harmonic(kappa)
        } else {
            kappa
        };

        let m = self.params.m_prime;
        self.active = clamp_harmonic_count(self.kappa_f, m);
        if self.kappa_f >= 1.0 && !self.warned_dc_kappa {
            log::warn!("fundamental estimate at DC; harmonic count not clamped");
            self.warned_dc_kappa = true;
        }
        self.bank.set_fundamental(self.kappa_f);

        let mut e = x;
        for k in 0..self.active {
            let (u, u_prime) = self.bank.oscillators[k].step(self.bank.kappas[k]);
            let (h, e_next) = self.estimators[k].step(u, u_prime, e);
            self.harmonics[k] = h;
            e = e_next;
        }
        self.harmonics[self.active..]
            .iter_mut()
            .for_each(|h| *h = 0.0);
        self.samples += 1;
        Ok(e)
    }

    /// Harmonic estimates `h_k` subtracted from the latest sample, in
    /// subtraction order. Dropped harmonics read zero.
    pub fn harmonic_estimates(&self) -> &[f64] {
        &self.harmonics
    }

    pub fn kappa_f(&self) -> f64 {
        self.kappa_f
    }

    pub fn freq_hz(&self) -> f64 {
        freq_hz(self.kappa_f, self.params.fs)
    }

    pub fn active_harmonics(&self) -> usize {
        self.active
    }

    pub fn samples_processed(&self) -> u64 {
        self.samples
    }

    pub fn actual_params(&self) -> &ActualParams {
        &self.actual
    }

    pub fn params(&self) -> &AltParams {
        &self.params
    }

    pub fn anf(&self) -> &AnfState {
        &self.anf
    }

    pub fn estimators(&self) -> &[E] {
        &self.estimators
    }

    pub fn bank(&self) -> &HarmonicBank {
        &self.bank
    }

    /// Instantaneous amplitude estimate of harmonic `k + 1`:
    /// `sqrt((b v)^2 + (c v')^2)` with `(v, v')` the oscillator amplitudes.
    pub fn harmonic_amplitude(&self, k: usize) -> f64 {
        if k >= self.active {
            return 0.0;
        }
        let (b, c) = self.estimators[k].coefficients();
        let (v, v_prime) = self.bank.oscillators[k].amplitudes(self.bank.kappas[k]);
        ((b * v).powi(2) + (c * v_prime).powi(2)).sqrt()
    }

    fn capture(&self, diag: &mut Diagnostics, residual: f64) {
        diag.freq_hz.push(self.freq_hz());
        for (k, trace) in diag.harmonic_amps.iter_mut().enumerate() {
            trace.push(self.harmonic_amplitude(k));
        }
        diag.residual.push(residual);
    }
}

/// Runs a fresh canceller over `samples`, optionally capturing diagnostics.
pub fn process_stream(
    params: &AltParams,
    samples: &Signal,
    capture: bool,
) -> Result<(Signal, Diagnostics)> {
    process_stream_with::<RlsState>(params, samples, capture)
}

/// [`process_stream`] with an explicit amplitude estimator type.
pub fn process_stream_with<E: AmplitudeEstimator>(
    params: &AltParams,
    samples: &Signal,
    capture: bool,
) -> Result<(Signal, Diagnostics)> {
    if samples.fs != params.fs {
        return Err(Error::RateMismatch {
            signal: samples.fs,
            params: params.fs,
        });
    }
    let mut c = Canceller::<E>::with_estimator(params)?;
    let mut diag = if capture {
        Diagnostics::with_harmonics(params.m_prime, samples.len())
    } else {
        Diagnostics::default()
    };
    let mut out = Vec::with_capacity(samples.len());
    for &x in &samples.samples {
        let y = c.process_sample(x)?;
        if capture {
            c.capture(&mut diag, y);
        }
        out.push(y);
    }
    Ok((Signal::new(out, params.fs), diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_count_examples() {
        let k60 = (2.0 * PI * 60.0 / 1000.0).cos();
        assert_eq!(clamp_harmonic_count(k60, 10), 8);
        let k250 = (2.0 * PI * 60.0 / 250.0).cos();
        assert_eq!(clamp_harmonic_count(k250, 3), 2);
        for k in [-1.0, -0.3, 0.0, 0.5, 0.99] {
            assert_eq!(clamp_harmonic_count(k, 1), 1);
        }
        assert_eq!(clamp_harmonic_count(1.0, 7), 7);
    }

    #[test]
    fn rejects_non_finite_without_touching_state() {
        let mut c = Canceller::new(&AltParams::default()).unwrap();
        for n in 0..100 {
            c.process_sample((n as f64 * 0.3).sin()).unwrap();
        }
        let before = format!("{:?}", c);
        assert!(matches!(
            c.process_sample(f64::NAN),
            Err(Error::NonFinite { index: 100, .. })
        ));
        assert!(c.process_sample(f64::INFINITY).is_err());
        assert_eq!(before, format!("{:?}", c));
    }

    #[test]
    fn output_is_input_minus_harmonics_in_order() {
        let mut c = Canceller::new(&AltParams::default()).unwrap();
        for n in 0..5000 {
            let x = (2.0 * PI * 60.0 * n as f64 / 1000.0).cos() + 0.01 * (n as f64).sin();
            let s = c.process_sample(x).unwrap();
            let replay = c.harmonic_estimates().iter().fold(x, |e, h| e - h);
            assert_eq!(s.to_bits(), replay.to_bits());
            let sum: f64 = c.harmonic_estimates().iter().sum();
            assert!((s + sum - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(sum.abs()).max(1.0));
        }
    }

    #[test]
    fn empty_and_rate_mismatch() {
        let p = AltParams::default();
        let (out, diag) = process_stream(&p, &Signal::new(vec![], p.fs), true).unwrap();
        assert!(out.is_empty());
        assert!(diag.is_empty());
        assert!(diag.harmonic_amps.iter().all(Vec::is_empty));
        assert!(matches!(
            process_stream(&p, &Signal::new(vec![0.0], 500.0), false),
            Err(Error::RateMismatch { .. })
        ));
    }

    #[test]
    fn capture_does_not_change_output() {
        let p = AltParams::default();
        let x: Vec<f64> = (0..4000)
            .map(|n| (0.37 * n as f64).cos() + (0.011 * n as f64).sin())
            .collect();
        let s = Signal::new(x, p.fs);
        let (a, da) = process_stream(&p, &s, true).unwrap();
        let (b, db) = process_stream(&p, &s, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(da.len(), 4000);
        assert_eq!(da.harmonic_amps.len(), 3);
        assert!(db.is_empty() && db.harmonic_amps.is_empty());
    }

    #[test]
    fn streaming_is_causal() {
        let p = AltParams::default();
        let x: Vec<f64> = (0..3000)
            .map(|n| (0.4 * n as f64).cos() + 0.3 * (0.05 * n as f64).sin())
            .collect();
        let (full, _) = process_stream(&p, &Signal::new(x.clone(), p.fs), false).unwrap();
        for cut in [1, 17, 1000, 2999] {
            let (pre, _) =
                process_stream(&p, &Signal::new(x[..cut].to_vec(), p.fs), false).unwrap();
            assert_eq!(pre.samples[..], full.samples[..cut]);
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let p = AltParams::default();
        let (out, _) = process_stream(&p, &Signal::new(vec![0.0; 5000], p.fs), false).unwrap();
        assert!(out.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_block_and_second_harmonic_modes_run() {
        let p = AltParams {
            dc_block: true,
            second_harmonic_mode: true,
            ..AltParams::default()
        };
        let mut c = Canceller::new(&p).unwrap();
        let mut last = 0.0;
        for n in 0..20_000 {
            let t = n as f64 / p.fs;
            let x = 0.5 + (2.0 * PI * 120.0 * t).cos() + 0.5 * (2.0 * PI * 180.0 * t).cos();
            last = c.process_sample(x).unwrap();
        }
        assert!(last.is_finite());
        assert!((c.freq_hz() - 60.0).abs() < 0.5, "{}", c.freq_hz());
    }
}
