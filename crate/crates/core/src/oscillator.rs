//! Harmonic synthesis: Chebyshev recurrence for the per-harmonic frequency
//! controls and gain-controlled digital waveguide oscillators.

use crate::{Error, Result};

/// Within this distance of `kappa = -1` the gain-control quadratic form is
/// undefined, and within it of `kappa = 1` it no longer sees `u'`; in both
/// cases the sample is left unscaled.
const KAPPA_GUARD: f64 = 1e-12;

/// `[kappa_1, ..., kappa_m]` with `kappa_k = cos(k * acos(kappa_1))`, built
/// by `kappa_k = 2 kappa_1 kappa_{k-1} - kappa_{k-2}`, `kappa_0 = 1`.
pub fn harmonic_kappas(kappa_1: f64, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(m);
    fill_harmonic_kappas(kappa_1, &mut out, m);
    out
}

/// Allocation-free form of [`harmonic_kappas`] writing into `out`.
pub fn fill_harmonic_kappas(kappa_1: f64, out: &mut Vec<f64>, m: usize) {
    out.clear();
    let (mut prev, mut cur) = (1.0, kappa_1);
    for _ in 0..m {
        out.push(cur.clamp(-1.0, 1.0));
        let next = 2.0 * kappa_1 * cur - prev;
        prev = cur;
        cur = next;
    }
}

/// State of one waveguide oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscState {
    pub u: f64,
    pub u_prime: f64,
}

impl Default for OscState {
    fn default() -> Self {
        Self {
            u: 0.0,
            u_prime: 1.0,
        }
    }
}

impl OscState {
    /// Rotates the state by `acos(kappa)` and applies the gain control that
    /// drives `u^2 - (kappa-1)/(kappa+1) u'^2` toward 0.5.
    pub fn step(&mut self, kappa: f64) -> (f64, f64) {
        let s1 = kappa * (self.u + self.u_prime);
        let s2 = self.u;
        self.u = s1 - self.u_prime;
        self.u_prime = s1 + s2;
        if (kappa + 1.0).abs() >= KAPPA_GUARD && (1.0 - kappa).abs() >= KAPPA_GUARD {
            let mut g = 1.5 - self.invariant(kappa);
            if g < 0.0 {
                g = 1.0;
            }
            self.u *= g;
            self.u_prime *= g;
        }
        (self.u, self.u_prime)
    }

    /// The quadratic form the gain control regulates; equals the squared
    /// amplitude of `u` for a pure rotation.
    pub fn invariant(&self, kappa: f64) -> f64 {
        self.u * self.u - (kappa - 1.0) / (kappa + 1.0) * self.u_prime * self.u_prime
    }

    /// Instantaneous amplitudes `(v, v')` of `u` and `u'` at frequency
    /// control `kappa`.
    pub fn amplitudes(&self, kappa: f64) -> (f64, f64) {
        let v_sq = self.invariant(kappa).max(0.0);
        let ratio_sq = (1.0 + kappa) / (1.0 - kappa);
        (v_sq.sqrt(), (v_sq * ratio_sq).sqrt())
    }
}

/// Amplitude ratio `v / v' = sqrt((1 + kappa) / (1 - kappa))` of the
/// oscillator's two outputs (orientation per the correlation-bound
/// analysis; see [`crate::rls::correlation_ratio`]).
pub fn osc_amplitudes(kappa: f64) -> Result<f64> {
    if !(kappa > -1.0 && kappa < 1.0) {
        return Err(Error::param(
            "kappa",
            format!("must lie in (-1, 1), got {kappa}"),
        ));
    }
    Ok(((1.0 + kappa) / (1.0 - kappa)).sqrt())
}

/// Frequency controls and oscillators for harmonics `1..=M'`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBank {
    pub kappas: Vec<f64>,
    pub oscillators: Vec<OscState>,
}

impl HarmonicBank {
    pub fn new(m: usize) -> Self {
        Self {
            kappas: vec![0.0; m],
            oscillators: vec![OscState::default(); m],
        }
    }

    pub fn len(&self) -> usize {
        self.oscillators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oscillators.is_empty()
    }

    /// Recomputes the per-harmonic controls from the fundamental.
    pub fn set_fundamental(&mut self, kappa_f: f64) {
        let m = self.oscillators.len();
        fill_harmonic_kappas(kappa_f, &mut self.kappas, m);
    }
}
