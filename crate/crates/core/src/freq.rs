//! Lattice adaptive-notch frequency estimator.
//!
//! Only the all-pole half of the lattice notch is run; its output `f(n)`
//! drives the exponentially weighted estimate `kappa_t = c / d` of
//! `cos(omega)`. The notch pole radius `alpha_f` and forgetting factor
//! `lambda_f` start wide/short and relax toward their asymptotes on their
//! own first-order schedules.

use std::f64::consts::PI;

use crate::ActualParams;

/// Initial value of the `c` and `d` accumulators.
pub const EPSILON: f64 = 1e-6;

/// Below this `d` the ratio `c / d` is not formed; the previous `kappa_t`
/// is held instead.
pub const D_FLOOR: f64 = 1e-30;

/// First-order schedule `v <- rate * v + (1 - rate) * asymptote`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub init: f64,
    pub asymptote: f64,
    pub rate: f64,
}

impl Schedule {
    pub fn step(&self, v: f64) -> f64 {
        self.rate * v + (1.0 - self.rate) * self.asymptote
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnfState {
    /// `f(n-1)`, `f(n-2)`.
    pub f_hist: [f64; 2],
    pub c: f64,
    pub d: f64,
    pub kappa_t: f64,
    pub kappa_f: f64,
    pub alpha_f: f64,
    pub lambda_f: f64,
    pub gamma: f64,
    alpha: Schedule,
    lambda: Schedule,
}

impl AnfState {
    pub fn new(p: &ActualParams) -> Self {
        Self {
            f_hist: [0.0; 2],
            c: EPSILON,
            d: EPSILON,
            kappa_t: 0.0,
            kappa_f: 0.0,
            alpha_f: p.alpha_0,
            lambda_f: p.lambda_0,
            gamma: p.gamma,
            alpha: Schedule {
                init: p.alpha_0,
                asymptote: p.alpha_inf,
                rate: p.alpha_st,
            },
            lambda: Schedule {
                init: p.lambda_0,
                asymptote: p.lambda_inf,
                rate: p.lambda_st,
            },
        }
    }

    /// Advances the estimator by one sample of the preprocessed input and
    /// returns the smoothed `kappa_f`.
    pub fn step(&mut self, x_d: f64) -> f64 {
        let [f1, f2] = self.f_hist;
        let f0 = x_d + self.kappa_f * (1.0 + self.alpha_f) * f1 - self.alpha_f * f2;
        self.c = self.lambda_f * self.c + f1 * (f0 + f2);
        self.d = self.lambda_f * self.d + 2.0 * f1 * f1;
        if self.d >= D_FLOOR {
            self.kappa_t = (self.c / self.d).clamp(-1.0, 1.0);
        }
        self.kappa_f = self.gamma * self.kappa_f + (1.0 - self.gamma) * self.kappa_t;
        self.alpha_f = self.alpha.step(self.alpha_f);
        self.lambda_f = self.lambda.step(self.lambda_f);
        self.f_hist = [f0, f1];
        self.kappa_f
    }

    pub fn omega(&self) -> f64 {
        self.kappa_f.acos()
    }
}

/// Frequency in Hz for `kappa = cos(omega)`.
pub fn freq_hz(kappa_f: f64, fs: f64) -> f64 {
    fs * kappa_f.clamp(-1.0, 1.0).acos() / (2.0 * PI)
}

/// Fundamental `cos(omega)` from a second-harmonic estimate
/// `cos(2 omega)` via the half-angle identity.
pub fn kappa_from_second_harmonic(kappa_2: f64) -> f64 {
    ((kappa_2.clamp(-1.0, 1.0) + 1.0) / 2.0).sqrt()
}
