//! Per-harmonic amplitude/phase estimation.
//!
//! Each harmonic is an adaptive linear combiner `h = b u + c u'` over the
//! oscillator's two outputs. [`RlsState`] runs RLS with the 2x2 input
//! correlation matrix approximated as diagonal; [`FullRlsState`] keeps the
//! full matrix and exists to check that approximation.
//! [`correlation_ratio`] evaluates the closed-form bound on the neglected
//! off-diagonal term.

use std::f64::consts::PI;

use serde::Serialize;

use crate::params::forgetting_factor;
use crate::{Error, Result};

/// Denominators below this skip the coefficient update for that sample.
pub const DIV_FLOOR: f64 = 1e-30;

/// Initial diagonal of the full-RLS correlation matrix.
pub const FULL_RLS_EPSILON: f64 = 1e-6;

/// One harmonic's amplitude/phase estimator.
///
/// `step` forms `h` from the coefficients before the update, subtracts it
/// from the cascaded error and adapts on the result.
pub trait AmplitudeEstimator: Clone + Send {
    fn new(lambda_a: f64) -> Self;
    fn step(&mut self, u: f64, u_prime: f64, e_in: f64) -> (f64, f64);
    /// Current `(b, c)` coefficients.
    fn coefficients(&self) -> (f64, f64);
}

/// Diagonal-approximation RLS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RlsState {
    pub r1: f64,
    pub r4: f64,
    pub b_hat: f64,
    pub c_hat: f64,
    pub lambda_a: f64,
}

impl AmplitudeEstimator for RlsState {
    fn new(lambda_a: f64) -> Self {
        Self {
            r1: 0.0,
            r4: 0.0,
            b_hat: 0.0,
            c_hat: 0.0,
            lambda_a,
        }
    }

    fn step(&mut self, u: f64, u_prime: f64, e_in: f64) -> (f64, f64) {
        let h = self.b_hat * u + self.c_hat * u_prime;
        let e = e_in - h;
        self.r1 = self.lambda_a * self.r1 + u * u;
        self.r4 = self.lambda_a * self.r4 + u_prime * u_prime;
        if self.r1 >= DIV_FLOOR {
            self.b_hat += u * e / self.r1;
        }
        if self.r4 >= DIV_FLOOR {
            self.c_hat += u_prime * e / self.r4;
        }
        (h, e)
    }

    fn coefficients(&self) -> (f64, f64) {
        (self.b_hat, self.c_hat)
    }
}

/// Exact exponentially weighted RLS with the full 2x2 correlation matrix,
/// inverted directly each sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FullRlsState {
    /// Row-major `[r1, r2, r3, r4]`.
    pub r: [f64; 4],
    pub w: [f64; 2],
    pub lambda_a: f64,
}

impl AmplitudeEstimator for FullRlsState {
    fn new(lambda_a: f64) -> Self {
        Self {
            r: [FULL_RLS_EPSILON, 0.0, 0.0, FULL_RLS_EPSILON],
            w: [0.0; 2],
            lambda_a,
        }
    }

    fn step(&mut self, u: f64, u_prime: f64, e_in: f64) -> (f64, f64) {
        let h = self.w[0] * u + self.w[1] * u_prime;
        let e = e_in - h;
        let l = self.lambda_a;
        let r = &mut self.r;
        r[0] = l * r[0] + u * u;
        r[1] = l * r[1] + u * u_prime;
        r[2] = l * r[2] + u_prime * u;
        r[3] = l * r[3] + u_prime * u_prime;
        let det = r[0] * r[3] - r[1] * r[2];
        if det.abs() >= DIV_FLOOR {
            // R^-1 U = [r4 u - r2 u', -r3 u + r1 u'] / det
            self.w[0] += (r[3] * u - r[1] * u_prime) / det * e;
            self.w[1] += (r[0] * u_prime - r[2] * u) / det * e;
        }
        (h, e)
    }

    fn coefficients(&self) -> (f64, f64) {
        (self.w[0], self.w[1])
    }
}

/// Bound on the ratio of the neglected off-diagonal correlation term to
/// the diagonal one for harmonic `k`, after `n` samples:
/// `A(lambda_a, k omega_f, n) * max(v/v', v'/v)`.
pub fn correlation_ratio(w: f64, fs: f64, omega_f: f64, k: usize, n: u64) -> Result<f64> {
    let theta = k as f64 * omega_f;
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::param(
            "omega_f",
            format!("k * omega_f = {theta} must lie in (0, pi)"),
        ));
    }
    let lam = forgetting_factor(w, fs);
    let np1 = (n + 1) as f64;
    let lam_n = lam.powf(np1);
    let two_theta = 2.0 * theta;
    let num = 1.0 + lam_n * lam_n - 2.0 * lam_n * (two_theta * np1).cos();
    let den = 1.0 + lam * lam - 2.0 * lam * two_theta.cos();
    let weight_sum = (lam_n - 1.0) / (lam - 1.0);
    let a = (2.0 * num / den).sqrt() / weight_sum;
    let kappa = theta.cos();
    let ratio = ((1.0 + kappa) / (1.0 - kappa)).sqrt();
    Ok(a * ratio.max(1.0 / ratio))
}

/// Grid for [`bound_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundGrid {
    pub fs: Vec<f64>,
    pub w: Vec<f64>,
    /// Interference fundamentals (Hz).
    pub f0: Vec<f64>,
}

impl Default for BoundGrid {
    fn default() -> Self {
        Self {
            fs: vec![100.0, 250.0, 1000.0, 5000.0, 40000.0],
            w: (1..=10).map(|i| 0.5 * i as f64).collect(),
            f0: vec![45.0, 50.0, 55.0, 60.0, 65.0],
        }
    }
}

/// Worst case of the bound at one sampling rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub fs: f64,
    /// `NaN` when no `(f0, k)` pair lies below Nyquist.
    pub max_c: f64,
    pub argmax_w: f64,
    pub argmax_f0: f64,
    pub argmax_k: usize,
    pub points: usize,
}

/// Evaluates [`correlation_ratio`] with `n = 10 fs` for every `W`, every
/// fundamental and every harmonic `k` with `k omega_f < pi`.
pub fn bound_sweep(grid: &BoundGrid) -> Vec<BoundRow> {
    grid.fs
        .iter()
        .map(|&fs| {
            let mut row = BoundRow {
                fs,
                max_c: f64::NAN,
                argmax_w: f64::NAN,
                argmax_f0: f64::NAN,
                argmax_k: 0,
                points: 0,
            };
            let n = (10.0 * fs) as u64;
            for &w in &grid.w {
                for &f0 in &grid.f0 {
                    let omega = 2.0 * PI * f0 / fs;
                    let mut k = 1;
                    while (k as f64) * omega < PI {
                        let c = correlation_ratio(w, fs, omega, k, n)
                            .expect("k omega inside (0, pi) by construction");
                        row.points += 1;
                        if row.max_c.is_nan() || c > row.max_c {
                            row.max_c = c;
                            row.argmax_w = w;
                            row.argmax_f0 = f0;
                            row.argmax_k = k;
                        }
                        k += 1;
                    }
                }
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matched_run<E: AmplitudeEstimator>(
        seconds: f64,
        osc_hz: f64,
        sig_hz: f64,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        use crate::oscillator::OscState;
        let fs = 1000.0;
        let lam = forgetting_factor(1.0, fs);
        let kappa = (2.0 * PI * osc_hz / fs).cos();
        let mut osc = OscState::default();
        let mut est = E::new(lam);
        let n = (seconds * fs) as usize;
        let (mut input, mut hs, mut es) = (vec![], vec![], vec![]);
        for i in 0..n {
            let x = (2.0 * PI * sig_hz / fs * i as f64 + 0.4).sin();
            let (u, v) = osc.step(kappa);
            let (h, e) = est.step(u, v, x);
            input.push(x);
            hs.push(h);
            es.push(e);
        }
        (input, hs, es)
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn zero_input_never_moves() {
        let mut s = RlsState::new(0.99);
        let mut f = FullRlsState::new(0.99);
        for i in 0..1000 {
            let (u, v) = ((i as f64).sin(), (i as f64).cos());
            assert_eq!(s.step(u, v, 0.0), (0.0, 0.0));
            assert_eq!(f.step(u, v, 0.0), (0.0, 0.0));
        }
        assert_eq!(s.coefficients(), (0.0, 0.0));
        assert_eq!(f.coefficients(), (0.0, 0.0));
    }

    #[test]
    fn division_guard_on_zero_regressor() {
        let mut s = RlsState::new(0.99);
        let (h, e) = s.step(0.0, 0.0, 1.0);
        assert_eq!((h, e), (0.0, 1.0));
        assert_eq!(s.coefficients(), (0.0, 0.0));
        assert!(s.r1 >= 0.0 && s.r4 >= 0.0);
    }

    #[test]
    fn matched_sinusoid_is_cancelled() {
        let (_, _, e) = matched_run::<RlsState>(2.0, 60.0, 60.0);
        assert!(rms(&e[1000..]) < 0.01, "{}", rms(&e[1000..]));
        let (_, _, e) = matched_run::<FullRlsState>(2.0, 60.0, 60.0);
        assert!(rms(&e[1000..]) < 0.01, "{}", rms(&e[1000..]));
    }

    #[test]
    fn simplified_and_full_agree_on_matched_sinusoid() {
        let (x, hs, _) = matched_run::<RlsState>(4.0, 60.0, 60.0);
        let (_, hf, _) = matched_run::<FullRlsState>(4.0, 60.0, 60.0);
        let snr = |h: &[f64]| {
            let num: f64 = x[2000..].iter().map(|v| v * v).sum();
            let den: f64 = x[2000..]
                .iter()
                .zip(&h[2000..])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            10.0 * (num / den).log10()
        };
        // Both fits are essentially exact; compare the residual levels.
        let (a, b) = (snr(&hs), snr(&hf));
        assert!(a > 40.0 && b > 40.0, "{a} {b}");
    }

    #[test]
    fn mismatched_harmonic_is_rejected() {
        let (x, h, _) = matched_run::<RlsState>(2.0, 120.0, 60.0);
        assert!(rms(&h[1000..]) < 0.05 * rms(&x[1000..]));
    }

    #[test]
    fn r1_converges_to_geometric_limit() {
        let fs = 1000.0;
        let lam = forgetting_factor(1.0, fs);
        let mut s = RlsState::new(lam);
        for _ in 0..1001 {
            s.step(1.0, 1.0, 0.3);
            assert!(s.r1 >= 0.0 && s.r4 >= 0.0);
        }
        let limit = 1.0 / (1.0 - lam);
        assert!((s.r1 - limit).abs() / limit < 0.05 + 1e-9);
        for _ in 0..1000 {
            s.step(1.0, 1.0, 0.3);
        }
        assert!((s.r1 - limit).abs() / limit < 0.01);
    }

    #[test]
    fn coefficients_freeze_when_error_vanishes() {
        use crate::oscillator::OscState;
        let kappa = (2.0 * PI * 0.06f64).cos();
        let mut o = OscState::default();
        let mut s = RlsState::new(0.995);
        for i in 0..3000 {
            let (u, v) = o.step(kappa);
            s.step(u, v, (0.377 * i as f64).cos());
        }
        // Feed the estimator its own output: residual is exactly zero.
        let frozen = s.coefficients();
        for _ in 0..1000 {
            let (u, v) = o.step(kappa);
            let h = frozen.0 * u + frozen.1 * v;
            let (_, e) = s.step(u, v, h);
            assert_eq!(e, 0.0);
        }
        assert_eq!(s.coefficients(), frozen);
    }

    #[test]
    fn full_rls_matrix_stays_symmetric_positive() {
        let mut f = FullRlsState::new(0.99);
        for i in 0..5000 {
            let t = i as f64 * 0.3;
            f.step(t.sin(), 2.0 * t.cos(), 0.1 * t.sin());
            assert_eq!(f.r[1], f.r[2]);
            assert!(f.r[0] > 0.0 && f.r[0] * f.r[3] - f.r[1] * f.r[2] > 0.0);
        }
    }

    #[test]
    fn bound_rejects_out_of_range_angle() {
        assert!(correlation_ratio(1.0, 1000.0, 0.0, 1, 10_000).is_err());
        assert!(correlation_ratio(1.0, 1000.0, PI / 2.0, 2, 10_000).is_err());
    }

    // Oracle: the ratio sum |sum l^(n-i) sin(x_i) cos(x_i)| / sum l^(n-i) sin^2(x_i)
    // evaluated by brute force stays below the closed form (it drops
    // the Im{} and the cos^2 term, so it can only over-estimate).
    #[test]
    fn closed_form_bounds_brute_force_sums() {
        for (w, fs, f0, k) in [
            (1.0, 1000.0, 60.0, 1),
            (0.5, 250.0, 50.0, 2),
            (2.0, 1000.0, 55.0, 3),
        ] {
            let lam = forgetting_factor(w, fs);
            let omega = 2.0 * PI * f0 / fs;
            let n = (10.0 * fs) as u64;
            let theta = k as f64 * omega;
            let (mut cross, mut total) = (0.0, 0.0);
            for i in 0..=n {
                let wgt = lam.powf((n - i) as f64);
                cross += wgt * (theta * i as f64).sin() * (theta * i as f64).cos();
                total += wgt;
            }
            let a_bf = 2.0 * cross.abs() / total;
            let a_cf = correlation_ratio(w, fs, omega, k, n).unwrap() / {
                let r = ((1.0 + theta.cos()) / (1.0 - theta.cos())).sqrt();
                r.max(1.0 / r)
            };
            assert!(a_bf <= a_cf * (1.0 + 1e-9), "{a_bf} > {a_cf}");
        }
    }

    #[test]
    fn bound_decreases_with_w() {
        let omega = 2.0 * PI * 60.0 / 1000.0;
        let c: Vec<f64> = [0.5, 1.0, 2.0, 5.0]
            .iter()
            .map(|&w| correlation_ratio(w, 1000.0, omega, 1, 10_000).unwrap())
            .collect();
        assert!(c.windows(2).all(|p| p[1] < p[0]));
    }
}
