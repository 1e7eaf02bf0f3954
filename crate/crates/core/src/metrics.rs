//! Output-quality measures against synthetic ground truth.

use serde::Serialize;

use crate::{Error, Result};

/// Reported in place of an infinite SNR (zero residual).
pub const SNR_CAP_DB: f64 = 200.0;

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub snr_in: f64,
    pub snr_out: f64,
    pub mse_curve: Vec<f64>,
    pub freq_error_curve: Vec<f64>,
    /// `None` if the estimate never settles within tolerance.
    pub convergence_time_ms: Option<f64>,
}

/// `10 log10(sum s^2 / sum (s_hat - s)^2)` over samples from `skip`
/// seconds on.
pub fn snr_out(clean: &[f64], estimate: &[f64], fs: f64, skip: f64) -> Result<f64> {
    if clean.len() != estimate.len() {
        return Err(Error::param(
            "estimate",
            format!(
                "length {} differs from clean length {}",
                estimate.len(),
                clean.len()
            ),
        ));
    }
    let start = (skip * fs).round().max(0.0) as usize;
    if start >= clean.len() {
        return Err(Error::param(
            "skip",
            format!(
                "skip of {skip} s leaves no samples of a {} s signal",
                clean.len() as f64 / fs
            ),
        ));
    }
    Ok(ratio_db(&clean[start..], &estimate[start..]))
}

fn ratio_db(clean: &[f64], estimate: &[f64]) -> f64 {
    let sig: f64 = clean.iter().map(|s| s * s).sum();
    let err: f64 = clean
        .iter()
        .zip(estimate)
        .map(|(s, e)| (e - s).powi(2))
        .sum();
    if err == 0.0 {
        return SNR_CAP_DB;
    }
    (10.0 * (sig / err).log10()).min(SNR_CAP_DB)
}

/// SNR over consecutive non-overlapping windows of `window` seconds,
/// starting at `skip`. A trailing partial window is dropped.
pub fn windowed_snr(
    clean: &[f64],
    estimate: &[f64],
    fs: f64,
    skip: f64,
    window: f64,
) -> Result<Vec<f64>> {
    snr_out(clean, estimate, fs, skip)?;
    let start = (skip * fs).round() as usize;
    let w = (window * fs).round() as usize;
    if w == 0 {
        return Err(Error::param("window", "must span at least one sample"));
    }
    Ok(clean[start..]
        .chunks_exact(w)
        .zip(estimate[start..].chunks_exact(w))
        .map(|(c, e)| ratio_db(c, e))
        .collect())
}

/// Pointwise mean of squared residuals across runs.
pub fn mse_curve(runs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::param("runs", "need at least one run"))?;
    if runs.iter().any(|r| r.len() != first.len()) {
        return Err(Error::param("runs", "all runs must have equal length"));
    }
    let n = runs.len() as f64;
    Ok((0..first.len())
        .map(|i| runs.iter().map(|r| r[i] * r[i]).sum::<f64>() / n)
        .collect())
}

/// Time in ms of the first sample after which `|error| <= tol` holds for
/// the rest of the trace.
pub fn convergence_time_ms(error: &[f64], fs: f64, tol: f64) -> Option<f64> {
    let last_bad = error.iter().rposition(|e| e.is_nan() || e.abs() > tol);
    let idx = match last_bad {
        None => 0,
        Some(i) if i + 1 == error.len() => return None,
        Some(i) => i + 1,
    };
    Some(idx as f64 * 1000.0 / fs)
}

/// Root-mean-square of `x`.
pub fn rms(x: &[f64]) -> f64 {
    crate::signal::mean_power(x).sqrt()
}

/// Steady-state skip in seconds: `max(2 P_st, 2 W, 5 s)`.
pub fn steady_state_skip(p: &crate::AltParams) -> f64 {
    (2.0 * p.p_st).max(2.0 * p.w).max(5.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn snr_examples() {
        let clean: Vec<f64> = (0..10_000).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(snr_out(&clean, &clean, 1000.0, 0.0).unwrap(), SNR_CAP_DB);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let noise: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let scale = 0.01 * rms(&clean) / rms(&noise);
        let est: Vec<f64> = clean
            .iter()
            .zip(&noise)
            .map(|(c, n)| c + scale * n)
            .collect();
        let db = snr_out(&clean, &est, 1000.0, 0.0).unwrap();
        assert!((db - 40.0).abs() < 0.1, "{db}");
        assert!(snr_out(&clean, &est, 1000.0, 10.0).is_err());
        assert!(snr_out(&clean, &est[1..], 1000.0, 0.0).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_curve(&[vec![0.0; 5]]).unwrap(), vec![0.0; 5]);
        assert_eq!(
            mse_curve(&[vec![1.0; 4], vec![-1.0; 4]]).unwrap(),
            vec![1.0; 4]
        );
        assert!(mse_curve(&[]).is_err());
        assert!(mse_curve(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn convergence_examples() {
        assert_eq!(
            convergence_time_ms(&[5.0, 2.0, 0.5, 0.1, 0.0], 1000.0, 1.0),
            Some(2.0)
        );
        assert_eq!(
            convergence_time_ms(&[0.5, 2.0, 0.5], 1000.0, 1.0),
            Some(2.0)
        );
        assert_eq!(convergence_time_ms(&[0.5, 0.5], 1000.0, 1.0), Some(0.0));
        assert_eq!(convergence_time_ms(&[0.5, 2.0], 1000.0, 1.0), None);
        assert_eq!(
            convergence_time_ms(&[0.5, f64::NAN, 0.1], 1000.0, 1.0),
            Some(2.0)
        );
    }

    #[test]
    fn windows() {
        let c = vec![1.0; 2500];
        let e = vec![1.1; 2500];
        let w = windowed_snr(&c, &e, 1000.0, 0.0, 1.0).unwrap();
        assert_eq!(w.len(), 2);
        assert!((w[0] - 20.0).abs() < 1e-9);
    }
}
