//! Canned synthetic experiments: scenario builders, single-run evaluation
//! and seeded sweeps over SNR, interference frequency, settling time,
//! tracking, baselines and estimator variants.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::batch::try_par_map;
use crate::canceller::{process_stream_with, Diagnostics};
use crate::metrics::{convergence_time_ms, snr_out, steady_state_skip, windowed_snr, Metrics};
use crate::notch::baseline_notch;
use crate::rls::{AmplitudeEstimator, FullRlsState, RlsState};
use crate::siggen::{CarrierSpec, InterferenceSpec, Profile, Scenario, ScenarioConfig};
use crate::{AltParams, Result};

/// Relative harmonic amplitudes used by the synthetic protocols.
pub const DEFAULT_AMPLITUDES: [f64; 3] = [1.0, 0.5, 0.25];

/// Carrier spectral exponent of the synthetic neural surrogate.
pub const CARRIER_ALPHA: f64 = 2.0;

/// Frequency tolerance used for convergence times.
pub const CONVERGENCE_TOL_HZ: f64 = 1.0;

/// Parameters of the SNR and frequency sweeps.
pub fn snr_sweep_params() -> AltParams {
    AltParams::default()
}

/// Parameters of the settling-time trade-off at amplitude settling time `w`.
pub fn tradeoff_params(w: f64) -> AltParams {
    AltParams {
        w,
        ..AltParams::default()
    }
}

/// Parameters of the tracking experiments.
pub fn tracking_params(b_inf: f64, p_inf: f64) -> AltParams {
    AltParams {
        b_inf,
        p_inf,
        w: 1.0,
        ..AltParams::default()
    }
}

/// Parameters of the initial-convergence experiment.
pub fn convergence_params() -> AltParams {
    AltParams {
        b0: 50.0,
        b_inf: 0.05,
        b_st: 0.5,
        p0: 0.1,
        p_inf: 2.0,
        p_st: 0.5,
        w: 1.0,
        ..AltParams::default()
    }
}

/// Seeded uniform phases in `[0, 2 pi)`, one per harmonic.
pub fn random_phases(seed: u64, m: usize) -> Vec<f64> {
    // Offset the stream so phases are independent of the carrier draw.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..m).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}

/// Harmonic amplitudes used by the synthetic protocols: [`DEFAULT_AMPLITUDES`],
/// then halving per harmonic.
pub fn default_amplitudes(m: usize) -> Vec<f64> {
    (0..m)
        .map(|k| {
            DEFAULT_AMPLITUDES
                .get(k)
                .copied()
                .unwrap_or(0.25 / 2f64.powi(k as i32 - 2))
        })
        .collect()
}

/// `m` stationary harmonics of `f0` in a `1/f^2` carrier.
pub fn stationary_scenario(
    f0: f64,
    m: usize,
    snr_in: f64,
    fs: f64,
    duration: f64,
    seed: u64,
) -> ScenarioConfig {
    ScenarioConfig {
        carrier: CarrierSpec {
            alpha: CARRIER_ALPHA,
            seed,
        },
        interference: InterferenceSpec::stationary(
            f0,
            &default_amplitudes(m),
            &random_phases(seed, m),
        ),
        snr_in,
        duration,
        fs,
        snr_reference: None,
    }
}

/// Fundamental swept linearly from `f_start` to `f_end` over the run.
pub fn sweep_scenario(
    f_start: f64,
    f_end: f64,
    m: usize,
    fs: f64,
    duration: f64,
    seed: u64,
) -> ScenarioConfig {
    let mut cfg = stationary_scenario(f_start, m, 0.0, fs, duration, seed);
    cfg.interference.f0 = Profile::ramp(0.0, f_start, duration, f_end);
    cfg
}

/// Fundamental jumping from `f_before` to `f_after` at `t_step`.
pub fn frequency_step_scenario(
    f_before: f64,
    f_after: f64,
    t_step: f64,
    m: usize,
    fs: f64,
    duration: f64,
    seed: u64,
) -> ScenarioConfig {
    let mut cfg = stationary_scenario(f_before, m, 0.0, fs, duration, seed);
    cfg.interference.f0 = Profile::step(t_step, f_before, f_after);
    cfg
}

/// Every harmonic amplitude multiplied by `factor` at `t_step`; `snr_in`
/// holds before the step.
#[allow(clippy::too_many_arguments)]
pub fn amplitude_step_scenario(
    f0: f64,
    factor: f64,
    t_step: f64,
    m: usize,
    snr_in: f64,
    fs: f64,
    duration: f64,
    seed: u64,
) -> ScenarioConfig {
    let mut cfg = stationary_scenario(f0, m, snr_in, fs, duration, seed);
    cfg.interference.amplitudes = default_amplitudes(m)
        .iter()
        .map(|&a| Profile::step(t_step, a, a * factor))
        .collect();
    cfg.snr_reference = Some(t_step);
    cfg
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: Scenario,
    pub output: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub metrics: Metrics,
}

/// Generates `cfg`, cancels it with `params` and scores the output from
/// `skip` seconds on (`None`: the steady-state rule).
pub fn run(params: &AltParams, cfg: &ScenarioConfig, skip: Option<f64>) -> Result<RunResult> {
    run_with::<RlsState>(params, cfg, skip)
}

/// [`run`] with an explicit amplitude estimator.
pub fn run_with<E: AmplitudeEstimator>(
    params: &AltParams,
    cfg: &ScenarioConfig,
    skip: Option<f64>,
) -> Result<RunResult> {
    let scenario = cfg.generate()?;
    let (out, diagnostics) = process_stream_with::<E>(params, &scenario.mixed, true)?;
    let metrics = score(params, cfg, &scenario, &out.samples, &diagnostics, skip)?;
    Ok(RunResult {
        scenario,
        output: out.samples,
        diagnostics,
        metrics,
    })
}

/// Builds [`Metrics`] for an output of `scenario`.
pub fn score(
    params: &AltParams,
    cfg: &ScenarioConfig,
    scenario: &Scenario,
    output: &[f64],
    diagnostics: &Diagnostics,
    skip: Option<f64>,
) -> Result<Metrics> {
    let skip = skip.unwrap_or_else(|| steady_state_skip(params));
    let clean = &scenario.clean.samples;
    let snr = snr_out(clean, output, cfg.fs, skip)?;
    let mse_curve = clean
        .iter()
        .zip(output)
        .map(|(c, o)| (o - c).powi(2))
        .collect();
    let freq_error_curve: Vec<f64> = diagnostics
        .freq_hz
        .iter()
        .zip(&scenario.f0)
        .map(|(e, t)| e - t)
        .collect();
    let convergence = if freq_error_curve.is_empty() {
        None
    } else {
        convergence_time_ms(&freq_error_curve, cfg.fs, CONVERGENCE_TOL_HZ)
    };
    Ok(Metrics {
        snr_in: cfg.snr_in,
        snr_out: snr,
        mse_curve,
        freq_error_curve,
        convergence_time_ms: convergence,
    })
}

/// SNR_out of one run without diagnostics capture.
pub fn snr_of(params: &AltParams, cfg: &ScenarioConfig, skip: Option<f64>) -> Result<f64> {
    snr_of_with::<RlsState>(params, cfg, skip)
}

/// [`snr_of`] with an explicit amplitude estimator.
pub fn snr_of_with<E: AmplitudeEstimator>(
    params: &AltParams,
    cfg: &ScenarioConfig,
    skip: Option<f64>,
) -> Result<f64> {
    let scenario = cfg.generate()?;
    let (out, _) = process_stream_with::<E>(params, &scenario.mixed, false)?;
    snr_out(
        &scenario.clean.samples,
        &out.samples,
        cfg.fs,
        skip.unwrap_or_else(|| steady_state_skip(params)),
    )
}

/// Seeded results at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub values: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl SweepPoint {
    fn new(x: f64, values: Vec<f64>) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            x,
            values,
            mean,
            min,
            max,
        }
    }
}

/// Evaluates `f(x, seed)` for every grid point and seed in parallel.
pub fn sweep<F>(grid: &[f64], seeds: &[u64], f: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64, u64) -> Result<f64> + Sync + Send,
{
    let jobs: Vec<(f64, u64)> = grid
        .iter()
        .flat_map(|&x| seeds.iter().map(move |&s| (x, s)))
        .collect();
    let values = try_par_map(&jobs, |&(x, s)| f(x, s))?;
    Ok(grid
        .iter()
        .zip(values.chunks(seeds.len().max(1)))
        .map(|(&x, v)| SweepPoint::new(x, v.to_vec()))
        .collect())
}

/// SNR_out against SNR_in: 61 Hz fundamental, three harmonics.
pub fn snr_sweep(
    params: &AltParams,
    levels: &[f64],
    seeds: &[u64],
    duration: f64,
) -> Result<Vec<SweepPoint>> {
    let m = harmonics_below_nyquist(61.0, 3, params.fs);
    sweep(levels, seeds, |snr, seed| {
        let cfg = stationary_scenario(61.0, m, snr, params.fs, duration, seed);
        snr_of(params, &cfg, None)
    })
}

/// SNR_out against the interference fundamental at 0 dB.
pub fn frequency_sweep(
    params: &AltParams,
    freqs: &[f64],
    seeds: &[u64],
    duration: f64,
) -> Result<Vec<SweepPoint>> {
    sweep(freqs, seeds, |f0, seed| {
        let m = harmonics_below_nyquist(f0, 3, params.fs);
        let cfg = stationary_scenario(f0, m, 0.0, params.fs, duration, seed);
        snr_of(params, &cfg, None)
    })
}

/// SNR_out against the amplitude settling time `W` at 0 dB.
pub fn tradeoff_sweep(
    base: &AltParams,
    ws: &[f64],
    seeds: &[u64],
    duration: f64,
) -> Result<Vec<SweepPoint>> {
    sweep(ws, seeds, |w, seed| {
        let params = AltParams { w, ..base.clone() };
        let cfg = stationary_scenario(61.0, 3, 0.0, params.fs, duration, seed);
        snr_of(&params, &cfg, None)
    })
}

/// Harmonics of `f0` (up to `m`) strictly below Nyquist.
pub fn harmonics_below_nyquist(f0: f64, m: usize, fs: f64) -> usize {
    (1..=m).take_while(|&k| k as f64 * f0 < fs / 2.0).count()
}

/// Convergence time in ms of the frequency estimate (within
/// [`CONVERGENCE_TOL_HZ`] for the rest of a `duration`-second run).
pub fn initial_convergence(
    params: &AltParams,
    f0: f64,
    seed: u64,
    duration: f64,
) -> Result<Option<f64>> {
    let cfg = stationary_scenario(f0, 3, 0.0, params.fs, duration, seed);
    Ok(run(params, &cfg, Some(0.0))?.metrics.convergence_time_ms)
}

/// Frequency sweep tracking summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    /// RMS frequency error after the skip window.
    pub freq_rms_hz: f64,
    /// Worst 1 s SNR_out after the skip window.
    pub min_window_snr: f64,
    pub snr_out: f64,
}

/// 59 -> 61 Hz over `duration` seconds at 0 dB.
pub fn tracking_sweep(params: &AltParams, seed: u64, duration: f64) -> Result<TrackingReport> {
    let cfg = sweep_scenario(59.0, 61.0, 3, params.fs, duration, seed);
    let skip = steady_state_skip(params);
    let r = run(params, &cfg, Some(skip))?;
    let start = (skip * params.fs) as usize;
    let err = &r.metrics.freq_error_curve[start..];
    let freq_rms_hz = crate::metrics::rms(err);
    let windows = windowed_snr(&r.scenario.clean.samples, &r.output, params.fs, skip, 1.0)?;
    let min_window_snr = windows.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(TrackingReport {
        freq_rms_hz,
        min_window_snr,
        snr_out: r.metrics.snr_out,
    })
}

/// Per-harmonic settling after an amplitude step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeStepReport {
    /// Seconds after the step until the estimate stays within `tol` of
    /// the new amplitude; `None` if it never does.
    pub settle_s: Vec<Option<f64>>,
}

/// Amplitudes doubled at `t_step`; `tol` is relative.
pub fn amplitude_step(
    params: &AltParams,
    seed: u64,
    t_step: f64,
    duration: f64,
    tol: f64,
) -> Result<AmplitudeStepReport> {
    let cfg = amplitude_step_scenario(61.0, 2.0, t_step, 3, 0.0, params.fs, duration, seed);
    let r = run(params, &cfg, Some(0.0))?;
    let start = (t_step * params.fs).round() as usize;
    let settle_s = r
        .diagnostics
        .harmonic_amps
        .iter()
        .zip(&r.scenario.amplitudes)
        .map(|(est, truth)| {
            let rel: Vec<f64> = est[start..]
                .iter()
                .zip(&truth[start..])
                .map(|(e, t)| (e - t) / t)
                .collect();
            convergence_time_ms(&rel, params.fs, tol).map(|ms| ms / 1000.0)
        })
        .collect();
    Ok(AmplitudeStepReport { settle_s })
}

/// SNR_out of the canceller and of 8 Hz and 1 Hz notch cascades at the
/// nominal 60 Hz on the same input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineReport {
    pub proposed: f64,
    pub notch_wide: f64,
    pub notch_narrow: f64,
}

pub fn baseline_comparison(
    params: &AltParams,
    f0: f64,
    seed: u64,
    duration: f64,
) -> Result<BaselineReport> {
    let cfg = stationary_scenario(f0, 3, 0.0, params.fs, duration, seed);
    let scenario = cfg.generate()?;
    let skip = steady_state_skip(params);
    let clean = &scenario.clean.samples;
    let (out, _) = process_stream_with::<RlsState>(params, &scenario.mixed, false)?;
    let notch = |bw: f64| -> Result<f64> {
        let y = baseline_notch(&scenario.mixed.samples, params.fs, 60.0, bw, 3)?;
        snr_out(clean, &y, params.fs, skip)
    };
    Ok(BaselineReport {
        proposed: snr_out(clean, &out.samples, params.fs, skip)?,
        notch_wide: notch(8.0)?,
        notch_narrow: notch(1.0)?,
    })
}

/// SNR_out with the diagonal estimator and with the full 2x2 RLS oracle on
/// the same input.
pub fn rls_comparison(params: &AltParams, seed: u64, duration: f64) -> Result<(f64, f64)> {
    let cfg = stationary_scenario(61.0, 3, 0.0, params.fs, duration, seed);
    Ok((
        snr_of_with::<RlsState>(params, &cfg, None)?,
        snr_of_with::<FullRlsState>(params, &cfg, None)?,
    ))
}

/// The three word-length test inputs: stationary 59 Hz at 0 dB, an
/// interference power step from 0 to -10 dB SNR, and a 60 -> 60.2 Hz
/// frequency step. All at 1250 Hz, three harmonics, 60 s; steps happen at
/// [`HARDWARE_STEP`], before the metrics window opens.
pub fn hardware_test_scenario(test: usize, seed: u64) -> ScenarioConfig {
    const FS: f64 = 1250.0;
    const DURATION: f64 = 60.0;
    match test {
        1 => stationary_scenario(59.0, 3, 0.0, FS, DURATION, seed),
        2 => amplitude_step_scenario(
            60.0,
            10f64.sqrt(),
            HARDWARE_STEP,
            3,
            0.0,
            FS,
            DURATION,
            seed,
        ),
        _ => frequency_step_scenario(60.0, 60.2, HARDWARE_STEP, 3, FS, DURATION, seed),
    }
}

/// Parameters for the word-length tests.
pub fn hardware_params() -> AltParams {
    AltParams {
        fs: 1250.0,
        m_prime: 3,
        ..AltParams::default()
    }
}

/// Step instant of the word-length tests 2 and 3 (s).
pub const HARDWARE_STEP: f64 = 10.0;

/// Metrics window start of the word-length tests (s).
pub const HARDWARE_SKIP: f64 = 20.0;
