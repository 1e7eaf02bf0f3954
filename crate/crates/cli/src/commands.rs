//! Subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use plic_core::batch::try_par_map;
use plic_core::experiments::{
    default_amplitudes, frequency_sweep, random_phases, run, snr_sweep, tradeoff_sweep, SweepPoint,
    CONVERGENCE_TOL_HZ,
};
use plic_core::fixedpoint::{fixed_process_stream, FixedConfig, INPUT_PEAK};
use plic_core::metrics::{convergence_time_ms, snr_out, steady_state_skip};
use plic_core::rls::{bound_sweep, BoundGrid};
use plic_core::siggen::{CarrierSpec, InterferenceSpec, Profile, ScenarioConfig};
use plic_core::{process_stream, AltParams, Signal};

use crate::config::{resolve, resolve_opt, resolve_params, ConfigFile, ParamFlags};
use crate::error::{CliError, Result};
use crate::io::{read_signal, write_signal, Format, MultiSignal, WavEncoding};
use crate::report::{self_convergence_ms, write_json, EngineName, MetricsReport, ResolvedParams};

#[derive(Debug, Args)]
pub struct CancelArgs {
    /// Input signal (CSV or WAV).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Cleaned output signal (CSV or WAV).
    #[arg(short, long)]
    pub output: PathBuf,
    /// Input format; inferred from the extension by default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output format; inferred from the extension by default.
    #[arg(long, value_enum)]
    pub output_format: Option<Format>,
    /// Sampling rate (Hz); required for CSV input.
    #[arg(long, allow_negative_numbers = true)]
    pub fs: Option<f64>,
    /// Sample encoding for WAV output.
    #[arg(long, value_enum, default_value_t)]
    pub wav_encoding: WavEncoding,
    /// Write per-channel metrics JSON here (`-` for stdout).
    #[arg(long, value_name = "PATH")]
    pub metrics: Option<PathBuf>,
    /// Use the fixed-point engine.
    #[arg(long)]
    pub fixed_point: bool,
    #[command(flatten)]
    pub params: ParamFlags,
}

struct ChannelRun {
    output: Vec<f64>,
    freq: Vec<f64>,
    amps: Vec<Vec<f64>>,
}

fn fixed_config(params: &AltParams) -> Result<FixedConfig> {
    let cfg = FixedConfig::for_params(params);
    cfg.validate()?;
    Ok(cfg)
}

fn engine_name(fixed: bool) -> EngineName {
    if fixed {
        EngineName::Fixed
    } else {
        EngineName::Float
    }
}

pub fn cancel(args: &CancelArgs) -> Result<()> {
    let config = args.params.load_config(&[])?;
    let in_format = Format::resolve(args.format, &args.input)?;
    let out_format = Format::resolve(args.output_format, &args.output)?;
    let fs_override = match in_format {
        Format::Csv => resolve_opt(args.fs, &config, "fs")?,
        Format::Wav => args.fs,
    };
    let input = read_signal(&args.input, in_format, fs_override)?;
    let params = resolve_params(&args.params, &config, Some(input.fs))?;
    params.validate()?;
    for w in params.warnings() {
        log::warn!("{w}");
    }
    let fixed = if args.fixed_point {
        let peak = input
            .channels
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if peak >= 1.0 {
            log::warn!("input peak {peak} exceeds fixed-point full scale; samples will saturate");
        }
        Some(fixed_config(&params)?)
    } else {
        None
    };
    let capture = args.metrics.is_some();
    let runs = try_par_map(&input.channels, |ch| -> Result<ChannelRun> {
        let signal = Signal::new(ch.clone(), input.fs);
        match &fixed {
            Some(cfg) => {
                let (out, freq) = fixed_process_stream(&params, cfg, &signal)?;
                Ok(ChannelRun {
                    output: out.samples,
                    freq,
                    amps: Vec::new(),
                })
            }
            None => {
                let (out, diag) = process_stream(&params, &signal, capture)?;
                Ok(ChannelRun {
                    output: out.samples,
                    freq: diag.freq_hz,
                    amps: diag.harmonic_amps,
                })
            }
        }
    })?;

    let output = MultiSignal {
        channels: runs.iter().map(|r| r.output.clone()).collect(),
        fs: input.fs,
    };
    write_signal(&args.output, out_format, &output, None, args.wav_encoding)?;
    if let Some(path) = &args.metrics {
        let reports: Vec<MetricsReport> = runs
            .into_iter()
            .map(|r| MetricsReport {
                snr_in_db: None,
                snr_out_db: None,
                convergence_ms: self_convergence_ms(&r.freq, input.fs),
                freq_trace: r.freq,
                harmonic_amps: r.amps,
                params_resolved: ResolvedParams {
                    params: params.clone(),
                    engine: engine_name(args.fixed_point),
                },
            })
            .collect();
        write_json(path, &reports)?;
    }
    Ok(())
}

/// Config keys accepted by `simulate` besides the canceller parameters.
pub const SCENARIO_KEYS: [&str; 11] = [
    "snr_in",
    "f0",
    "harmonics",
    "duration",
    "seed",
    "alpha",
    "f0_end",
    "step_time",
    "f0_after",
    "amp_factor",
    "skip",
];

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Input SNR (dB).
    #[arg(long, allow_negative_numbers = true)]
    pub snr_in: Option<f64>,
    /// Interference fundamental (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub f0: Option<f64>,
    /// Number of interference harmonics.
    #[arg(long)]
    pub harmonics: Option<usize>,
    /// Sampling rate (Hz), shared by scenario and canceller.
    #[arg(long, allow_negative_numbers = true)]
    pub fs: Option<f64>,
    /// Run length (s).
    #[arg(long, allow_negative_numbers = true)]
    pub duration: Option<f64>,
    /// Seed for carrier and harmonic phases.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Carrier spectral exponent (1/f^alpha), in (1, 3).
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Sweep the fundamental linearly from --f0 to this value (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub f0_end: Option<f64>,
    /// Time of a frequency or amplitude step (s).
    #[arg(long, allow_negative_numbers = true)]
    pub step_time: Option<f64>,
    /// Fundamental after --step-time (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub f0_after: Option<f64>,
    /// Interference amplitude factor applied at --step-time.
    #[arg(long, allow_negative_numbers = true)]
    pub amp_factor: Option<f64>,
    /// Seconds excluded from SNR_out; defaults to the steady-state rule.
    #[arg(long, allow_negative_numbers = true)]
    pub skip: Option<f64>,
    /// Write clean, mixed and cleaned signals here (CSV or WAV).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Output format; inferred from the extension by default.
    #[arg(long, value_enum)]
    pub output_format: Option<Format>,
    /// Sample encoding for WAV output.
    #[arg(long, value_enum, default_value_t)]
    pub wav_encoding: WavEncoding,
    /// Write metrics JSON here (`-` for stdout); otherwise a one-line
    /// summary is printed.
    #[arg(long, value_name = "PATH")]
    pub metrics: Option<PathBuf>,
    /// Use the fixed-point engine.
    #[arg(long)]
    pub fixed_point: bool,
    #[command(flatten)]
    pub params: ParamFlags,
}

/// Builds the scenario described by `args` and `config`.
pub fn scenario_from(args: &SimulateArgs, config: &ConfigFile, fs: f64) -> Result<ScenarioConfig> {
    let snr_in = resolve(args.snr_in, config, "snr_in", 0.0)?;
    let f0 = resolve(args.f0, config, "f0", 60.0)?;
    let m = resolve(args.harmonics, config, "harmonics", 3)?;
    let duration = resolve(args.duration, config, "duration", 60.0)?;
    let seed = resolve(args.seed, config, "seed", 0)?;
    let alpha = resolve(
        args.alpha,
        config,
        "alpha",
        plic_core::experiments::CARRIER_ALPHA,
    )?;
    let f0_end = resolve_opt(args.f0_end, config, "f0_end")?;
    let step_time = resolve_opt(args.step_time, config, "step_time")?;
    let f0_after = resolve_opt(args.f0_after, config, "f0_after")?;
    let amp_factor = resolve_opt(args.amp_factor, config, "amp_factor")?;

    if m == 0 {
        return Err(CliError::usage("--harmonics must be at least 1"));
    }
    if f0_end.is_some() && f0_after.is_some() {
        return Err(CliError::usage(
            "--f0-end and --f0-after are mutually exclusive",
        ));
    }
    let needs_step = f0_after.is_some() || amp_factor.is_some();
    if needs_step != step_time.is_some() {
        return Err(CliError::usage(
            "--step-time goes together with --f0-after or --amp-factor",
        ));
    }

    let amps = default_amplitudes(m);
    let mut interference = InterferenceSpec::stationary(f0, &amps, &random_phases(seed, m));
    if let Some(end) = f0_end {
        interference.f0 = Profile::ramp(0.0, f0, duration, end);
    }
    if let (Some(t), Some(after)) = (step_time, f0_after) {
        interference.f0 = Profile::step(t, f0, after);
    }
    let mut snr_reference = None;
    if let (Some(t), Some(factor)) = (step_time, amp_factor) {
        interference.amplitudes = amps
            .iter()
            .map(|&a| Profile::step(t, a, a * factor))
            .collect();
        snr_reference = Some(t);
    }
    Ok(ScenarioConfig {
        carrier: CarrierSpec { alpha, seed },
        interference,
        snr_in,
        duration,
        fs,
        snr_reference,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = args.params.load_config(&SCENARIO_KEYS)?;
    let params = resolve_params(&args.params, &config, args.fs)?;
    params.validate()?;
    for w in params.warnings() {
        log::warn!("{w}");
    }
    let cfg = scenario_from(args, &config, params.fs)?;
    let skip = resolve(args.skip, &config, "skip", steady_state_skip(&params))?;

    let (scenario, output, freq, amps) = if args.fixed_point {
        let fixed = fixed_config(&params)?;
        let s = cfg.generate()?;
        let peak = s.mixed.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let g = if peak > 0.0 { INPUT_PEAK / peak } else { 1.0 };
        let scaled = Signal::new(s.mixed.samples.iter().map(|v| g * v).collect(), cfg.fs);
        let (out, freq) = fixed_process_stream(&params, &fixed, &scaled)?;
        let out = out.samples.iter().map(|v| v / g).collect();
        (s, out, freq, Vec::new())
    } else {
        let r = run(&params, &cfg, Some(skip))?;
        (
            r.scenario,
            r.output,
            r.diagnostics.freq_hz,
            r.diagnostics.harmonic_amps,
        )
    };

    let snr = snr_out(&scenario.clean.samples, &output, cfg.fs, skip)?;
    let freq_error: Vec<f64> = freq.iter().zip(&scenario.f0).map(|(e, t)| e - t).collect();
    let report = MetricsReport {
        snr_in_db: Some(cfg.snr_in),
        snr_out_db: Some(snr),
        convergence_ms: convergence_time_ms(&freq_error, cfg.fs, CONVERGENCE_TOL_HZ),
        freq_trace: freq,
        harmonic_amps: amps,
        params_resolved: ResolvedParams {
            params: params.clone(),
            engine: engine_name(args.fixed_point),
        },
    };

    if let Some(path) = &args.output {
        let format = Format::resolve(args.output_format, path)?;
        let signals = MultiSignal {
            channels: vec![scenario.clean.samples, scenario.mixed.samples, output],
            fs: cfg.fs,
        };
        write_signal(
            path,
            format,
            &signals,
            Some(&["clean", "mixed", "cleaned"]),
            args.wav_encoding,
        )?;
    }
    match &args.metrics {
        Some(path) => write_json(path, &report)?,
        None => println!(
            "snr_in_db={} snr_out_db={:.2} convergence_ms={}",
            cfg.snr_in,
            snr,
            report
                .convergence_ms
                .map_or("none".to_string(), |ms| format!("{ms:.1}"))
        ),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// SNR_out against SNR_in.
    Snr,
    /// SNR_out against the interference fundamental.
    Frequency,
    /// SNR_out against the amplitude settling time W.
    Tradeoff,
}

impl Grid {
    fn default_values(self) -> Vec<f64> {
        match self {
            Grid::Snr => vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            Grid::Frequency => vec![45.0, 50.0, 55.0, 60.0, 65.0],
            Grid::Tradeoff => vec![0.5, 1.0, 2.0, 5.0],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Grid::Snr => "snr_in_db",
            Grid::Frequency => "f0_hz",
            Grid::Tradeoff => "w_s",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Which parameter grid to sweep.
    #[arg(long, value_enum)]
    pub grid: Grid,
    /// Grid values, comma separated; defaults depend on the grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub values: Option<Vec<f64>>,
    /// Seeds per grid point (0..N).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Run length per seed (s).
    #[arg(long, allow_negative_numbers = true)]
    pub duration: Option<f64>,
    /// Sampling rate (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub fs: Option<f64>,
    /// Write the CSV table here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let config = args.params.load_config(&["seeds", "duration"])?;
    let params = resolve_params(&args.params, &config, args.fs)?;
    params.validate()?;
    let n_seeds: u64 = resolve(args.seeds, &config, "seeds", 20)?;
    let duration = resolve(args.duration, &config, "duration", 60.0)?;
    if n_seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let values = args
        .values
        .clone()
        .unwrap_or_else(|| args.grid.default_values());
    let points = match args.grid {
        Grid::Snr => snr_sweep(&params, &values, &seeds, duration)?,
        Grid::Frequency => frequency_sweep(&params, &values, &seeds, duration)?,
        Grid::Tradeoff => tradeoff_sweep(&params, &values, &seeds, duration)?,
    };
    write_table(args.output.as_deref(), args.grid, &points, n_seeds)
}

fn write_table(path: Option<&Path>, grid: Grid, points: &[SweepPoint], seeds: u64) -> Result<()> {
    let sink: Box<dyn std::io::Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let name = path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf);
    let err = |e: csv::Error| CliError::input(&name, e.to_string());
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        grid.name(),
        "mean_snr_out_db",
        "min_snr_out_db",
        "max_snr_out_db",
        "seeds",
    ])
    .map_err(err)?;
    for p in points {
        w.write_record([
            p.x.to_string(),
            format!("{:.4}", p.mean),
            format!("{:.4}", p.min),
            format!("{:.4}", p.max),
            seeds.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&name, e))
}

#[derive(Debug, Args)]
pub struct ValidateBoundArgs {
    /// Sampling rates (Hz), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fs: Option<Vec<f64>>,
    /// Settling times W (s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub w: Option<Vec<f64>>,
    /// Interference fundamentals (Hz), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub f0: Option<Vec<f64>>,
    /// Largest acceptable bound.
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
}

pub fn validate_bound(args: &ValidateBoundArgs) -> Result<()> {
    let d = BoundGrid::default();
    let grid = BoundGrid {
        fs: args.fs.clone().unwrap_or(d.fs),
        w: args.w.clone().unwrap_or(d.w),
        f0: args.f0.clone().unwrap_or(d.f0),
    };
    let bad = |v: &[f64]| v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0));
    if bad(&grid.fs) || bad(&grid.w) || bad(&grid.f0) {
        return Err(CliError::usage(
            "grid values must be positive and non-empty",
        ));
    }
    let rows = bound_sweep(&grid);
    println!("fs_hz,max_c,argmax_w_s,argmax_f0_hz,argmax_k,points");
    for r in &rows {
        println!(
            "{},{:.6},{},{},{},{}",
            r.fs, r.max_c, r.argmax_w, r.argmax_f0, r.argmax_k, r.points
        );
    }
    let failing: Vec<String> = rows
        .iter()
        .filter(|r| r.max_c >= args.threshold)
        .map(|r| format!("fs = {} Hz: {:.4}", r.fs, r.max_c))
        .collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "bound not below {}: {}",
            args.threshold,
            failing.join(", ")
        )))
    }
}
