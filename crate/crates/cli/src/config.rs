//! Flat `key = value` configuration files and command-line parameter
//! overrides. Resolution order: flag, then config file, then default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use clap::Args;
use plic_core::AltParams;

use crate::error::{CliError, Result};

/// Every [`AltParams`] field, as accepted in config files.
pub const PARAM_KEYS: [&str; 14] = [
    "b0",
    "b_inf",
    "b_st",
    "p0",
    "p_inf",
    "p_st",
    "w",
    "m_prime",
    "fs",
    "band_lo",
    "band_hi",
    "gamma_cutoff",
    "dc_block",
    "second_harmonic_mode",
];

/// Parsed config file: key to (raw value, line number).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    /// Parses `text`, accepting [`PARAM_KEYS`] plus `extra_keys`.
    pub fn parse(text: &str, extra_keys: &[&str]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {line_no}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !PARAM_KEYS.contains(&key) && !extra_keys.contains(&key) {
                return Err(CliError::usage(format!(
                    "config line {line_no}: unknown key `{key}`"
                )));
            }
            if value.is_empty() {
                return Err(CliError::usage(format!(
                    "config line {line_no}: `{key}` has no value"
                )));
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.to_string(), line_no))
            {
                return Err(CliError::usage(format!(
                    "config line {line_no}: `{key}` already set on line {first}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path, extra_keys: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, extra_keys).map_err(|e| match e {
            CliError::Usage(m) => CliError::usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Typed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse().map(Some).map_err(|_| {
                CliError::usage(format!(
                    "config line {line}: cannot parse `{raw}` for `{key}`"
                ))
            }),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

/// Command-line overrides for [`AltParams`]; `fs` is handled per command.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Initial notch bandwidth (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub b0: Option<f64>,
    /// Asymptotic notch bandwidth (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub b_inf: Option<f64>,
    /// Notch bandwidth settling time (s).
    #[arg(long, allow_negative_numbers = true)]
    pub b_st: Option<f64>,
    /// Initial frequency-estimator settling time (s).
    #[arg(long, allow_negative_numbers = true)]
    pub p0: Option<f64>,
    /// Asymptotic frequency-estimator settling time (s).
    #[arg(long, allow_negative_numbers = true)]
    pub p_inf: Option<f64>,
    /// Frequency-estimator settling-time schedule length (s).
    #[arg(long, allow_negative_numbers = true)]
    pub p_st: Option<f64>,
    /// Amplitude/phase estimator settling time (s).
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
    /// Number of harmonics to remove.
    #[arg(long)]
    pub m_prime: Option<usize>,
    /// Lower bandpass edge (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub band_lo: Option<f64>,
    /// Upper bandpass edge (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub band_hi: Option<f64>,
    /// Frequency-estimate smoother cutoff (Hz).
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_cutoff: Option<f64>,
    /// Run a DC blocker ahead of the canceller.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub dc_block: Option<bool>,
    /// Track the second harmonic instead of the fundamental.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub second_harmonic_mode: Option<bool>,
}

impl ParamFlags {
    /// Loads the config file named by `--config`, if any.
    pub fn load_config(&self, extra_keys: &[&str]) -> Result<ConfigFile> {
        match &self.config {
            Some(path) => ConfigFile::load(path, extra_keys),
            None => Ok(ConfigFile::default()),
        }
    }
}

fn pick<T: FromStr>(flag: Option<T>, config: &ConfigFile, key: &str, default: T) -> Result<T> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(config.get(key)?.unwrap_or(default)),
    }
}

/// Resolves every parameter as flag > config > default. `fs_flag` is the
/// command's `--fs`, if it has one.
pub fn resolve_params(
    flags: &ParamFlags,
    config: &ConfigFile,
    fs_flag: Option<f64>,
) -> Result<AltParams> {
    let d = AltParams::default();
    Ok(AltParams {
        b0: pick(flags.b0, config, "b0", d.b0)?,
        b_inf: pick(flags.b_inf, config, "b_inf", d.b_inf)?,
        b_st: pick(flags.b_st, config, "b_st", d.b_st)?,
        p0: pick(flags.p0, config, "p0", d.p0)?,
        p_inf: pick(flags.p_inf, config, "p_inf", d.p_inf)?,
        p_st: pick(flags.p_st, config, "p_st", d.p_st)?,
        w: pick(flags.w, config, "w", d.w)?,
        m_prime: pick(flags.m_prime, config, "m_prime", d.m_prime)?,
        fs: pick(fs_flag, config, "fs", d.fs)?,
        band_lo: pick(flags.band_lo, config, "band_lo", d.band_lo)?,
        band_hi: pick(flags.band_hi, config, "band_hi", d.band_hi)?,
        gamma_cutoff: pick(flags.gamma_cutoff, config, "gamma_cutoff", d.gamma_cutoff)?,
        dc_block: pick(flags.dc_block, config, "dc_block", d.dc_block)?,
        second_harmonic_mode: pick(
            flags.second_harmonic_mode,
            config,
            "second_harmonic_mode",
            d.second_harmonic_mode,
        )?,
    })
}

/// Resolves a non-parameter setting as flag > config > default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T> {
    pick(flag, config, key, default)
}

/// Like [`resolve`] for settings without a default.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(key),
    }
}
