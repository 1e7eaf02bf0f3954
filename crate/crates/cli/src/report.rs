//! Metrics JSON. The key set is fixed; values that cannot be computed are
//! `null`.

use std::io::Write;
use std::path::Path;

use plic_core::experiments::CONVERGENCE_TOL_HZ;
use plic_core::metrics::convergence_time_ms;
use plic_core::AltParams;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineName {
    Float,
    Fixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    #[serde(flatten)]
    pub params: AltParams,
    pub engine: EngineName,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub snr_in_db: Option<f64>,
    pub snr_out_db: Option<f64>,
    pub convergence_ms: Option<f64>,
    pub freq_trace: Vec<f64>,
    /// `harmonic_amps[k][n]`; empty for the fixed-point engine.
    pub harmonic_amps: Vec<Vec<f64>>,
    pub params_resolved: ResolvedParams,
}

/// Time after which the frequency trace stays within the convergence
/// tolerance of its mean over the final second. Used when no ground truth
/// exists.
pub fn self_convergence_ms(freq: &[f64], fs: f64) -> Option<f64> {
    if freq.is_empty() {
        return None;
    }
    let tail = (fs.round() as usize).clamp(1, freq.len());
    let settled = freq[freq.len() - tail..].iter().sum::<f64>() / tail as f64;
    let error: Vec<f64> = freq.iter().map(|f| f - settled).collect();
    convergence_time_ms(&error, fs, CONVERGENCE_TOL_HZ)
}

/// Serialises `value` to `path`, or to stdout for `-`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value).map_err(|e| CliError::Validation(e.to_string()))?;
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
    } else {
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}
