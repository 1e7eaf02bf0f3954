//! Multi-channel signal files: CSV (one row per sample, one column per
//! channel) and WAV (PCM 16-bit or IEEE float32).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Wav,
}

impl Format {
    /// Format implied by the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" | "txt" => Some(Format::Csv),
            "wav" => Some(Format::Wav),
            _ => None,
        }
    }

    /// `explicit` if given, else the extension; usage error if neither.
    pub fn resolve(explicit: Option<Self>, path: &Path) -> Result<Self> {
        explicit.or_else(|| Self::from_path(path)).ok_or_else(|| {
            CliError::usage(format!(
                "cannot infer the format of {}; pass --format csv|wav",
                path.display()
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum WavEncoding {
    Pcm16,
    #[default]
    Float32,
}

/// Channels of equal length sampled at `fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSignal {
    pub channels: Vec<Vec<f64>>,
    pub fs: f64,
}

impl MultiSignal {
    pub fn samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Reads a signal. CSV files carry no rate, so `fs_override` is required
/// for them; for WAV it must match the header if given.
pub fn read_signal(path: &Path, format: Format, fs_override: Option<f64>) -> Result<MultiSignal> {
    match format {
        Format::Csv => {
            let fs = fs_override.ok_or_else(|| {
                CliError::input(path, "CSV input has no sampling rate; pass --fs")
            })?;
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(MultiSignal {
                channels: read_csv(file, path)?,
                fs,
            })
        }
        Format::Wav => {
            let s = read_wav(path)?;
            if let Some(fs) = fs_override {
                if fs != s.fs {
                    return Err(CliError::usage(format!(
                        "--fs {fs} conflicts with the {} Hz rate in {}",
                        s.fs,
                        path.display()
                    )));
                }
            }
            Ok(s)
        }
    }
}

/// Parses CSV text. A first row with no numeric cell is a header.
pub fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut channels: Option<Vec<Vec<f64>>> = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::input(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let byte = record.position().map_or(0, |p| p.byte());
        if i == 0 && record.iter().all(|cell| cell.parse::<f64>().is_err()) {
            continue;
        }
        let channels = channels.get_or_insert_with(|| vec![Vec::new(); record.len()]);
        if record.len() != channels.len() {
            return Err(CliError::input(
                path,
                format!(
                    "row {line} (byte {byte}): expected {} columns, found {}",
                    channels.len(),
                    record.len()
                ),
            ));
        }
        for (col, (cell, ch)) in record.iter().zip(channels.iter_mut()).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::input(
                    path,
                    format!(
                        "row {line}, column {} (byte {byte}): `{cell}` is not a number",
                        col + 1
                    ),
                )
            })?;
            ch.push(v);
        }
    }
    Ok(channels.unwrap_or_default())
}

fn read_wav(path: &Path) -> Result<MultiSignal> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?,
        (format, bits) => {
            return Err(CliError::input(
                path,
                format!(
                "unsupported WAV encoding: {bits}-bit {format:?}; need 16-bit PCM or 32-bit float"
            ),
            ))
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch.max(1)); n_ch];
    for frame in interleaved.chunks(n_ch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(MultiSignal {
        channels,
        fs: spec.sample_rate as f64,
    })
}

fn wav_error(path: &Path, e: hound::Error) -> CliError {
    match e {
        hound::Error::IoError(io) => CliError::io(path, io),
        other => CliError::input(path, other.to_string()),
    }
}

/// Writes a signal. CSV values use 17 significant digits so they read back
/// bit for bit; `header` names the columns.
pub fn write_signal(
    path: &Path,
    format: Format,
    signal: &MultiSignal,
    header: Option<&[&str]>,
    encoding: WavEncoding,
) -> Result<()> {
    match format {
        Format::Csv => write_csv(path, signal, header),
        Format::Wav => write_wav(path, signal, encoding),
    }
}

fn write_csv(path: &Path, signal: &MultiSignal, header: Option<&[&str]>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let err = |e: csv::Error| CliError::input(path, e.to_string());
    if let Some(h) = header {
        w.write_record(h).map_err(err)?;
    }
    let mut row = Vec::with_capacity(signal.channels.len());
    for n in 0..signal.samples() {
        row.clear();
        row.extend(signal.channels.iter().map(|ch| format!("{:.16e}", ch[n])));
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::io(path, e.into_error()))?
        .flush()
        .map_err(|e| CliError::io(path, e))
}

fn write_wav(path: &Path, signal: &MultiSignal, encoding: WavEncoding) -> Result<()> {
    if !(signal.fs.fract() == 0.0 && signal.fs >= 1.0 && signal.fs <= u32::MAX as f64) {
        return Err(CliError::usage(format!(
            "WAV needs an integer sampling rate, got {}",
            signal.fs
        )));
    }
    let (bits, sample_format) = match encoding {
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: signal.channels.len().max(1) as u16,
        sample_rate: signal.fs as u32,
        bits_per_sample: bits,
        sample_format,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for n in 0..signal.samples() {
        for ch in &signal.channels {
            let r = match encoding {
                WavEncoding::Pcm16 => {
                    w.write_sample((ch[n] * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                }
                WavEncoding::Float32 => w.write_sample(ch[n] as f32),
            };
            r.map_err(|e| wav_error(path, e))?;
        }
    }
    w.finalize().map_err(|e| wav_error(path, e))
}
