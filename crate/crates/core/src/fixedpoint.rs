//! Word-length simulation of the canceller: 16-bit signed I/O and 24-bit
//! registers, every intermediate rounded to nearest and saturated to its
//! format after each arithmetic step.
//!
//! Values are held as `f64` constrained to their format's grid. A product
//! of two grid values needs at most 48 significant bits, so it is exact in
//! `f64` before the explicit rounding; sums of grid values are exact as
//! well. The simulation is therefore bit-identical to an integer
//! implementation with the same formats. Divisions are carried out in
//! double precision and then quantised.
//!
//! The `c`/`d` accumulators of the frequency estimator span many decades,
//! so they use a block-floating representation: a 24-bit signed mantissa
//! with a free exponent.

use serde::Serialize;

use crate::dsp::{design_bandpass, FilterCoefficients, DEFAULT_DC_POLE};
use crate::experiments::HARDWARE_SKIP;
use crate::freq::{freq_hz, kappa_from_second_harmonic, D_FLOOR, EPSILON};
use crate::metrics::snr_out;
use crate::params::{map_params, AltParams};
use crate::rls::DIV_FLOOR;
use crate::siggen::ScenarioConfig;
use crate::{canceller::clamp_harmonic_count, Error, Result, Signal};

/// Signed fixed-point format with `int_bits` (sign included) and
/// `frac_bits` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QFormat {
    pub int_bits: u32,
    pub frac_bits: u32,
}

impl QFormat {
    pub const fn new(int_bits: u32, frac_bits: u32) -> Self {
        Self {
            int_bits,
            frac_bits,
        }
    }

    pub const fn bits(&self) -> u32 {
        self.int_bits + self.frac_bits
    }

    pub fn lsb(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max(&self) -> f64 {
        (self.int_bits as f64 - 1.0).exp2() - self.lsb()
    }

    pub fn min(&self) -> f64 {
        -(self.int_bits as f64 - 1.0).exp2()
    }

    /// Rounds to nearest (ties away from zero) and saturates.
    pub fn q(&self, x: f64) -> f64 {
        let scale = (self.frac_bits as f64).exp2();
        let raw = (x * scale).round();
        let lo = -(self.bits() as f64 - 1.0).exp2();
        let hi = (self.bits() as f64 - 1.0).exp2() - 1.0;
        if raw.is_nan() {
            return 0.0;
        }
        raw.clamp(lo, hi) / scale
    }

    /// Integer code of a grid value.
    pub fn raw(&self, x: f64) -> i64 {
        (self.q(x) * (self.frac_bits as f64).exp2()) as i64
    }
}

/// Rounds `x` to a `bits`-bit signed mantissa with a free exponent.
pub fn q_block_float(x: f64, bits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            0.0
        } else {
            0.0_f64.max(x.signum() * f64::MAX)
        };
    }
    // Mantissa in [0.5, 1) with bits - 1 fractional bits.
    let e = x.abs().log2().floor() as i32 + 1;
    let scale = ((bits as i32 - 1) - e) as f64;
    let m = (x * scale.exp2()).round();
    m / scale.exp2()
}

/// Formats of the internal quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Formats {
    pub io: QFormat,
    pub filter_coeff: QFormat,
    pub filter_state: QFormat,
    pub anf_state: QFormat,
    /// Mantissa width of the block-floating `c` and `d` accumulators.
    pub accumulator_bits: u32,
    /// `kappa`, `alpha_f`, `lambda_f`, `gamma`, `lambda_a`.
    pub kappa: QFormat,
    pub oscillator: QFormat,
    /// Squares and the quadratic form inside the oscillator gain control.
    pub gain: QFormat,
    pub r: QFormat,
    pub coefficient: QFormat,
    /// Running error and harmonic estimates.
    pub error: QFormat,
}

impl Formats {
    pub const DEFAULT: Self = Self {
        io: QFormat::new(1, 15),
        filter_coeff: QFormat::new(3, 21),
        filter_state: QFormat::new(8, 16),
        anf_state: QFormat::new(12, 12),
        accumulator_bits: 24,
        kappa: QFormat::new(2, 22),
        oscillator: QFormat::new(4, 20),
        gain: QFormat::new(8, 16),
        r: QFormat::new(16, 8),
        coefficient: QFormat::new(2, 22),
        error: QFormat::new(4, 20),
    };

    fn registers(&self) -> [(&'static str, u32); 10] {
        [
            ("filter_coeff", self.filter_coeff.bits()),
            ("filter_state", self.filter_state.bits()),
            ("anf_state", self.anf_state.bits()),
            ("accumulator_bits", self.accumulator_bits),
            ("kappa", self.kappa.bits()),
            ("oscillator", self.oscillator.bits()),
            ("gain", self.gain.bits()),
            ("r", self.r.bits()),
            ("coefficient", self.coefficient.bits()),
            ("error", self.error.bits()),
        ]
    }
}

impl Default for Formats {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Word-length profile of the fixed-point engine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedConfig {
    pub io_bits: u32,
    pub register_bits: u32,
    pub fs: f64,
    pub m_prime: usize,
    pub formats: Formats,
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            io_bits: 16,
            register_bits: 24,
            fs: 1250.0,
            m_prime: 3,
            formats: Formats::DEFAULT,
        }
    }
}

impl FixedConfig {
    /// Default word lengths at a different rate / harmonic count.
    pub fn for_params(params: &AltParams) -> Self {
        Self {
            fs: params.fs,
            m_prime: params.m_prime,
            ..Self::default()
        }
    }

    /// 16-bit I/O and 24-bit registers.
    pub fn is_reference_profile(&self) -> bool {
        self.io_bits == 16 && self.register_bits == 24
    }

    pub fn validate(&self) -> Result<()> {
        if self.formats.io.bits() != self.io_bits {
            return Err(Error::param(
                "io",
                format!(
                    "format has {} bits, io_bits is {}",
                    self.formats.io.bits(),
                    self.io_bits
                ),
            ));
        }
        for (name, bits) in self.formats.registers() {
            if bits > self.register_bits {
                return Err(Error::param(
                    name,
                    format!(
                        "{bits} bits exceed the {}-bit register width",
                        self.register_bits
                    ),
                ));
            }
        }
        if self.formats.kappa.int_bits < 2 {
            return Err(Error::param(
                "kappa",
                "needs 2 integer bits to hold [-1, 1]",
            ));
        }
        if !self.is_reference_profile() {
            log::warn!(
                "experimental word-length profile: {}-bit I/O, {}-bit registers",
                self.io_bits,
                self.register_bits
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct FixedRls {
    r1: f64,
    r4: f64,
    b_hat: f64,
    c_hat: f64,
}

#[derive(Debug, Clone, Copy)]
struct FixedOsc {
    u: f64,
    u_prime: f64,
}

/// Fixed-point counterpart of [`crate::Canceller`].
#[derive(Debug, Clone)]
pub struct FixedCanceller {
    cfg: FixedConfig,
    second_harmonic: bool,
    bandpass: FilterCoefficients,
    regs: Vec<[f64; 2]>,
    prev: f64,
    dc: Option<(f64, f64, f64)>,
    // Frequency estimator.
    f_hist: [f64; 2],
    c: f64,
    d: f64,
    kappa_t: f64,
    kappa_f: f64,
    alpha_f: f64,
    lambda_f: f64,
    gamma: f64,
    alpha_sched: (f64, f64),
    lambda_sched: (f64, f64),
    kappa_out: f64,
    // Harmonics.
    kappas: Vec<f64>,
    osc: Vec<FixedOsc>,
    rls: Vec<FixedRls>,
    lambda_a: f64,
}

impl FixedCanceller {
    pub fn new(params: &AltParams, cfg: &FixedConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.fs != params.fs {
            return Err(Error::RateMismatch {
                signal: cfg.fs,
                params: params.fs,
            });
        }
        if cfg.m_prime != params.m_prime {
            return Err(Error::param(
                "m_prime",
                format!(
                    "fixed-point profile has {} harmonics, params {}",
                    cfg.m_prime, params.m_prime
                ),
            ));
        }
        let a = map_params(params)?;
        let f = &cfg.formats;
        let (lo, hi) = params.band();
        let mut bandpass = design_bandpass(params.fs, lo, hi)?;
        for s in &mut bandpass.sections {
            for v in [&mut s.b0, &mut s.b1, &mut s.b2, &mut s.a1, &mut s.a2] {
                *v = f.filter_coeff.q(*v);
            }
        }
        let k = |v: f64| f.kappa.q(v);
        let m = cfg.m_prime;
        Ok(Self {
            cfg: cfg.clone(),
            second_harmonic: params.second_harmonic_mode,
            regs: vec![[0.0; 2]; bandpass.sections.len()],
            bandpass,
            prev: 0.0,
            dc: params.dc_block.then(|| (k(DEFAULT_DC_POLE), 0.0, 0.0)),
            f_hist: [0.0; 2],
            c: q_block_float(EPSILON, f.accumulator_bits),
            d: q_block_float(EPSILON, f.accumulator_bits),
            kappa_t: 0.0,
            kappa_f: 0.0,
            alpha_f: k(a.alpha_0),
            lambda_f: k(a.lambda_0),
            gamma: k(a.gamma),
            alpha_sched: (k(a.alpha_st), k(a.alpha_inf)),
            lambda_sched: (k(a.lambda_st), k(a.lambda_inf)),
            kappa_out: 0.0,
            kappas: vec![0.0; m],
            osc: vec![
                FixedOsc {
                    u: 0.0,
                    u_prime: f.oscillator.q(1.0),
                };
                m
            ],
            rls: vec![
                FixedRls {
                    r1: 0.0,
                    r4: 0.0,
                    b_hat: 0.0,
                    c_hat: 0.0,
                };
                m
            ],
            lambda_a: k(a.lambda_a),
        })
    }

    pub fn config(&self) -> &FixedConfig {
        &self.cfg
    }

    /// Current fundamental `cos(omega)` estimate (after the second-harmonic
    /// mapping when that mode is on).
    #[allow(clippy::misnamed_getters)]
    pub fn kappa_f(&self) -> f64 {
        self.kappa_out
    }

    pub fn freq_hz(&self) -> f64 {
        freq_hz(self.kappa_out, self.cfg.fs)
    }

    /// One 16-bit input code in, one 16-bit output code out.
    pub fn process_sample(&mut self, x_q: i16) -> i16 {
        let io = self.cfg.formats.io;
        let y = self.process_value(x_q as f64 * io.lsb());
        io.raw(y) as i16
    }

    /// Like [`Self::process_sample`] on a value already on the I/O grid
    /// (inputs are quantised first).
    pub fn process_value(&mut self, x: f64) -> f64 {
        let f = self.cfg.formats;
        let x = f.io.q(x);
        let x_in = match self.dc.as_mut() {
            Some((pole, x1, y1)) => {
                let y = f.filter_state.q(x - *x1 + f.filter_state.q(*pole * *y1));
                *x1 = x;
                *y1 = y;
                y
            }
            None => x,
        };

        // Bandpass (transposed direct form II) and first difference.
        let fs_q = |v: f64| f.filter_state.q(v);
        let mut v = x_in;
        for (s, r) in self.bandpass.sections.iter().zip(self.regs.iter_mut()) {
            let y = fs_q(fs_q(s.b0 * v) + r[0]);
            r[0] = fs_q(fs_q(s.b1 * v) - fs_q(s.a1 * y) + r[1]);
            r[1] = fs_q(fs_q(s.b2 * v) - fs_q(s.a2 * y));
            v = y;
        }
        let x_d = fs_q(v - self.prev);
        self.prev = v;

        // Lattice frequency estimator.
        let kq = |v: f64| f.kappa.q(v);
        let aq = |v: f64| f.anf_state.q(v);
        let bf = |v: f64| q_block_float(v, f.accumulator_bits);
        let [f1, f2] = self.f_hist;
        let g1 = kq(self.kappa_f * kq(1.0 + self.alpha_f));
        let f0 = aq(x_d + aq(g1 * f1) - aq(self.alpha_f * f2));
        // Multiply-accumulate with a single rounding into the register.
        self.c = bf(self.lambda_f * self.c + f1 * (f0 + f2));
        self.d = bf(self.lambda_f * self.d + 2.0 * f1 * f1);
        if self.d >= D_FLOOR {
            self.kappa_t = kq((self.c / self.d).clamp(-1.0, 1.0));
        }
        self.kappa_f = kq(kq(self.gamma * self.kappa_f) + kq(kq(1.0 - self.gamma) * self.kappa_t));
        let (ast, ainf) = self.alpha_sched;
        self.alpha_f = kq(kq(ast * self.alpha_f) + kq(kq(1.0 - ast) * ainf));
        let (lst, linf) = self.lambda_sched;
        self.lambda_f = kq(kq(lst * self.lambda_f) + kq(kq(1.0 - lst) * linf));
        self.f_hist = [f0, f1];

        self.kappa_out = if self.second_harmonic {
            kq(kappa_from_second_harmonic(self.kappa_f))
        } else {
            self.kappa_f
        };

        // Harmonic controls by the Chebyshev recurrence.
        let k1 = self.kappa_out;
        let (mut prev, mut cur) = (1.0, k1);
        for slot in self.kappas.iter_mut() {
            *slot = cur.clamp(-1.0, 1.0);
            let next = kq(kq(2.0 * k1 * cur) - prev);
            prev = cur;
            cur = next;
        }

        let active = clamp_harmonic_count(self.kappa_out, self.cfg.m_prime);
        let oq = |v: f64| f.oscillator.q(v);
        let eq = |v: f64| f.error.q(v);
        let rq = |v: f64| f.r.q(v);
        let cq = |v: f64| f.coefficient.q(v);
        let mut e = x;
        for k in 0..active {
            let kappa = self.kappas[k];
            let o = &mut self.osc[k];
            let s1 = oq(kappa * (o.u + o.u_prime));
            let s2 = o.u;
            o.u = oq(s1 - o.u_prime);
            o.u_prime = oq(s1 + s2);
            if (kappa + 1.0).abs() >= 1e-12 && (1.0 - kappa).abs() >= 1e-12 {
                let ratio = kq((kappa - 1.0) / (kappa + 1.0));
                let gq = |v: f64| f.gain.q(v);
                let inv = gq(gq(o.u * o.u) - gq(ratio * gq(o.u_prime * o.u_prime)));
                let mut g = oq(1.5 - inv);
                if g < 0.0 {
                    g = 1.0;
                }
                o.u = oq(g * o.u);
                o.u_prime = oq(g * o.u_prime);
            }
            let (u, up) = (o.u, o.u_prime);

            let s = &mut self.rls[k];
            let h = eq(eq(s.b_hat * u) + eq(s.c_hat * up));
            e = eq(e - h);
            s.r1 = rq(rq(self.lambda_a * s.r1) + rq(u * u));
            s.r4 = rq(rq(self.lambda_a * s.r4) + rq(up * up));
            if s.r1 >= DIV_FLOOR {
                s.b_hat = cq(s.b_hat + cq(u * e / s.r1));
            }
            if s.r4 >= DIV_FLOOR {
                s.c_hat = cq(s.c_hat + cq(up * e / s.r4));
            }
        }
        f.io.q(e)
    }
}

/// Quantises `x` to signed 16-bit codes with saturation.
pub fn to_i16(x: &[f64]) -> Vec<i16> {
    let io = Formats::DEFAULT.io;
    x.iter().map(|&v| io.raw(v) as i16).collect()
}

/// Converts 16-bit codes back to `[-1, 1)`.
pub fn from_i16(x: &[i16]) -> Vec<f64> {
    x.iter().map(|&v| v as f64 / 32768.0).collect()
}

/// Runs a fresh fixed-point canceller over `signal` (values in `[-1, 1)`);
/// the output is on the 16-bit grid. Also returns the fundamental trace.
pub fn fixed_process_stream(
    params: &AltParams,
    cfg: &FixedConfig,
    signal: &Signal,
) -> Result<(Signal, Vec<f64>)> {
    if signal.fs != params.fs {
        return Err(Error::RateMismatch {
            signal: signal.fs,
            params: params.fs,
        });
    }
    let mut c = FixedCanceller::new(params, cfg)?;
    let mut freq = Vec::with_capacity(signal.len());
    let out = signal
        .samples
        .iter()
        .map(|&x| {
            let y = c.process_value(x);
            freq.push(c.freq_hz());
            y
        })
        .collect();
    Ok((Signal::new(out, params.fs), freq))
}

/// Engine used for the second leg of [`fp_vs_float_report`].
#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    Float,
    Fixed(FixedConfig),
}

/// Full-precision against second-engine SNR_out on identical input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityReport {
    pub snr_float: f64,
    pub snr_fixed: f64,
    /// `snr_float - snr_fixed`.
    pub gap: f64,
}

/// Scale applied to scenario inputs before quantisation: peak at half of
/// full scale.
pub const INPUT_PEAK: f64 = 0.5;

/// Generates `scenario`, scales it to [`INPUT_PEAK`], quantises it to 16
/// bits and runs both engines on that same input. SNR_out is measured
/// against the equally scaled clean carrier from `skip` seconds on.
pub fn fp_vs_float_report(
    params: &AltParams,
    scenario: &ScenarioConfig,
    engine: &Engine,
    skip: f64,
) -> Result<FidelityReport> {
    let s = scenario.generate()?;
    let peak = s.mixed.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = if peak > 0.0 { INPUT_PEAK / peak } else { 1.0 };
    let io = Formats::DEFAULT.io;
    let input: Vec<f64> = s.mixed.samples.iter().map(|v| io.q(g * v)).collect();
    let clean: Vec<f64> = s.clean.samples.iter().map(|v| g * v).collect();
    let input = Signal::new(input, scenario.fs);

    let (float_out, _) = crate::process_stream(params, &input, false)?;
    let snr_float = snr_out(&clean, &float_out.samples, scenario.fs, skip)?;
    let snr_fixed = match engine {
        Engine::Float => {
            let (again, _) = crate::process_stream(params, &input, false)?;
            snr_out(&clean, &again.samples, scenario.fs, skip)?
        }
        Engine::Fixed(cfg) => {
            let (fixed_out, _) = fixed_process_stream(params, cfg, &input)?;
            snr_out(&clean, &fixed_out.samples, scenario.fs, skip)?
        }
    };
    Ok(FidelityReport {
        snr_float,
        snr_fixed,
        gap: snr_float - snr_fixed,
    })
}

/// The three word-length test replicas with the default profile.
pub fn hardware_fidelity(seed: u64) -> Result<Vec<FidelityReport>> {
    let params = crate::experiments::hardware_params();
    let engine = Engine::Fixed(FixedConfig::default());
    (1..=3)
        .map(|t| {
            let cfg = crate::experiments::hardware_test_scenario(t, seed);
            fp_vs_float_report(&params, &cfg, &engine, HARDWARE_SKIP)
        })
        .collect()
}

/// Largest `|kappa_f(fixed) - kappa_f(float)|` after `skip` seconds, both
/// engines fed the same scaled, quantised input.
pub fn kappa_trace_gap(
    params: &AltParams,
    cfg: &FixedConfig,
    scenario: &ScenarioConfig,
    skip: f64,
) -> Result<f64> {
    let s = scenario.generate()?;
    let peak = s.mixed.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let g = if peak > 0.0 { INPUT_PEAK / peak } else { 1.0 };
    let io = cfg.formats.io;
    let mut float = crate::Canceller::new(params)?;
    let mut fixed = FixedCanceller::new(params, cfg)?;
    let start = (skip * params.fs).round() as usize;
    let mut worst = 0.0f64;
    for (i, v) in s.mixed.samples.iter().enumerate() {
        let x = io.q(g * v);
        float.process_sample(x)?;
        fixed.process_value(x);
        if i >= start {
            worst = worst.max((float.kappa_f() - fixed.kappa_f()).abs());
        }
    }
    Ok(worst)
}
