//! Amplitude quantisation to 8-bit codes: μ-law companding and plain linear binning.
//!
//! Both quantisers share the same back end: a value `y ∈ [-1, 1]` maps to
//! `round((y + 1) / 2 · (2^bits − 1))`, and code `q` maps back to
//! `2q / (2^bits − 1) − 1`.

use crate::error::{Error, Result};

/// Number of distinct codes produced by the 8-bit quantisers.
pub const VOCAB: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuLawCodec {
    pub mu: u32,
    pub bits: u32,
}

impl Default for MuLawCodec {
    fn default() -> Self {
        MuLawCodec { mu: 255, bits: 8 }
    }
}

fn levels(bits: u32) -> f64 {
    ((1u64 << bits) - 1) as f64
}

fn quantize(y: f64, bits: u32) -> u8 {
    let q = ((y + 1.0) * 0.5 * levels(bits)).round();
    q.clamp(0.0, levels(bits)) as u8
}

fn dequantize(code: u8, bits: u32) -> f64 {
    2.0 * code as f64 / levels(bits) - 1.0
}

fn check_input(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::arg("cannot quantise NaN"));
    }
    // out-of-range amplitudes saturate
    Ok(x.clamp(-1.0, 1.0))
}

impl MuLawCodec {
    pub fn new(mu: u32) -> Result<Self> {
        if mu == 0 {
            return Err(Error::arg("mu must be positive"));
        }
        Ok(MuLawCodec { mu, bits: 8 })
    }

    /// Continuous companding curve `sgn(x) ln(1 + μ|x|) / ln(1 + μ)`.
    pub fn compress(&self, x: f64) -> f64 {
        let mu = self.mu as f64;
        x.signum() * (mu * x.abs()).ln_1p() / mu.ln_1p()
    }

    /// Inverse curve `sgn(y) ((1 + μ)^|y| − 1) / μ`.
    pub fn expand(&self, y: f64) -> f64 {
        let mu = self.mu as f64;
        y.signum() * ((y.abs() * mu.ln_1p()).exp_m1()) / mu
    }

    pub fn encode(&self, x: f64) -> Result<u8> {
        let x = check_input(x)?;
        let y = if x == 0.0 { 0.0 } else { self.compress(x) };
        Ok(quantize(y, self.bits))
    }

    pub fn decode(&self, code: u8) -> f64 {
        self.expand(dequantize(code, self.bits))
    }

    /// Width of one quantisation bin in the companded domain.
    pub fn step(&self) -> f64 {
        2.0 / levels(self.bits)
    }
}

/// Uniform 8-bit quantiser over `[-1, 1]`, sharing the μ-law binning rule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinearCodec;

impl LinearCodec {
    pub fn encode(&self, x: f64) -> Result<u8> {
        Ok(quantize(check_input(x)?, 8))
    }

    pub fn decode(&self, code: u8) -> f64 {
        dequantize(code, 8)
    }
}

/// Amplitude encoding applied to PCM audio before modelling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Encoding {
    MuLaw(MuLawCodec),
    Linear,
}

impl Encoding {
    pub fn encode(&self, x: f64) -> Result<u8> {
        match self {
            Encoding::MuLaw(c) => c.encode(x),
            Encoding::Linear => LinearCodec.encode(x),
        }
    }

    pub fn decode(&self, code: u8) -> f64 {
        match self {
            Encoding::MuLaw(c) => c.decode(code),
            Encoding::Linear => LinearCodec.decode(code),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Encoding::MuLaw(_) => "mu_law",
            Encoding::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mu_law" => Ok(Encoding::MuLaw(MuLawCodec::default())),
            "linear" => Ok(Encoding::Linear),
            other => Err(Error::arg(format!("unknown encoding '{other}'"))),
        }
    }

    /// Code whose decoded amplitude is closest to silence.
    pub fn zero_code(&self) -> u8 {
        self.encode(0.0).expect("0 is a valid amplitude")
    }
}

/// Maps a signed 16-bit PCM sample onto `[-1, 1)`.
pub fn pcm16_to_unit(s: i16) -> f64 {
    s as f64 / 32768.0
}

pub fn unit_to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}
