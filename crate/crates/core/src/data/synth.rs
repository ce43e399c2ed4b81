//! Synthetic K-class tone corpus.
//!
//! Class `k` has carrier frequency `200 + 220k` Hz (±2 % jitter per example)
//! and a family chosen by `k mod 3`: plain sine, amplitude-modulated sine or
//! frequency-modulated sine. Phase is random and the peak amplitude is drawn
//! from `U[0.5, 0.9]`.

use std::f64::consts::PI;

use crate::dsp::Encoding;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const SAMPLE_RATE: u32 = 8000;
pub const MAX_CLASSES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Sine,
    Am,
    Fm,
}

impl Family {
    pub fn of_class(k: usize) -> Self {
        match k % 3 {
            0 => Family::Sine,
            1 => Family::Am,
            _ => Family::Fm,
        }
    }
}

pub fn class_frequency(k: usize) -> f64 {
    200.0 + 220.0 * k as f64
}

/// One waveform of class `k` with samples in `[-0.9, 0.9]`.
pub fn synth_waveform(k: usize, length: usize, sample_rate: u32, rng: &mut SeededRng) -> Vec<f64> {
    let sr = sample_rate as f64;
    let f = class_frequency(k) * rng.uniform_range(0.98, 1.02);
    let phase = rng.uniform_range(0.0, 2.0 * PI);
    let amp = rng.uniform_range(0.5, 0.9);
    let mod_f = rng.uniform_range(20.0, 40.0);
    let mod_phase = rng.uniform_range(0.0, 2.0 * PI);
    let family = Family::of_class(k);
    (0..length)
        .map(|i| {
            let t = i as f64 / sr;
            let m = 2.0 * PI * mod_f * t + mod_phase;
            match family {
                Family::Sine => amp * (2.0 * PI * f * t + phase).sin(),
                Family::Am => amp * (0.6 + 0.4 * m.sin()) * (2.0 * PI * f * t + phase).sin(),
                Family::Fm => amp * (2.0 * PI * f * t + phase + 3.0 * m.sin()).sin(),
            }
        })
        .collect()
}

/// `count` labelled token sequences with labels cycling through the classes.
pub fn synth_corpus(classes: usize, count: usize, length: usize, encoding: Encoding, seed: u64) -> Result<Vec<(usize, Vec<u8>)>> {
    if classes == 0 || classes > MAX_CLASSES {
        return Err(Error::arg(format!("class count must be in 1..={MAX_CLASSES}, got {classes}")));
    }
    if length == 0 || count == 0 {
        return Err(Error::arg("count and length must be positive"));
    }
    let root = SeededRng::new(seed).fork_named("synth");
    (0..count)
        .map(|i| {
            let k = i % classes;
            let wave = synth_waveform(k, length, SAMPLE_RATE, &mut root.fork(i as u64));
            let tokens = wave.iter().map(|&x| encoding.encode(x)).collect::<Result<Vec<u8>>>()?;
            Ok((k, tokens))
        })
        .collect()
}
