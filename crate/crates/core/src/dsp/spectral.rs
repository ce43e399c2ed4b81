//! Short-time Fourier transform and mel filterbanks.

use crate::dsp::fft::{ComplexVec, FftPlan};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frame length, hop and analysis window.
#[derive(Debug, Clone)]
pub struct StftConfig<T> {
    n: usize,
    hop: usize,
    window: Vec<T>,
}

impl<T: Scalar> StftConfig<T> {
    pub fn new(n: usize, hop: usize, window: Vec<T>) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::arg(format!("frame length {n} is not a power of two")));
        }
        if hop == 0 || hop > n {
            return Err(Error::arg(format!("hop must be in 1..={n}, got {hop}")));
        }
        if window.len() != n {
            return Err(Error::arg("window length must equal the frame length"));
        }
        Ok(StftConfig { n, hop, window })
    }

    /// Hann window `w_j = 0.5 (1 − cos(2πj / (n − 1)))`.
    pub fn hann(n: usize, hop: usize) -> Result<Self> {
        let denom = (n.max(2) - 1) as f64;
        let w = (0..n)
            .map(|j| T::of(0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / denom).cos())))
            .collect();
        Self::new(n, hop, w)
    }

    pub fn rectangular(n: usize, hop: usize) -> Result<Self> {
        Self::new(n, hop, vec![T::one(); n])
    }

    pub fn frame_len(&self) -> usize {
        self.n
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Number of frames for a signal of `len` samples: `⌊(len − n)/h⌋ + 1`.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.n {
            0
        } else {
            (len - self.n) / self.hop + 1
        }
    }
}

/// `f̂_{m,k} = Σ_j w_j f_{j + m h} exp(−2πi kj/n)`, one [`ComplexVec`] per frame.
pub fn stft<T: Scalar>(signal: &[T], cfg: &StftConfig<T>) -> Result<Vec<ComplexVec<T>>> {
    if signal.len() < cfg.n {
        return Err(Error::arg(format!(
            "signal has {} samples, shorter than one frame of {}",
            signal.len(),
            cfg.n
        )));
    }
    let plan = FftPlan::new(cfg.n)?;
    let frames = cfg.frame_count(signal.len());
    Ok((0..frames)
        .map(|m| {
            let start = m * cfg.hop;
            let mut frame = ComplexVec::from_real(
                signal[start..start + cfg.n]
                    .iter()
                    .zip(&cfg.window)
                    .map(|(&s, &w)| s * w)
                    .collect(),
            );
            plan.forward_in_place(&mut frame.re, &mut frame.im);
            frame
        })
        .collect())
}

/// One-sided power spectrum `|f̂_k|²` for `k = 0..=n/2`.
pub fn power_spectrum<T: Scalar>(frame: &ComplexVec<T>) -> Vec<T> {
    (0..=frame.len() / 2).map(|k| frame.norm_sqr(k)).collect()
}

/// `m = 2595 log10(1 + f/700)`.
pub fn hz_to_mel(f_hz: f64) -> Result<f64> {
    if !(f_hz >= 0.0) {
        return Err(Error::arg(format!("frequency must be non-negative, got {f_hz}")));
    }
    Ok(2595.0 * (1.0 + f_hz / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with corner frequencies equally spaced on the mel scale.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    bands: usize,
    bins: usize,
    sample_rate: f64,
    centers_mel: Vec<f64>,
    weights: Vec<T>,
}

impl<T: Scalar> MelFilterbank<T> {
    /// Filterbank over the `n_fft/2 + 1` one-sided bins, spanning `[f_min, f_max]`.
    pub fn new(bands: usize, n_fft: usize, sample_rate: f64, f_min: f64, f_max: f64) -> Result<Self> {
        if bands == 0 {
            return Err(Error::arg("mel filterbank needs at least one band"));
        }
        if !(sample_rate > 0.0) || !(f_max > f_min) || f_max > sample_rate / 2.0 + 1e-9 {
            return Err(Error::arg(format!(
                "invalid frequency range [{f_min}, {f_max}] for sample rate {sample_rate}"
            )));
        }
        let bins = n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(f_min)?, hz_to_mel(f_max)?);
        let corners: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
            .collect();
        let mut weights = vec![T::zero(); bands * bins];
        for b in 0..bands {
            let (left, center, right) = (corners[b], corners[b + 1], corners[b + 2]);
            for k in 0..bins {
                let f = k as f64 * sample_rate / n_fft as f64;
                let w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                weights[b * bins + k] = T::of(w);
            }
        }
        let centers_mel = corners[1..=bands]
            .iter()
            .map(|&f| hz_to_mel(f).expect("corner frequencies are non-negative"))
            .collect();
        Ok(MelFilterbank {
            bands,
            bins,
            sample_rate,
            centers_mel,
            weights,
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn centers_mel(&self) -> &[f64] {
        &self.centers_mel
    }

    pub fn filter(&self, band: usize) -> &[T] {
        &self.weights[band * self.bins..(band + 1) * self.bins]
    }

    /// Applies the filterbank to a one-sided power spectrum.
    pub fn apply(&self, power: &[T]) -> Result<Vec<T>> {
        if power.len() != self.bins {
            return Err(Error::arg(format!(
                "power spectrum has {} bins, filterbank expects {}",
                power.len(),
                self.bins
            )));
        }
        Ok((0..self.bands)
            .map(|b| self.filter(b).iter().zip(power).map(|(&w, &p)| w * p).sum())
            .collect())
    }
}

/// Mel spectrogram `[frames × bands]`: filterbank times the power spectrum of each frame.
pub fn mel_spectrogram<T: Scalar>(frames: &[ComplexVec<T>], bank: &MelFilterbank<T>) -> Result<Vec<Vec<T>>> {
    frames.iter().map(|f| bank.apply(&power_spectrum(f))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(len: usize, cycles_per_frame: f64, n: usize) -> Vec<f64> {
        (0..len)
            .map(|t| (2.0 * PI * cycles_per_frame * t as f64 / n as f64).sin())
            .collect()
    }

    #[test]
    fn whole_period_sine_hits_one_bin() {
        let n = 64;
        let cfg = StftConfig::<f64>::rectangular(n, n).unwrap();
        let frames = stft(&sine(4 * n, 5.0, n), &cfg).unwrap();
        assert_eq!(frames.len(), 4);
        for f in &frames {
            for k in 0..n {
                let mag = f.abs(k);
                if k == 5 || k == n - 5 {
                    assert!((mag - n as f64 / 2.0).abs() < 1e-9);
                } else {
                    assert!(mag < 1e-9, "bin {k}: {mag}");
                }
            }
        }
    }

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let cfg = StftConfig::<f64>::hann(32, 8).unwrap();
        let frames = stft(&vec![0.0; 100], &cfg).unwrap();
        assert_eq!(frames.len(), (100 - 32) / 8 + 1);
        assert!(frames.iter().all(|f| f.re.iter().chain(&f.im).all(|&v| v == 0.0)));
    }

    #[test]
    fn hann_reduces_leakage_for_fractional_period() {
        let n = 64;
        let x = sine(n, 5.5, n);
        let leak = |cfg: &StftConfig<f64>| {
            let f = &stft(&x, cfg).unwrap()[0];
            let p = power_spectrum(f);
            let total: f64 = p.iter().sum();
            let near: f64 = p[4..=7].iter().sum();
            let peak = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            (1.0 - near / total, peak)
        };
        let (rect_leak, _) = leak(&StftConfig::rectangular(n, n).unwrap());
        let (hann_leak, hann_peak) = leak(&StftConfig::hann(n, n).unwrap());
        assert!((5..=6).contains(&hann_peak));
        assert!(hann_leak < rect_leak, "hann {hann_leak} rect {rect_leak}");
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::<f64>::hann(48, 8).is_err());
        assert!(StftConfig::<f64>::hann(32, 0).is_err());
        assert!(StftConfig::<f64>::hann(32, 33).is_err());
        let cfg = StftConfig::<f64>::hann(32, 32).unwrap();
        assert!(stft(&[0.0; 31], &cfg).is_err());
    }

    #[test]
    fn mel_scale_values() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        assert!((hz_to_mel(700.0).unwrap() - 2595.0 * 2f64.log10()).abs() < 1e-12);
        assert!((hz_to_mel(700.0).unwrap() - 781.17).abs() < 1e-2);
        assert!(hz_to_mel(-1.0).is_err());
        assert!((mel_to_hz(hz_to_mel(1234.5).unwrap()) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape_and_monotone_centers() {
        let bank = MelFilterbank::<f64>::new(64, 512, 16000.0, 0.0, 8000.0).unwrap();
        assert_eq!(bank.bins(), 257);
        assert!(bank.centers_mel().windows(2).all(|w| w[0] < w[1]));
        for b in 0..bank.bands() {
            assert!(bank.filter(b).iter().all(|&w| w >= 0.0));
        }
        let frames = vec![ComplexVec::<f64>::zeros(512); 3];
        let mel = mel_spectrogram(&frames, &bank).unwrap();
        assert_eq!(mel.len(), 3);
        assert!(mel.iter().flatten().all(|&v| v == 0.0));
    }
}
