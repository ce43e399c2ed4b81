//! Audio preprocessing and spectral analysis.

pub mod fft;
pub mod mulaw;
pub mod spectral;

pub use fft::{circular_convolve, fft, ifft, ComplexVec, FftPlan};
pub use mulaw::{pcm16_to_unit, unit_to_pcm16, Encoding, LinearCodec, MuLawCodec, VOCAB};
pub use spectral::{hz_to_mel, mel_spectrogram, mel_to_hz, power_spectrum, stft, MelFilterbank, StftConfig};
