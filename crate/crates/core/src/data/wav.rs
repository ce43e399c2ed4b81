//! RIFF/WAVE files holding 16-bit linear PCM, mono.

use std::path::Path;

use crate::dsp::{pcm16_to_unit, Encoding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavFile {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl WavFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let data_len = (self.samples.len() * 2) as u32;
        let mut out = Vec::with_capacity(44 + data_len as usize);
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data_len).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&self.sample_rate.to_le_bytes());
        out.extend_from_slice(&(self.sample_rate * 2).to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&data_len.to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    /// Parses the chunk list, skipping chunks other than `fmt ` and `data`.
    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let u16_at = |o: usize| u16::from_le_bytes([b[o], b[o + 1]]);
        let u32_at = |o: usize| u32::from_le_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
        if b.len() < 12 || &b[0..4] != b"RIFF" {
            return Err(Error::format(0, "missing RIFF header"));
        }
        if &b[8..12] != b"WAVE" {
            return Err(Error::format(8, "RIFF form type is not WAVE"));
        }
        let mut pos = 12;
        let mut rate = None;
        while pos + 8 <= b.len() {
            let id = &b[pos..pos + 4];
            let len = u32_at(pos + 4) as usize;
            let body = pos + 8;
            if id == b"fmt " {
                if len < 16 || body + 16 > b.len() {
                    return Err(Error::format(pos as u64, "fmt chunk too short"));
                }
                let tag = u16_at(body);
                if tag != 1 {
                    return Err(Error::format(body as u64, format!("unsupported format tag {tag}; only linear PCM is accepted")));
                }
                let channels = u16_at(body + 2);
                if channels != 1 {
                    return Err(Error::format((body + 2) as u64, format!("expected mono audio, found {channels} channels")));
                }
                let bits = u16_at(body + 14);
                if bits != 16 {
                    return Err(Error::format((body + 14) as u64, format!("unsupported bit depth {bits}; expected 16")));
                }
                rate = Some(u32_at(body + 4));
            } else if id == b"data" {
                let rate = rate.ok_or_else(|| Error::format(pos as u64, "data chunk before fmt chunk"))?;
                if body + len > b.len() {
                    return Err(Error::format(pos as u64, format!("data chunk claims {len} bytes, {} available", b.len() - body)));
                }
                if len % 2 != 0 {
                    return Err(Error::format(pos as u64, "odd data length for 16-bit samples"));
                }
                let samples = b[body..body + len].chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
                return Ok(WavFile { sample_rate: rate, samples });
            }
            pos = body + len + (len & 1);
        }
        Err(Error::format(pos as u64, "no data chunk"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

/// Splits PCM samples into `chunk`-long token sequences; a trailing
/// remainder shorter than `chunk` is dropped.
pub fn encode_chunks(samples: &[i16], chunk: usize, encoding: Encoding) -> Result<Vec<Vec<u8>>> {
    if chunk == 0 {
        return Err(Error::arg("chunk length must be positive"));
    }
    samples
        .chunks_exact(chunk)
        .map(|c| c.iter().map(|&s| encoding.encode(pcm16_to_unit(s))).collect())
        .collect()
}

/// Reads a WAV file and encodes it into `⌊S/chunk⌋` token sequences.
pub fn ingest_wav(path: &Path, chunk: usize, encoding: Encoding) -> Result<Vec<Vec<u8>>> {
    encode_chunks(&WavFile::read(path)?.samples, chunk, encoding)
}
