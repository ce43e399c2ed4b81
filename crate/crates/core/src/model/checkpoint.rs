//! Binary checkpoints.
//!
//! ```text
//! magic "PFMRCKPT" | u32 version | u32 len, config text
//! u32 tensor count, then per tensor:
//!   u32 len, name | u8 dtype | u32 ndim | u64 dims… | little-endian payload
//! ```
//! All integers are little-endian.

use std::path::Path;

use super::config::ModelConfig;
use super::net::{build_model, Poolformer};
use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::rng::SeededRng;
use crate::scalar::{DType, Scalar};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"PFMRCKPT";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(cfg: &ModelConfig, params: &ParamStore<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let text = cfg.to_text();
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(T::DTYPE.code());
        out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.pos as u64, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let at = self.pos;
        let n = self.u32(what)? as usize;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::format(at as u64, format!("{what} is not UTF-8")))
    }
}

fn read_tensor<T: Scalar>(r: &mut Reader<'_>) -> Result<(String, Tensor<T>)> {
    let name = r.string("tensor name")?;
    let at = r.pos;
    let code = r.take(1, "dtype")?[0];
    let dtype = DType::from_code(code).ok_or_else(|| Error::format(at as u64, format!("unknown dtype code {code}")))?;
    let ndim = r.u32("rank")? as usize;
    let mut shape = Vec::with_capacity(ndim.min(8));
    for _ in 0..ndim {
        shape.push(r.u64("dimension")? as usize);
    }
    let at = r.pos;
    let n = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(at as u64, "tensor size overflows"))?;
    let bytes = r.take(
        n.checked_mul(dtype.size_of()).ok_or_else(|| Error::format(at as u64, "tensor size overflows"))?,
        "tensor payload",
    )?;
    let data: Vec<T> = match dtype {
        DType::F32 => bytes.chunks_exact(4).map(|c| T::of(f32::read_le(c) as f64)).collect(),
        DType::F64 => bytes.chunks_exact(8).map(|c| T::of(f64::read_le(c))).collect(),
    };
    Ok((name, Tensor::new(shape, data)?))
}

/// Parses a checkpoint and rebuilds the model it describes.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(Poolformer, ParamStore<T>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::format(0, "not a checkpoint (bad magic)"));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::format(8, format!("unsupported checkpoint version {version}")));
    }
    let at = r.pos;
    let text = r.string("config")?;
    let cfg = ModelConfig::from_text(&text).map_err(|e| Error::format(at as u64, format!("bad config: {e}")))?;
    let (model, mut store) = build_model::<T>(&cfg, SeededRng::new(0))?;
    let at = r.pos;
    let count = r.u32("tensor count")? as usize;
    if count != store.len() {
        return Err(Error::format(at as u64, format!("expected {} tensors for this config, found {count}", store.len())));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let at = r.pos;
        let (name, t) = read_tensor::<T>(&mut r)?;
        if name != store.names()[i] {
            return Err(Error::format(at as u64, format!("expected tensor '{}', found '{name}'", store.names()[i])));
        }
        values.push(t);
    }
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos as u64, "trailing bytes after the last tensor"));
    }
    store.set_all(values)?;
    Ok((model, store))
}

pub fn save_checkpoint<T: Scalar>(path: &Path, cfg: &ModelConfig, params: &ParamStore<T>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(cfg, params))?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Poolformer, ParamStore<T>)> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::State(format!("checkpoint {} does not exist", path.display())),
        _ => Error::Io(e),
    })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            dim: 8,
            rec_dim: 8,
            pooling: vec![2],
            layers: vec![1, 1],
            ..ModelConfig::default()
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let (m, p) = build_model::<f32>(&cfg(), SeededRng::new(3)).unwrap();
        let bytes = encode_checkpoint(m.config(), &p);
        let (m2, p2) = decode_checkpoint::<f32>(&bytes).unwrap();
        assert_eq!(p.tensors(), p2.tensors());
        assert_eq!(m.param_count(), m2.param_count());
        assert_eq!(m.magnitude_profile(&p), m2.magnitude_profile(&p2));
        assert_eq!(encode_checkpoint(m2.config(), &p2), bytes);
    }

    #[test]
    fn corrupt_inputs_report_offsets() {
        let (m, p) = build_model::<f64>(&cfg(), SeededRng::new(3)).unwrap();
        let bytes = encode_checkpoint(m.config(), &p);
        assert!(matches!(decode_checkpoint::<f64>(b"NOTACKPTxxxx"), Err(Error::Format { offset: 0, .. })));
        let cut = &bytes[..bytes.len() - 3];
        match decode_checkpoint::<f64>(cut) {
            Err(Error::Format { offset, .. }) => assert!(offset > 8),
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(decode_checkpoint::<f64>(&bad), Err(Error::Format { offset: 8, .. })));
    }

    #[test]
    fn missing_file_is_state_error() {
        let r = load_checkpoint::<f32>(Path::new("/nonexistent/ckpt.bin"));
        assert!(matches!(r, Err(Error::State(_))));
    }
}
