use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `[cos(i/10000^{j/(D/2)}) | sin(i/10000^{j/(D/2)})]` for `j = 0..D/2`.
pub fn sinusoidal_embed(code: u8, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::arg(format!("embedding dimension must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for j in 0..half {
        let angle = code as f64 / 10000f64.powf(j as f64 / half as f64);
        out[j] = angle.cos();
        out[half + j] = angle.sin();
    }
    Ok(out)
}

/// Precomputed embeddings of all 256 codes.
#[derive(Debug, Clone)]
pub struct SinusoidalTable<T> {
    dim: usize,
    table: Vec<T>,
}

impl<T: Scalar> SinusoidalTable<T> {
    pub fn new(dim: usize) -> Result<Self> {
        let mut table = Vec::with_capacity(256 * dim);
        for code in 0..=255u8 {
            table.extend(sinusoidal_embed(code, dim)?.into_iter().map(T::of));
        }
        Ok(SinusoidalTable { dim, table })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, code: u8) -> &[T] {
        &self.table[code as usize * self.dim..(code as usize + 1) * self.dim]
    }

    /// `[S × D]` embedding of a token sequence.
    pub fn embed(&self, tokens: &[u8]) -> Tensor<T> {
        let mut data = Vec::with_capacity(tokens.len() * self.dim);
        for &t in tokens {
            data.extend_from_slice(self.row(t));
        }
        Tensor::new(vec![tokens.len(), self.dim], data).expect("sized above")
    }
}
