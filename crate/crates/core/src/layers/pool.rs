//! Strided pooling convolutions with block-diagonal taps.
//!
//! Down-pooling maps `F` consecutive tokens to one, `y_s = Σ_i x_{sF+i} W_i`.
//! Up-pooling maps one token back to `F`, `y_{Fi+j} = x_i V_j`. Every tap is
//! block-diagonal with `G` blocks of size `D/G`, so each layer stores
//! `F·D²/G` weights.

use super::{ParamBuilder, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gemm, Tensor};

fn check_groups(dim: usize, factor: usize, groups: usize) -> Result<usize> {
    if factor == 0 {
        return Err(Error::arg("pooling factor must be positive"));
    }
    if groups == 0 || dim % groups != 0 {
        return Err(Error::arg(format!("group count {groups} must divide the model dimension {dim}")));
    }
    Ok(dim / groups)
}

/// Copies the columns of group `g` out of a matrix whose rows hold `taps`
/// consecutive `[D]` vectors, giving `[rows × taps·d]`.
fn gather<T: Scalar>(src: &[T], rows: usize, taps: usize, dim: usize, d: usize, g: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(rows * taps * d);
    for r in 0..rows {
        for t in 0..taps {
            let base = (r * taps + t) * dim + g * d;
            out.extend_from_slice(&src[base..base + d]);
        }
    }
    out
}

/// Inverse of [`gather`], adding into `dst`.
fn scatter_add<T: Scalar>(dst: &mut [T], src: &[T], rows: usize, taps: usize, dim: usize, d: usize, g: usize) {
    for r in 0..rows {
        for t in 0..taps {
            let base = (r * taps + t) * dim + g * d;
            let from = (r * taps + t) * d;
            dst[base..base + d].iter_mut().zip(&src[from..from + d]).for_each(|(a, &b)| *a += b);
        }
    }
}

#[derive(Debug, Clone)]
pub struct DownPool {
    pub factor: usize,
    pub groups: usize,
    pub dim: usize,
    /// `[G × F·d × d]`; row `i·d + c` of block `g` is tap `i`, input channel `c`.
    w: ParamId,
}

impl DownPool {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, dim: usize, factor: usize, groups: usize) -> Result<Self> {
        let d = check_groups(dim, factor, groups)?;
        let w = pb.child(name).normal("w", &[groups, factor * d, d], 1.0 / (factor * d) as f64)?;
        Ok(DownPool { factor, groups, dim, w })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn param_count(&self) -> usize {
        self.factor * self.dim * self.dim / self.groups
    }

    fn pooled_len<T: Scalar>(&self, x: &Tensor<T>) -> Result<usize> {
        if x.ndim() != 2 || x.cols() != self.dim {
            return Err(Error::Shape {
                expected: vec![x.len() / self.dim.max(1), self.dim],
                actual: x.shape().to_vec(),
            });
        }
        if x.rows() % self.factor != 0 {
            return Err(Error::arg(format!(
                "sequence length {} is not a multiple of the pooling factor {}",
                x.rows(),
                self.factor
            )));
        }
        Ok(x.rows() / self.factor)
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = self.pooled_len(x)?;
        let (f, d) = (self.factor, self.dim / self.groups);
        let w = p.get(self.w).data();
        let mut y = vec![T::zero(); s * self.dim];
        let mut yg = vec![T::zero(); s * d];
        for g in 0..self.groups {
            let xg = gather(x.data(), s, f, self.dim, d, g);
            gemm(s, f * d, d, &xg, false, &w[g * f * d * d..(g + 1) * f * d * d], false, &mut yg, false);
            scatter_add(&mut y, &yg, s, 1, self.dim, d, g);
        }
        Tensor::new(vec![s, self.dim], y)
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>, g_store: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let s = self.pooled_len(x)?;
        dy.ensure_shape(&[s, self.dim])?;
        let (f, d) = (self.factor, self.dim / self.groups);
        let block = f * d * d;
        let w = p.get(self.w).data();
        let mut dx = vec![T::zero(); x.len()];
        let mut dxg = vec![T::zero(); s * f * d];
        for g in 0..self.groups {
            let xg = gather(x.data(), s, f, self.dim, d, g);
            let dyg = gather(dy.data(), s, 1, self.dim, d, g);
            let gw = &mut g_store.get_mut(self.w).data_mut()[g * block..(g + 1) * block];
            gemm(f * d, s, d, &xg, true, &dyg, false, gw, true);
            gemm(s, d, f * d, &dyg, false, &w[g * block..(g + 1) * block], true, &mut dxg, false);
            scatter_add(&mut dx, &dxg, s, f, self.dim, d, g);
        }
        Tensor::new(x.shape().to_vec(), dx)
    }

    /// Contribution `x W_tap` of one input row, for streaming evaluation.
    pub fn tap<T: Scalar>(&self, p: &ParamStore<T>, tap: usize, x_row: &[T]) -> Vec<T> {
        let (f, d) = (self.factor, self.dim / self.groups);
        let w = p.get(self.w).data();
        let mut out = vec![T::zero(); self.dim];
        for g in 0..self.groups {
            let blk = &w[g * f * d * d + tap * d * d..g * f * d * d + (tap + 1) * d * d];
            gemm(1, d, d, &x_row[g * d..(g + 1) * d], false, blk, false, &mut out[g * d..(g + 1) * d], false);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct UpPool {
    pub factor: usize,
    pub groups: usize,
    pub dim: usize,
    /// `[G × d × F·d]`; column `j·d + c` of block `g` is tap `j`, output channel `c`.
    v: ParamId,
}

impl UpPool {
    /// Taps drawn from `N(0, scale/n_in)` with `n_in = D/G`.
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, dim: usize, factor: usize, groups: usize, scale: f64) -> Result<Self> {
        let d = check_groups(dim, factor, groups)?;
        let v = pb.child(name).normal("v", &[groups, d, factor * d], scale / d as f64)?;
        Ok(UpPool { factor, groups, dim, v })
    }

    pub fn weight(&self) -> ParamId {
        self.v
    }

    pub fn param_count(&self) -> usize {
        self.factor * self.dim * self.dim / self.groups
    }

    fn check<T: Scalar>(&self, x: &Tensor<T>) -> Result<usize> {
        if x.ndim() != 2 || x.cols() != self.dim {
            return Err(Error::Shape {
                expected: vec![x.len() / self.dim.max(1), self.dim],
                actual: x.shape().to_vec(),
            });
        }
        Ok(x.rows())
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = self.check(x)?;
        let (f, d) = (self.factor, self.dim / self.groups);
        let block = f * d * d;
        let v = p.get(self.v).data();
        let mut y = vec![T::zero(); s * f * self.dim];
        let mut yg = vec![T::zero(); s * f * d];
        for g in 0..self.groups {
            let xg = gather(x.data(), s, 1, self.dim, d, g);
            gemm(s, d, f * d, &xg, false, &v[g * block..(g + 1) * block], false, &mut yg, false);
            scatter_add(&mut y, &yg, s, f, self.dim, d, g);
        }
        Tensor::new(vec![s * f, self.dim], y)
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>, g_store: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let s = self.check(x)?;
        let (f, d) = (self.factor, self.dim / self.groups);
        dy.ensure_shape(&[s * f, self.dim])?;
        let block = f * d * d;
        let v = p.get(self.v).data();
        let mut dx = vec![T::zero(); x.len()];
        let mut dxg = vec![T::zero(); s * d];
        for g in 0..self.groups {
            let xg = gather(x.data(), s, 1, self.dim, d, g);
            let dyg = gather(dy.data(), s, f, self.dim, d, g);
            let gv = &mut g_store.get_mut(self.v).data_mut()[g * block..(g + 1) * block];
            gemm(d, s, f * d, &xg, true, &dyg, false, gv, true);
            gemm(s, f * d, d, &dyg, false, &v[g * block..(g + 1) * block], true, &mut dxg, false);
            scatter_add(&mut dx, &dxg, s, 1, self.dim, d, g);
        }
        Tensor::new(x.shape().to_vec(), dx)
    }

    /// Output row `x V_tap` for streaming evaluation.
    pub fn tap<T: Scalar>(&self, p: &ParamStore<T>, tap: usize, x_row: &[T]) -> Vec<T> {
        let (f, d) = (self.factor, self.dim / self.groups);
        let v = p.get(self.v).data();
        let mut out = vec![T::zero(); self.dim];
        for g in 0..self.groups {
            let blk = &v[g * f * d * d..(g + 1) * f * d * d];
            for c_out in 0..d {
                let mut acc = T::zero();
                for c_in in 0..d {
                    acc += x_row[g * d + c_in] * blk[c_in * f * d + tap * d + c_out];
                }
                out[g * d + c_out] = acc;
            }
        }
        out
    }
}
