//! Causal multi-head and multi-query self-attention.

use super::{Dense, ParamBuilder, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Scores `⟨q_i, k_j⟩/√(D/H)` masked to `j ≤ i`, softmax over `j`, then an
/// output projection of the concatenated heads. In multi-query mode all heads
/// share a single key and value projection of width `D/H`.
#[derive(Debug, Clone)]
pub struct CausalAttention {
    pub dim: usize,
    pub heads: usize,
    pub multi_query: bool,
    wq: Dense,
    wk: Dense,
    wv: Dense,
    wo: Dense,
}

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    x: Tensor<T>,
    q: Tensor<T>,
    k: Tensor<T>,
    v: Tensor<T>,
    /// `[H × S × S]`, zero above the diagonal.
    probs: Vec<T>,
    z: Tensor<T>,
}

/// Keys and values seen so far, for token-by-token evaluation.
#[derive(Debug, Clone, Default)]
pub struct AttentionState<T> {
    k: Vec<T>,
    v: Vec<T>,
    len: usize,
}

impl CausalAttention {
    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, dim: usize, heads: usize, multi_query: bool) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::arg(format!("head count {heads} must divide the width {dim}")));
        }
        let kv = if multi_query { dim / heads } else { dim };
        let var = 1.0 / dim as f64;
        let mut pb = pb.child(name);
        Ok(CausalAttention {
            dim,
            heads,
            multi_query,
            wq: Dense::new(&mut pb, "wq", dim, dim, var, false)?,
            wk: Dense::new(&mut pb, "wk", dim, kv, var, false)?,
            wv: Dense::new(&mut pb, "wv", dim, kv, var, false)?,
            wo: Dense::new(&mut pb, "wo", dim, dim, var, false)?,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    fn kv_offset(&self, h: usize) -> usize {
        if self.multi_query {
            0
        } else {
            h * self.head_dim()
        }
    }

    pub fn param_count(&self) -> usize {
        self.wq.param_count() + self.wk.param_count() + self.wv.param_count() + self.wo.param_count()
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, AttentionCache<T>)> {
        let q = self.wq.forward(p, x)?;
        let k = self.wk.forward(p, x)?;
        let v = self.wv.forward(p, x)?;
        let s = x.rows();
        let dh = self.head_dim();
        let kvw = k.cols();
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut probs = vec![T::zero(); self.heads * s * s];
        let mut z = vec![T::zero(); s * self.dim];
        for h in 0..self.heads {
            let (qo, ko) = (h * dh, self.kv_offset(h));
            for i in 0..s {
                let qi = &q.data()[i * self.dim + qo..i * self.dim + qo + dh];
                let row = &mut probs[(h * s + i) * s..(h * s + i) * s + i + 1];
                for (j, pj) in row.iter_mut().enumerate() {
                    let kj = &k.data()[j * kvw + ko..j * kvw + ko + dh];
                    *pj = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<T>() * scale;
                }
                softmax_in_place(row);
                let zi = &mut z[i * self.dim + qo..i * self.dim + qo + dh];
                for (j, &pj) in row.iter().enumerate() {
                    let vj = &v.data()[j * kvw + ko..j * kvw + ko + dh];
                    zi.iter_mut().zip(vj).for_each(|(a, &b)| *a += pj * b);
                }
            }
        }
        let z = Tensor::new(vec![s, self.dim], z)?;
        let y = self.wo.forward(p, &z)?;
        Ok((
            y,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                probs,
                z,
            },
        ))
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, c: &AttentionCache<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let dz = self.wo.backward(p, &c.z, dy, g)?;
        let s = c.x.rows();
        let dh = self.head_dim();
        let kvw = c.k.cols();
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut dq = vec![T::zero(); s * self.dim];
        let mut dk = vec![T::zero(); s * kvw];
        let mut dv = vec![T::zero(); s * kvw];
        let mut dp = vec![T::zero(); s];
        for h in 0..self.heads {
            let (qo, ko) = (h * dh, self.kv_offset(h));
            for i in 0..s {
                let row = &c.probs[(h * s + i) * s..(h * s + i) * s + i + 1];
                let dzi = &dz.data()[i * self.dim + qo..i * self.dim + qo + dh];
                let mut weighted = T::zero();
                for (j, &pj) in row.iter().enumerate() {
                    let vj = &c.v.data()[j * kvw + ko..j * kvw + ko + dh];
                    dp[j] = dzi.iter().zip(vj).map(|(&a, &b)| a * b).sum();
                    weighted += pj * dp[j];
                    dv[j * kvw + ko..j * kvw + ko + dh].iter_mut().zip(dzi).for_each(|(a, &b)| *a += pj * b);
                }
                let qi = &c.q.data()[i * self.dim + qo..i * self.dim + qo + dh];
                for (j, &pj) in row.iter().enumerate() {
                    let ds = pj * (dp[j] - weighted) * scale;
                    let kj = &c.k.data()[j * kvw + ko..j * kvw + ko + dh];
                    dq[i * self.dim + qo..i * self.dim + qo + dh].iter_mut().zip(kj).for_each(|(a, &b)| *a += ds * b);
                    dk[j * kvw + ko..j * kvw + ko + dh].iter_mut().zip(qi).for_each(|(a, &b)| *a += ds * b);
                }
            }
        }
        let dq = Tensor::new(vec![s, self.dim], dq)?;
        let dk = Tensor::new(vec![s, kvw], dk)?;
        let dv = Tensor::new(vec![s, kvw], dv)?;
        let mut dx = self.wq.backward(p, &c.x, &dq, g)?;
        dx.add_assign(&self.wk.backward(p, &c.x, &dk, g)?)?;
        dx.add_assign(&self.wv.backward(p, &c.x, &dv, g)?)?;
        Ok(dx)
    }

    /// Attends from one new row over every row seen so far, including itself.
    pub fn step<T: Scalar>(&self, p: &ParamStore<T>, x_row: &[T], st: &mut AttentionState<T>) -> Result<Vec<T>> {
        let x = Tensor::new(vec![1, self.dim], x_row.to_vec())?;
        let q = self.wq.forward(p, &x)?;
        st.k.extend_from_slice(self.wk.forward(p, &x)?.data());
        st.v.extend_from_slice(self.wv.forward(p, &x)?.data());
        st.len += 1;
        let dh = self.head_dim();
        let kvw = st.k.len() / st.len;
        let scale = T::of(1.0 / (dh as f64).sqrt());
        let mut z = vec![T::zero(); self.dim];
        let mut row = vec![T::zero(); st.len];
        for h in 0..self.heads {
            let (qo, ko) = (h * dh, self.kv_offset(h));
            let qi = &q.data()[qo..qo + dh];
            for (j, pj) in row.iter_mut().enumerate() {
                let kj = &st.k[j * kvw + ko..j * kvw + ko + dh];
                *pj = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<T>() * scale;
            }
            softmax_in_place(&mut row);
            for (j, &pj) in row.iter().enumerate() {
                let vj = &st.v[j * kvw + ko..j * kvw + ko + dh];
                z[qo..qo + dh].iter_mut().zip(vj).for_each(|(a, &b)| *a += pj * b);
            }
        }
        Ok(self.wo.forward(p, &Tensor::new(vec![1, self.dim], z)?)?.into_data())
    }
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}
