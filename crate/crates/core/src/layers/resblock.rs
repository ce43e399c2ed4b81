//! Residual blocks around a channel-mixing (MLP) or temporal-mixing layer.
//!
//! ```text
//! ungated: y = x + dropout(out(gelu(inner(norm x))))
//! gated:   y = x + dropout(out(inner(norm x) ⊙ gelu(gate(norm x))))
//! ```
//! `out` is drawn from `N(0, scale/n_in)`, so `scale = 0` makes the block an
//! exact identity at initialisation.

use num_complex::Complex;

use super::activation::{dropout_backward, dropout_forward, gelu, gelu_grad};
use super::attention::{AttentionCache, AttentionState, CausalAttention};
use super::rglru::{LruMode, RgLru, RgLruCache, RingPreset};
use super::{Dense, ForwardCtx, Norm, NormCache, NormKind, ParamBuilder, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixerKind {
    /// Dense map to `hidden` channels.
    Mlp { hidden: usize },
    /// Dense map to the recurrence width, then an RG-LRU.
    RgLru { dim: usize, mode: LruMode, ring: RingPreset },
    Attention { heads: usize, multi_query: bool },
}

#[derive(Debug, Clone)]
pub enum Mixer {
    Mlp(Dense),
    RgLru { proj: Dense, lru: RgLru },
    Attention(CausalAttention),
}

#[derive(Debug, Clone)]
enum MixerCache<T> {
    Mlp,
    RgLru(RgLruCache<T>),
    Attention(AttentionCache<T>),
}

/// Recurrent state of a mixer for token-by-token evaluation.
#[derive(Debug, Clone)]
pub enum MixerState<T> {
    Stateless,
    RgLru(Vec<Complex<T>>),
    Attention(AttentionState<T>),
}

impl Mixer {
    fn width(&self) -> usize {
        match self {
            Mixer::Mlp(d) => d.n_out,
            Mixer::RgLru { lru, .. } => lru.dim,
            Mixer::Attention(a) => a.dim,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Mixer::Mlp(d) => d.param_count(),
            Mixer::RgLru { proj, lru } => proj.param_count() + lru.param_count(),
            Mixer::Attention(a) => a.param_count(),
        }
    }

    fn forward<T: Scalar>(&self, p: &ParamStore<T>, n: &Tensor<T>) -> Result<(Tensor<T>, MixerCache<T>)> {
        match self {
            Mixer::Mlp(d) => Ok((d.forward(p, n)?, MixerCache::Mlp)),
            Mixer::RgLru { proj, lru } => {
                let z = proj.forward(p, n)?;
                let (y, c) = lru.forward(p, &z)?;
                Ok((y, MixerCache::RgLru(c)))
            }
            Mixer::Attention(a) => {
                let (y, c) = a.forward(p, n)?;
                Ok((y, MixerCache::Attention(c)))
            }
        }
    }

    fn backward<T: Scalar>(&self, p: &ParamStore<T>, n: &Tensor<T>, cache: &MixerCache<T>, dm: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        match (self, cache) {
            (Mixer::Mlp(d), MixerCache::Mlp) => d.backward(p, n, dm, g),
            (Mixer::RgLru { proj, lru }, MixerCache::RgLru(c)) => {
                let dz = lru.backward(p, c, dm, g)?;
                proj.backward(p, n, &dz, g)
            }
            (Mixer::Attention(a), MixerCache::Attention(c)) => a.backward(p, c, dm, g),
            _ => Err(Error::State("mixer cache does not match the mixer".into())),
        }
    }

    fn step<T: Scalar>(&self, p: &ParamStore<T>, n: &Tensor<T>, st: &mut MixerState<T>) -> Result<Tensor<T>> {
        match (self, st) {
            (Mixer::Mlp(d), MixerState::Stateless) => d.forward(p, n),
            (Mixer::RgLru { proj, lru }, MixerState::RgLru(h)) => {
                let z = proj.forward(p, n)?;
                Tensor::new(vec![1, lru.dim], lru.step(p, z.data(), h)?)
            }
            (Mixer::Attention(a), MixerState::Attention(s)) => Tensor::new(vec![1, a.dim], a.step(p, n.data(), s)?),
            _ => Err(Error::State("mixer state does not match the mixer".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResBlock {
    pub dim: usize,
    pub gated: bool,
    pub dropout: f64,
    norm: Norm,
    mixer: Mixer,
    gate: Option<Dense>,
    out: Dense,
}

#[derive(Debug, Clone)]
pub struct ResBlockCache<T> {
    norm: NormCache<T>,
    n: Tensor<T>,
    mixer: MixerCache<T>,
    m: Tensor<T>,
    gate_pre: Option<Tensor<T>>,
    t: Tensor<T>,
    mask: Option<Vec<T>>,
}

impl ResBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<'_, T>,
        name: &str,
        dim: usize,
        kind: MixerKind,
        gated: bool,
        norm: NormKind,
        dropout: f64,
        init_scale: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::arg(format!("dropout rate must be in [0, 1), got {dropout}")));
        }
        if !(init_scale >= 0.0) {
            return Err(Error::arg(format!("init scale must be non-negative, got {init_scale}")));
        }
        let mut pb = pb.child(name);
        let norm = Norm::new(&mut pb, "norm", norm, dim)?;
        let mixer = match kind {
            MixerKind::Mlp { hidden } => Mixer::Mlp(Dense::scaled(&mut pb, "inner", dim, hidden, 1.0)?),
            MixerKind::RgLru { dim: r, mode, ring } => Mixer::RgLru {
                proj: Dense::scaled(&mut pb, "proj", dim, r, 1.0)?,
                lru: RgLru::new(&mut pb, "lru", mode, r, ring)?,
            },
            MixerKind::Attention { heads, multi_query } => Mixer::Attention(CausalAttention::new(&mut pb, "attn", dim, heads, multi_query)?),
        };
        let width = mixer.width();
        let gate = if gated { Some(Dense::scaled(&mut pb, "gate", dim, width, 1.0)?) } else { None };
        let out = Dense::scaled(&mut pb, "out", width, dim, init_scale)?;
        Ok(ResBlock {
            dim,
            gated,
            dropout,
            norm,
            mixer,
            gate,
            out,
        })
    }

    pub fn mixer(&self) -> &Mixer {
        &self.mixer
    }

    pub fn rg_lru(&self) -> Option<&RgLru> {
        match &self.mixer {
            Mixer::RgLru { lru, .. } => Some(lru),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.norm.param_count() + self.mixer.param_count() + self.gate.as_ref().map_or(0, Dense::param_count) + self.out.param_count()
    }

    pub fn initial_state<T: Scalar>(&self) -> MixerState<T> {
        match self.mixer {
            Mixer::Mlp(_) => MixerState::Stateless,
            Mixer::RgLru { .. } => MixerState::RgLru(Vec::new()),
            Mixer::Attention(_) => MixerState::Attention(AttentionState::default()),
        }
    }

    /// Pre-output activations `t` from the mixer output and the normalised input.
    fn combine<T: Scalar>(&self, p: &ParamStore<T>, n: &Tensor<T>, m: &Tensor<T>) -> Result<(Option<Tensor<T>>, Tensor<T>)> {
        match &self.gate {
            Some(gate) => {
                let gp = gate.forward(p, n)?;
                let t = m.zip_map(&gp, |a, b| a * gelu(b))?;
                Ok((Some(gp), t))
            }
            None => Ok((None, m.map(gelu))),
        }
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>, ctx: &mut ForwardCtx) -> Result<(Tensor<T>, ResBlockCache<T>)> {
        let (n, norm) = self.norm.forward(p, x)?;
        let (m, mixer) = self.mixer.forward(p, &n)?;
        let (gate_pre, t) = self.combine(p, &n, &m)?;
        let mut o = self.out.forward(p, &t)?;
        let mask = dropout_forward(&mut o, self.dropout, ctx)?;
        o.add_assign(x)?;
        Ok((
            o,
            ResBlockCache {
                norm,
                n,
                mixer,
                m,
                gate_pre,
                t,
                mask,
            },
        ))
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, c: &ResBlockCache<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let mut d_o = dy.clone();
        dropout_backward(c.mask.as_deref(), &mut d_o);
        let dt = self.out.backward(p, &c.t, &d_o, g)?;
        let (dm, mut dn) = match (&self.gate, &c.gate_pre) {
            (Some(gate), Some(gp)) => {
                let dm = dt.zip_map(gp, |d, b| d * gelu(b))?;
                let dgp = Tensor::from_fn(dt.shape(), |i| dt.data()[i] * c.m.data()[i] * gelu_grad(gp.data()[i]));
                (dm, Some(gate.backward(p, &c.n, &dgp, g)?))
            }
            _ => (dt.zip_map(&c.m, |d, m| d * gelu_grad(m))?, None),
        };
        let dn_mixer = self.mixer.backward(p, &c.n, &c.mixer, &dm, g)?;
        let dn = match dn.take() {
            Some(mut d) => {
                d.add_assign(&dn_mixer)?;
                d
            }
            None => dn_mixer,
        };
        let mut dx = self.norm.backward(p, &c.norm, &dn, g)?;
        dx.add_assign(dy)?;
        Ok(dx)
    }

    /// Eval-mode evaluation of one row given the mixer's running state.
    pub fn step<T: Scalar>(&self, p: &ParamStore<T>, x_row: &[T], st: &mut MixerState<T>) -> Result<Vec<T>> {
        let x = Tensor::new(vec![1, self.dim], x_row.to_vec())?;
        let (n, _) = self.norm.forward(p, &x)?;
        let m = self.mixer.step(p, &n, st)?;
        let (_, t) = self.combine(p, &n, &m)?;
        let mut o = self.out.forward(p, &t)?;
        o.add_assign(&x)?;
        Ok(o.into_data())
    }
}
