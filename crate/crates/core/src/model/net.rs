//! The recursive SkipBlock network.
//!
//! A pooled level runs `pre` blocks, pools `F` tokens into one, shifts the
//! pooled stream right by one step (position 0 reads a learned start vector),
//! runs the next level, up-pools and runs `post` blocks. Because of the
//! shift, up-pooled positions `Fi..Fi+F−1` only see pooled tokens `< i`,
//! which in turn only cover positions `< Fi`, so every output is strictly
//! causal in its inputs.

use super::config::{DeepMixer, ModelConfig, Placement, SkipStyle};
use crate::error::{Error, Result};
use crate::layers::{
    sinusoidal_embed, Dense, DownPool, ForwardCtx, MixerKind, Norm, NormCache, ParamBuilder, ParamId, ParamStore, ResBlock,
    ResBlockCache, UpPool,
};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Vocabulary size of the 8-bit token stream.
pub const VOCAB: usize = 256;
/// Input code fed at position 0; decodes to silence.
pub const START_CODE: u8 = 128;

#[derive(Debug, Clone)]
pub(crate) enum Level {
    Stack(Vec<ResBlock>),
    Skip(Box<SkipBlock>),
}

#[derive(Debug, Clone)]
pub(crate) struct SkipBlock {
    pub style: SkipStyle,
    pub pre: Vec<ResBlock>,
    pub down: DownPool,
    pub start: ParamId,
    pub inner: Level,
    pub up: UpPool,
    pub post: Vec<ResBlock>,
}

#[derive(Debug, Clone)]
enum LevelCache<T> {
    Stack(Vec<ResBlockCache<T>>),
    Skip(Box<SkipCache<T>>),
}

#[derive(Debug, Clone)]
struct SkipCache<T> {
    pre: Vec<ResBlockCache<T>>,
    x1: Tensor<T>,
    inner: LevelCache<T>,
    r: Tensor<T>,
    post: Vec<ResBlockCache<T>>,
}

/// Activations kept by [`Poolformer::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ModelCache<T> {
    top: LevelCache<T>,
    norm: NormCache<T>,
    h: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct Poolformer {
    cfg: ModelConfig,
    embed: Vec<f64>,
    top: Level,
    final_norm: Norm,
    head: Dense,
}

fn stack_forward<T: Scalar>(
    blocks: &[ResBlock],
    p: &ParamStore<T>,
    x: Tensor<T>,
    ctx: &mut ForwardCtx,
) -> Result<(Tensor<T>, Vec<ResBlockCache<T>>)> {
    let mut caches = Vec::with_capacity(blocks.len());
    let mut h = x;
    for b in blocks {
        let (y, c) = b.forward(p, &h, ctx)?;
        caches.push(c);
        h = y;
    }
    Ok((h, caches))
}

fn stack_backward<T: Scalar>(
    blocks: &[ResBlock],
    p: &ParamStore<T>,
    caches: &[ResBlockCache<T>],
    dy: Tensor<T>,
    g: &mut ParamStore<T>,
) -> Result<Tensor<T>> {
    let mut d = dy;
    for (b, c) in blocks.iter().zip(caches).rev() {
        d = b.backward(p, c, &d, g)?;
    }
    Ok(d)
}

/// Moves rows down by one, filling row 0 with `start`.
fn shift_rows<T: Scalar>(x: &Tensor<T>, start: &[T]) -> Result<Tensor<T>> {
    let (rows, d) = (x.rows(), x.cols());
    let mut out = Vec::with_capacity(rows * d);
    out.extend_from_slice(start);
    out.extend_from_slice(&x.data()[..(rows - 1) * d]);
    Tensor::new(x.shape().to_vec(), out)
}

impl Level {
    fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: Tensor<T>, ctx: &mut ForwardCtx) -> Result<(Tensor<T>, LevelCache<T>)> {
        match self {
            Level::Stack(blocks) => {
                let (y, c) = stack_forward(blocks, p, x, ctx)?;
                Ok((y, LevelCache::Stack(c)))
            }
            Level::Skip(sb) => {
                let (y, c) = sb.forward(p, x, ctx)?;
                Ok((y, LevelCache::Skip(Box::new(c))))
            }
        }
    }

    fn backward<T: Scalar>(&self, p: &ParamStore<T>, cache: &LevelCache<T>, dy: Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        match (self, cache) {
            (Level::Stack(blocks), LevelCache::Stack(c)) => stack_backward(blocks, p, c, dy, g),
            (Level::Skip(sb), LevelCache::Skip(c)) => sb.backward(p, c, dy, g),
            _ => Err(Error::State("level cache does not match the level".into())),
        }
    }

    /// Residual blocks in execution order.
    pub(crate) fn blocks(&self) -> Vec<&ResBlock> {
        match self {
            Level::Stack(b) => b.iter().collect(),
            Level::Skip(sb) => {
                let mut out: Vec<&ResBlock> = sb.pre.iter().collect();
                out.extend(sb.inner.blocks());
                out.extend(sb.post.iter());
                out
            }
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Level::Stack(b) => b.iter().map(ResBlock::param_count).sum(),
            Level::Skip(sb) => {
                let blocks: usize = sb.pre.iter().chain(&sb.post).map(ResBlock::param_count).sum();
                blocks + sb.down.param_count() + sb.up.param_count() + sb.down.dim + sb.inner.param_count()
            }
        }
    }
}

impl SkipBlock {
    fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: Tensor<T>, ctx: &mut ForwardCtx) -> Result<(Tensor<T>, SkipCache<T>)> {
        let (x1, pre) = stack_forward(&self.pre, p, x.clone(), ctx)?;
        let pooled = self.down.forward(p, &x1)?;
        let q = shift_rows(&pooled, p.get(self.start).data())?;
        let (r, inner) = self.inner.forward(p, q, ctx)?;
        let u = self.up.forward(p, &r)?;
        let (y, post) = match self.style {
            SkipStyle::Short => stack_forward(&self.post, p, u.add(&x1)?, ctx)?,
            SkipStyle::Long => {
                let (w, post) = stack_forward(&self.post, p, u, ctx)?;
                (w.add(&x)?, post)
            }
        };
        Ok((y, SkipCache { pre, x1, inner, r, post }))
    }

    fn backward<T: Scalar>(&self, p: &ParamStore<T>, c: &SkipCache<T>, dy: Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        let (du, mut dx1, dx_skip) = match self.style {
            SkipStyle::Short => {
                let dz = stack_backward(&self.post, p, &c.post, dy, g)?;
                (dz.clone(), dz, None)
            }
            SkipStyle::Long => {
                let du = stack_backward(&self.post, p, &c.post, dy.clone(), g)?;
                (du, Tensor::zeros(c.x1.shape()), Some(dy))
            }
        };
        let dr = self.up.backward(p, &c.r, &du, g)?;
        let dq = self.inner.backward(p, &c.inner, dr, g)?;
        let d = dq.cols();
        g.get_mut(self.start)
            .data_mut()
            .iter_mut()
            .zip(dq.row(0))
            .for_each(|(a, &b)| *a += b);
        let mut dpooled = dq.data()[d..].to_vec();
        dpooled.resize(dq.len(), T::zero());
        let dpooled = Tensor::new(dq.shape().to_vec(), dpooled)?;
        dx1.add_assign(&self.down.backward(p, &c.x1, &dpooled, g)?)?;
        let mut dx = stack_backward(&self.pre, p, &c.pre, dx1, g)?;
        if let Some(s) = dx_skip {
            dx.add_assign(&s)?;
        }
        Ok(dx)
    }
}

struct Builder<'c> {
    cfg: &'c ModelConfig,
    scale: f64,
}

impl Builder<'_> {
    fn layers<T: Scalar>(&self, pb: &mut ParamBuilder<'_, T>, name: &str, n: usize, temporal: MixerKind) -> Result<Vec<ResBlock>> {
        let c = self.cfg;
        let mut pb = pb.child(name);
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            let mut lp = pb.child(&i.to_string());
            out.push(ResBlock::new(&mut lp, "temporal", c.dim, temporal, c.gated, c.norm, c.dropout, self.scale)?);
            let mlp = MixerKind::Mlp { hidden: c.mlp_dim() };
            out.push(ResBlock::new(&mut lp, "mlp", c.dim, mlp, c.gated, c.norm, c.dropout, self.scale)?);
        }
        Ok(out)
    }

    fn level<T: Scalar>(&self, pb: &mut ParamBuilder<'_, T>, depth: usize) -> Result<Level> {
        let c = self.cfg;
        let rg_lru = MixerKind::RgLru {
            dim: c.rec_dim,
            mode: c.lru_mode,
            ring: c.ring,
        };
        let mut pb = pb.child(&format!("level{depth}"));
        if depth == c.pooling.len() {
            let kind = match c.deepest {
                DeepMixer::RgLru => rg_lru,
                DeepMixer::Attention => MixerKind::Attention {
                    heads: c.heads,
                    multi_query: c.multi_query,
                },
            };
            return Ok(Level::Stack(self.layers(&mut pb, "stack", c.layers[depth], kind)?));
        }
        let (f, l) = (c.pooling[depth], c.layers[depth]);
        let (n_pre, n_post) = match c.placement {
            Placement::Around => (l, l),
            Placement::After => (0, 2 * l),
        };
        let pre = self.layers(&mut pb, "pre", n_pre, rg_lru)?;
        let down = DownPool::new(&mut pb, "down", c.dim, f, c.groups())?;
        let start = pb.normal("start", &[c.dim], 1.0)?;
        let inner = self.level(&mut pb, depth + 1)?;
        let up = UpPool::new(&mut pb, "up", c.dim, f, c.groups(), self.scale)?;
        let post = self.layers(&mut pb, "post", n_post, rg_lru)?;
        Ok(Level::Skip(Box::new(SkipBlock {
            style: c.skip,
            pre,
            down,
            start,
            inner,
            up,
            post,
        })))
    }
}

/// Instantiates the network and its parameters; equal seeds give identical stores.
pub fn build_model<T: Scalar>(cfg: &ModelConfig, rng: SeededRng) -> Result<(Poolformer, ParamStore<T>)> {
    cfg.validate()?;
    let mut store = ParamStore::new();
    let mut pb = ParamBuilder::new(&mut store, rng);
    let b = Builder {
        cfg,
        scale: cfg.init_scale(),
    };
    let top = b.level(&mut pb, 0)?;
    let final_norm = Norm::new(&mut pb, "final_norm", cfg.norm, cfg.dim)?;
    let head = Dense::scaled(&mut pb, "head", cfg.dim, VOCAB, b.scale)?;
    let mut embed = Vec::with_capacity(VOCAB * cfg.dim);
    for code in 0..=255u8 {
        embed.extend(sinusoidal_embed(code, cfg.dim)?);
    }
    let model = Poolformer {
        cfg: cfg.clone(),
        embed,
        top,
        final_norm,
        head,
    };
    debug_assert_eq!(model.param_count(), store.scalar_count());
    Ok((model, store))
}

/// Model inputs for predicting `targets`: the targets shifted right by one,
/// starting from [`START_CODE`].
pub fn shift_right(targets: &[u8]) -> Vec<u8> {
    let mut v = Vec::with_capacity(targets.len());
    if !targets.is_empty() {
        v.push(START_CODE);
        v.extend_from_slice(&targets[..targets.len() - 1]);
    }
    v
}

impl Poolformer {
    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub(crate) fn top(&self) -> &Level {
        &self.top
    }

    pub(crate) fn final_norm(&self) -> &Norm {
        &self.final_norm
    }

    pub(crate) fn head(&self) -> &Dense {
        &self.head
    }

    pub fn embedding<T: Scalar>(&self, code: u8) -> Vec<T> {
        let d = self.cfg.dim;
        self.embed[code as usize * d..(code as usize + 1) * d].iter().map(|&v| T::of(v)).collect()
    }

    fn embed_tokens<T: Scalar>(&self, tokens: &[u8]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(tokens.len() * self.cfg.dim);
        for &t in tokens {
            data.extend(self.embedding::<T>(t));
        }
        Tensor::new(vec![tokens.len(), self.cfg.dim], data)
    }

    /// Rejects lengths that are zero or not multiples of the pooling product.
    pub fn check_length(&self, s: usize) -> Result<()> {
        let m = self.cfg.pooling_product();
        if s == 0 || s % m != 0 {
            return Err(Error::arg(format!("sequence length {s} must be a positive multiple of {m}")));
        }
        Ok(())
    }

    /// Exact number of stored scalars.
    pub fn param_count(&self) -> usize {
        self.top.param_count() + self.final_norm.param_count() + self.head.param_count()
    }

    /// Number of temporal blocks whose mixer is an RG-LRU.
    pub fn rg_lru_layers(&self) -> usize {
        self.top.blocks().iter().filter(|b| b.rg_lru().is_some()).count()
    }

    /// Mean `|a|` of each RG-LRU layer, in execution order.
    pub fn magnitude_profile<T: Scalar>(&self, p: &ParamStore<T>) -> Vec<f64> {
        self.top
            .blocks()
            .iter()
            .filter_map(|b| b.rg_lru())
            .map(|lru| {
                let a = lru.base_coefficients(p);
                a.iter().map(|z| z.norm()).sum::<f64>() / a.len() as f64
            })
            .collect()
    }

    /// All base coefficients `a` of each RG-LRU layer, in execution order.
    pub fn coefficients<T: Scalar>(&self, p: &ParamStore<T>) -> Vec<Vec<num_complex::Complex<f64>>> {
        self.top.blocks().iter().filter_map(|b| b.rg_lru()).map(|lru| lru.base_coefficients(p)).collect()
    }

    /// Logits `[S × 256]`; row `k` is the prediction for the token after `inputs[k]`.
    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, inputs: &[u8], ctx: &mut ForwardCtx) -> Result<(Tensor<T>, ModelCache<T>)> {
        self.check_length(inputs.len())?;
        let x = self.embed_tokens(inputs)?;
        let (h, top) = self.top.forward(p, x, ctx)?;
        let (n, norm) = self.final_norm.forward(p, &h)?;
        let logits = self.head.forward(p, &n)?;
        Ok((logits, ModelCache { top, norm, h: n }))
    }

    pub fn logits<T: Scalar>(&self, p: &ParamStore<T>, inputs: &[u8], ctx: &mut ForwardCtx) -> Result<Tensor<T>> {
        Ok(self.forward(p, inputs, ctx)?.0)
    }

    /// Logits `[B × S × 256]` for a batch of equal-length input rows.
    pub fn forward_batch<T: Scalar>(&self, p: &ParamStore<T>, batch: &[Vec<u8>], ctx: &mut ForwardCtx) -> Result<Tensor<T>> {
        let s = batch.first().map_or(0, Vec::len);
        if batch.iter().any(|r| r.len() != s) {
            return Err(Error::arg("batch rows must have equal length"));
        }
        let mut data = Vec::with_capacity(batch.len() * s * VOCAB);
        for row in batch {
            data.extend(self.logits(p, row, ctx)?.into_data());
        }
        Tensor::new(vec![batch.len(), s, VOCAB], data)
    }

    /// Accumulates parameter gradients for `dlogits` into `g`.
    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, cache: &ModelCache<T>, dlogits: &Tensor<T>, g: &mut ParamStore<T>) -> Result<()> {
        let dn = self.head.backward(p, &cache.h, dlogits, g)?;
        let dh = self.final_norm.backward(p, &cache.norm, &dn, g)?;
        // The embedding is fixed, so the input gradient is dropped.
        self.top.backward(p, &cache.top, dh, g)?;
        Ok(())
    }
}
