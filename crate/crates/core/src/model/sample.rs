//! Autoregressive generation.
//!
//! [`sample`] runs the network in recurrent mode, one token at a time: each
//! pooled level keeps the running state of its blocks, accumulates the
//! down-pooling taps of the current group and reuses the inner output for
//! all `F` positions it covers. [`sample_full_forward`] re-runs the whole
//! network on the growing prefix and serves as its oracle.

use super::net::{Level, Poolformer, SkipBlock, START_CODE, VOCAB};
use super::config::SkipStyle;
use crate::error::{Error, Result};
use crate::layers::{ForwardCtx, MixerState, ParamStore, ResBlock};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

enum LevelState<T> {
    Stack(Vec<MixerState<T>>),
    Skip(Box<SkipState<T>>),
}

struct SkipState<T> {
    pre: Vec<MixerState<T>>,
    inner: LevelState<T>,
    post: Vec<MixerState<T>>,
    /// Partial down-pooling sum of the current group.
    acc: Vec<T>,
    /// Last completed pooled vector.
    pooled: Vec<T>,
    /// Inner output for the current group.
    branch: Vec<T>,
    t: usize,
}

fn stack_state<T: Scalar>(blocks: &[ResBlock]) -> Vec<MixerState<T>> {
    blocks.iter().map(ResBlock::initial_state).collect()
}

fn stack_step<T: Scalar>(blocks: &[ResBlock], p: &ParamStore<T>, st: &mut [MixerState<T>], x: Vec<T>) -> Result<Vec<T>> {
    let mut h = x;
    for (b, s) in blocks.iter().zip(st.iter_mut()) {
        h = b.step(p, &h, s)?;
    }
    Ok(h)
}

impl<T: Scalar> LevelState<T> {
    fn new(level: &Level) -> Self {
        match level {
            Level::Stack(b) => LevelState::Stack(stack_state(b)),
            Level::Skip(sb) => LevelState::Skip(Box::new(SkipState {
                pre: stack_state(&sb.pre),
                inner: LevelState::new(&sb.inner),
                post: stack_state(&sb.post),
                acc: Vec::new(),
                pooled: Vec::new(),
                branch: Vec::new(),
                t: 0,
            })),
        }
    }
}

fn level_step<T: Scalar>(level: &Level, p: &ParamStore<T>, st: &mut LevelState<T>, x: Vec<T>) -> Result<Vec<T>> {
    match (level, st) {
        (Level::Stack(b), LevelState::Stack(s)) => stack_step(b, p, s, x),
        (Level::Skip(sb), LevelState::Skip(s)) => skip_step(sb, p, s, x),
        _ => Err(Error::State("sampler state does not match the model".into())),
    }
}

fn skip_step<T: Scalar>(sb: &SkipBlock, p: &ParamStore<T>, st: &mut SkipState<T>, x: Vec<T>) -> Result<Vec<T>> {
    let f = sb.down.factor;
    let j = st.t % f;
    let x1 = stack_step(&sb.pre, p, &mut st.pre, x.clone())?;
    if j == 0 {
        let q = if st.t == 0 { p.get(sb.start).data().to_vec() } else { st.pooled.clone() };
        st.branch = level_step(&sb.inner, p, &mut st.inner, q)?;
    }
    let u = sb.up.tap(p, j, &st.branch);
    let d = sb.down.tap(p, j, &x1);
    if j == 0 {
        st.acc = d;
    } else {
        st.acc.iter_mut().zip(&d).for_each(|(a, &b)| *a += b);
    }
    if j == f - 1 {
        st.pooled = std::mem::take(&mut st.acc);
    }
    st.t += 1;
    match sb.style {
        SkipStyle::Short => {
            let z: Vec<T> = x1.iter().zip(&u).map(|(&a, &b)| b + a).collect();
            stack_step(&sb.post, p, &mut st.post, z)
        }
        SkipStyle::Long => {
            let w = stack_step(&sb.post, p, &mut st.post, u)?;
            Ok(w.iter().zip(&x).map(|(&a, &b)| a + b).collect())
        }
    }
}

/// Picks a token from one row of logits. Temperature 0 is greedy decoding.
pub fn choose_token<T: Scalar>(logits: &[T], temperature: f64, rng: &mut SeededRng) -> Result<u8> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::arg(format!("temperature must be finite and non-negative, got {temperature}")));
    }
    let l: Vec<f64> = logits.iter().map(|v| v.to_f64_lossless()).collect();
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite logits while sampling".into()));
    }
    let argmax = l.iter().enumerate().fold(0, |best, (i, &v)| if v > l[best] { i } else { best });
    if temperature == 0.0 {
        return Ok(argmax as u8);
    }
    let w: Vec<f64> = l.iter().map(|&v| ((v - l[argmax]) / temperature).exp()).collect();
    Ok(rng.categorical(&w) as u8)
}

/// Token-by-token generator holding the recurrent state of every level.
pub struct Sampler<'m, T> {
    model: &'m Poolformer,
    params: &'m ParamStore<T>,
    state: LevelState<T>,
    prev: u8,
}

impl<'m, T: Scalar> Sampler<'m, T> {
    pub fn new(model: &'m Poolformer, params: &'m ParamStore<T>) -> Self {
        Sampler {
            model,
            params,
            state: LevelState::new(model.top()),
            prev: START_CODE,
        }
    }

    /// Feeds the previous token and returns logits for the next one.
    pub fn next_logits(&mut self) -> Result<Vec<T>> {
        let p = self.params;
        let x = self.model.embedding::<T>(self.prev);
        let h = level_step(self.model.top(), p, &mut self.state, x)?;
        let h = Tensor::new(vec![1, h.len()], h)?;
        let (n, _) = self.model.final_norm().forward(p, &h)?;
        Ok(self.model.head().forward(p, &n)?.into_data())
    }

    /// Forces the next input token (teacher forcing).
    pub fn push(&mut self, token: u8) {
        self.prev = token;
    }
}

/// Recurrent-mode sampling of `length` tokens.
pub fn sample<T: Scalar>(model: &Poolformer, p: &ParamStore<T>, length: usize, temperature: f64, rng: &mut SeededRng) -> Result<Vec<u8>> {
    model.check_length(length)?;
    let mut s = Sampler::new(model, p);
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        let logits = s.next_logits()?;
        let tok = choose_token(&logits, temperature, rng)?;
        s.push(tok);
        out.push(tok);
    }
    Ok(out)
}

/// Reference sampler that recomputes the full forward pass for every token.
pub fn sample_full_forward<T: Scalar>(
    model: &Poolformer,
    p: &ParamStore<T>,
    length: usize,
    temperature: f64,
    rng: &mut SeededRng,
) -> Result<Vec<u8>> {
    model.check_length(length)?;
    let mut inputs = vec![START_CODE; length];
    let mut out = Vec::with_capacity(length);
    for t in 0..length {
        // Positions after `t` are padding; causality makes them irrelevant.
        let logits = model.logits(p, &inputs, &mut ForwardCtx::eval())?;
        let tok = choose_token(&logits.data()[t * VOCAB..(t + 1) * VOCAB], temperature, rng)?;
        if t + 1 < length {
            inputs[t + 1] = tok;
        }
        out.push(tok);
    }
    Ok(out)
}
