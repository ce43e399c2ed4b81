use crate::error::{Error, Result};
use crate::layers::ParamStore;
use crate::scalar::Scalar;

pub const BASE_LR: f64 = 0.002;
pub const WARMUP_STEPS: u64 = 1000;

/// Linear warmup to a constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub warmup: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            base: BASE_LR,
            warmup: WARMUP_STEPS,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, step: u64) -> f64 {
        if self.warmup == 0 || step >= self.warmup {
            self.base
        } else {
            self.base * step as f64 / self.warmup as f64
        }
    }
}

/// `0.002 · min(1, step/1000)`.
pub fn lr_at(step: u64) -> f64 {
    LrSchedule::default().at(step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Adam moments with decoupled weight decay:
/// `p ← p − lr·(m̂/(√v̂ + ε) + wd·p)`.
#[derive(Debug, Clone)]
pub struct AdamWState<T> {
    pub cfg: AdamWConfig,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
    pub step: u64,
}

impl<T: Scalar> AdamWState<T> {
    pub fn new(params: &ParamStore<T>, cfg: AdamWConfig) -> Self {
        AdamWState {
            cfg,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    /// Applies one update at learning rate `lr`. Non-finite gradients abort
    /// before anything is modified.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &ParamStore<T>, lr: f64) -> Result<()> {
        params.ensure_same_layout(grads)?;
        params.ensure_same_layout(&self.m)?;
        if let Some((name, t)) = grads.iter().find(|(_, t)| !t.all_finite()) {
            let bad = t.data().iter().filter(|v| !v.is_finite()).count();
            return Err(Error::Evaluation(format!(
                "non-finite gradient at optimizer step {}: {bad} bad entries in '{name}'",
                self.step + 1
            )));
        }
        self.step += 1;
        let c = self.cfg;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let (lr, wd, eps) = (T::of(lr), T::of(c.weight_decay), T::of(c.eps));
        let one = T::one();
        let tensors = params.tensors_mut().iter_mut().zip(grads.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            let it = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut());
            for (((p, &g), m), v) in it {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
            }
        }
        Ok(())
    }
}

/// Exponential moving average `s ← α s + (1 − α) w` of the parameters.
#[derive(Debug, Clone)]
pub struct EmaState<T> {
    pub decay: f64,
    pub shadow: ParamStore<T>,
}

impl<T: Scalar> EmaState<T> {
    pub fn new(params: &ParamStore<T>, decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::arg(format!("EMA decay must be in [0, 1], got {decay}")));
        }
        Ok(EmaState {
            decay,
            shadow: params.clone(),
        })
    }

    pub fn update(&mut self, params: &ParamStore<T>) -> Result<()> {
        self.shadow.ensure_same_layout(params)?;
        let a = T::of(self.decay);
        let b = T::of(1.0 - self.decay);
        for (s, w) in self.shadow.tensors_mut().iter_mut().zip(params.tensors()) {
            s.data_mut().iter_mut().zip(w.data()).for_each(|(s, &w)| *s = a * *s + b * w);
        }
        Ok(())
    }
}
