use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use super::loss::{nll_bits_grad, nll_bits_sum};
use super::optim::{AdamWConfig, AdamWState, EmaState, LrSchedule};
use crate::error::{Error, Result};
use crate::layers::{ForwardCtx, ParamStore};
use crate::model::{parse_f64, parse_usize, save_checkpoint, shift_right, Poolformer, START_CODE};
use crate::rng::SeededRng;
use crate::scalar::{DType, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps (0 = no limit).
    pub max_steps: usize,
    pub lr: f64,
    pub warmup: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub ema: f64,
    /// Evaluate every this many epochs; the last epoch is always evaluated.
    pub eval_every: usize,
    /// Train on random windows of this length instead of whole sequences (0 = off).
    pub crop: usize,
    pub dtype: DType,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 1,
            max_steps: 0,
            lr: super::optim::BASE_LR,
            warmup: super::optim::WARMUP_STEPS,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 1e-4,
            ema: 0.999,
            eval_every: 1,
            crop: 0,
            dtype: DType::F32,
        }
    }
}

pub const TRAIN_KEYS: &[&str] = &[
    "batch_size",
    "epochs",
    "max_steps",
    "lr",
    "warmup",
    "beta1",
    "beta2",
    "weight_decay",
    "ema",
    "eval_every",
    "crop",
    "dtype",
];

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            base: self.lr,
            warmup: self.warmup,
        }
    }

    pub fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "batch_size" => self.batch_size = parse_usize(key, v)?,
            "epochs" => self.epochs = parse_usize(key, v)?,
            "max_steps" => self.max_steps = parse_usize(key, v)?,
            "lr" => self.lr = parse_f64(key, v)?,
            "warmup" => self.warmup = parse_usize(key, v)? as u64,
            "beta1" => self.beta1 = parse_f64(key, v)?,
            "beta2" => self.beta2 = parse_f64(key, v)?,
            "weight_decay" => self.weight_decay = parse_f64(key, v)?,
            "ema" => self.ema = parse_f64(key, v)?,
            "eval_every" => self.eval_every = parse_usize(key, v)?,
            "crop" => self.crop = parse_usize(key, v)?,
            "dtype" => self.dtype = DType::parse(v).ok_or_else(|| Error::arg(format!("dtype: expected f32 or f64, got '{v}'")))?,
            other => return Err(Error::arg(format!("unknown train key '{other}'"))),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("lr", format!("{:?}", self.lr)),
            ("warmup", self.warmup.to_string()),
            ("beta1", format!("{:?}", self.beta1)),
            ("beta2", format!("{:?}", self.beta2)),
            ("weight_decay", format!("{:?}", self.weight_decay)),
            ("ema", format!("{:?}", self.ema)),
            ("eval_every", self.eval_every.to_string()),
            ("crop", self.crop.to_string()),
            ("dtype", self.dtype.name().to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::arg("eval_every must be at least 1"));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::arg(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::arg("Adam betas must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.ema) {
            return Err(Error::arg(format!("EMA decay must be in [0, 1], got {}", self.ema)));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub step: u64,
    pub lr: f64,
    pub train_nll_bits: f64,
    pub val_nll_bits: Option<f64>,
    pub wall_seconds: f64,
}

pub const LOG_HEADER: &str = "epoch,step,lr,train_nll_bits,val_nll_bits,wall_seconds";

impl LogRow {
    pub fn csv(&self) -> String {
        let val = self.val_nll_bits.map_or(String::new(), |v| format!("{v:.6}"));
        format!(
            "{},{},{:.6e},{:.6},{val},{:.3}",
            self.epoch, self.step, self.lr, self.train_nll_bits, self.wall_seconds
        )
    }
}

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv());
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub log: Vec<LogRow>,
    /// Raw weights after the last step.
    pub params: ParamStore<T>,
    /// EMA weights after the last step.
    pub ema: ParamStore<T>,
    /// EMA weights at the best validation NLL.
    pub best: ParamStore<T>,
    pub best_val: f64,
    pub steps: u64,
}

/// Mean bits per token of `sequences` under the model (eval mode).
pub fn evaluate_nll<T: Scalar>(model: &Poolformer, p: &ParamStore<T>, sequences: &[Vec<u8>]) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::arg("no sequences to evaluate"));
    }
    let (mut bits, mut n) = (0.0, 0usize);
    for seq in sequences {
        let logits = model.logits(p, &shift_right(seq), &mut ForwardCtx::eval())?;
        bits += nll_bits_sum(&logits, seq)?;
        n += seq.len();
    }
    Ok(bits / n as f64)
}

/// `(inputs, targets)` for a training item; with cropping, the input of the
/// first position is the token preceding the window.
fn make_item(seq: &[u8], crop: usize, rng: &mut SeededRng) -> (Vec<u8>, Vec<u8>) {
    if crop == 0 || crop >= seq.len() {
        return (shift_right(seq), seq.to_vec());
    }
    let start = rng.below(seq.len() - crop + 1);
    let first = if start == 0 { START_CODE } else { seq[start - 1] };
    let mut inputs = Vec::with_capacity(crop);
    inputs.push(first);
    inputs.extend_from_slice(&seq[start..start + crop - 1]);
    (inputs, seq[start..start + crop].to_vec())
}

/// Runs the epoch loop: seeded shuffles, AdamW with warmup, EMA, per-epoch
/// evaluation of the EMA weights on `val` (or on `train` when `val` is empty).
///
/// With `out_dir`, writes `train_log.csv`, `best.ckpt` (EMA weights at the
/// best validation NLL) and `last.ckpt` (raw weights).
pub fn train<T: Scalar>(
    model: &Poolformer,
    params: ParamStore<T>,
    train_set: &[Vec<u8>],
    val_set: &[Vec<u8>],
    cfg: &TrainConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    for seq in train_set.iter().chain(val_set) {
        model.check_length(seq.len())?;
    }
    if cfg.crop != 0 {
        model.check_length(cfg.crop)?;
    }
    let val_set = if val_set.is_empty() { train_set } else { val_set };
    let rng = SeededRng::new(seed).fork_named("train");
    let sched = cfg.schedule();
    let mut params = params;
    let mut opt = AdamWState::new(&params, cfg.adamw());
    let mut ema = EmaState::new(&params, cfg.ema)?;
    let mut best = ema.shadow.clone();
    let mut best_val = f64::INFINITY;
    let mut log = Vec::new();
    let started = Instant::now();
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let write_log = |log: &[LogRow]| -> Result<()> {
        if let Some(dir) = out_dir {
            std::fs::write(dir.join("train_log.csv"), log_csv(log))?;
        }
        Ok(())
    };

    'epochs: for epoch in 0..cfg.epochs {
        let mut erng = rng.fork(epoch as u64);
        erng.shuffle(&mut order);
        let (mut bits, mut tokens) = (0.0, 0usize);
        let mut lr = 0.0;
        let mut stop = false;
        for batch in order.chunks(cfg.batch_size) {
            let items: Vec<_> = batch.iter().map(|&i| make_item(&train_set[i], cfg.crop, &mut erng)).collect();
            let n_tok: usize = items.iter().map(|(_, t)| t.len()).sum();
            grads.fill_zero();
            let mut ctx = ForwardCtx::train(rng.fork_named(&format!("dropout/{}", opt.step)));
            for (inputs, targets) in &items {
                let (logits, cache) = model.forward(&params, inputs, &mut ctx)?;
                let (b, dlogits) = nll_bits_grad(&logits, targets, 1.0 / n_tok as f64)?;
                if !b.is_finite() {
                    return Err(Error::Evaluation(format!("training loss became non-finite at step {}", opt.step + 1)));
                }
                bits += b;
                model.backward(&params, &cache, &dlogits, &mut grads)?;
            }
            tokens += n_tok;
            lr = sched.at(opt.step + 1);
            opt.step(&mut params, &grads, lr)?;
            ema.update(&params)?;
            if cfg.max_steps != 0 && opt.step as usize >= cfg.max_steps {
                stop = true;
                break;
            }
        }
        let last = stop || epoch + 1 == cfg.epochs;
        let val = if last || (epoch + 1) % cfg.eval_every == 0 {
            let v = evaluate_nll(model, &ema.shadow, val_set)?;
            if v < best_val {
                best_val = v;
                best = ema.shadow.clone();
                if let Some(dir) = out_dir {
                    save_checkpoint(&dir.join("best.ckpt"), model.config(), &best)?;
                }
            }
            Some(v)
        } else {
            None
        };
        log.push(LogRow {
            epoch: epoch + 1,
            step: opt.step,
            lr,
            train_nll_bits: bits / tokens as f64,
            val_nll_bits: val,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        write_log(&log)?;
        if stop {
            break 'epochs;
        }
    }
    if let Some(dir) = out_dir {
        save_checkpoint(&dir.join("last.ckpt"), model.config(), &params)?;
        if best_val.is_infinite() {
            save_checkpoint(&dir.join("best.ckpt"), model.config(), &ema.shadow)?;
        }
    }
    Ok(TrainOutcome {
        log,
        params,
        ema: ema.shadow,
        best,
        best_val,
        steps: opt.step,
    })
}
