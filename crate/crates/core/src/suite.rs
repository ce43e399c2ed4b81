//! Finite-difference gradient checks over every differentiable layer kind
//! and the full model with its loss, run in `f64`.

use crate::error::Result;
use crate::gradcheck::GradCheckReport;
use crate::layers::{
    gelu, gelu_grad, CausalAttention, Dense, DownPool, ForwardCtx, LayerGradCheck, LruMode, MixerKind, Norm, NormKind,
    ParamBuilder, ParamStore, ResBlock, RgLru, RingPreset, UpPool,
};
use crate::model::{build_model, shift_right, DeepMixer, ModelConfig, SkipStyle};
use crate::rng::SeededRng;
use crate::tensor::Tensor;
use crate::training::{nll_bits, nll_bits_grad};

#[derive(Debug, Clone)]
pub struct SuiteRow {
    pub name: String,
    pub report: GradCheckReport,
}

impl SuiteRow {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

const DIM: usize = 4;
const ROWS: usize = 6;

fn input(seed: u64, rows: usize, cols: usize) -> Tensor<f64> {
    let mut rng = SeededRng::new(seed).fork_named("suite-input");
    Tensor::from_fn(&[rows, cols], |_| rng.normal())
}

/// Nudges every parameter away from its structured initial value (unit
/// gains, zero biases) so that no gradient term is trivially zero.
fn jitter(p: &mut ParamStore<f64>, seed: u64) {
    let mut rng = SeededRng::new(seed).fork_named("suite-jitter");
    for t in p.tensors_mut() {
        t.data_mut().iter_mut().for_each(|v| *v += 0.1 * rng.normal());
    }
}

fn store<R>(seed: u64, f: impl FnOnce(&mut ParamBuilder<'_, f64>) -> Result<R>) -> Result<(ParamStore<f64>, R)> {
    let mut p = ParamStore::new();
    let layer = f(&mut ParamBuilder::new(&mut p, SeededRng::new(seed)))?;
    jitter(&mut p, seed);
    Ok((p, layer))
}

fn model_check(name: &str, cfg: &ModelConfig, seed: u64) -> Result<SuiteRow> {
    let (m, p) = build_model::<f64>(cfg, SeededRng::new(seed))?;
    let mut rng = SeededRng::new(seed).fork_named("suite-tokens");
    let targets: Vec<u8> = (0..cfg.pooling_product() * 3).map(|_| rng.below(256) as u8).collect();
    let inputs = shift_right(&targets);
    let m2 = m.clone();
    let (t1, i1, t2, i2) = (targets.clone(), inputs.clone(), targets, inputs);
    let chk = LayerGradCheck::new(
        p,
        None,
        move |p, _| nll_bits(&m.logits(p, &i1, &mut ForwardCtx::train(SeededRng::new(7)))?, &t1),
        move |p, _| {
            let mut g = p.zeros_like();
            let (logits, cache) = m2.forward(p, &i2, &mut ForwardCtx::train(SeededRng::new(7)))?;
            let (_, d) = nll_bits_grad(&logits, &t2, 1.0 / t2.len() as f64)?;
            m2.backward(p, &cache, &d, &mut g)?;
            Ok((None, g))
        },
    );
    Ok(SuiteRow {
        name: name.to_string(),
        report: chk.run()?,
    })
}

/// Runs every check and returns one row per layer variant.
pub fn gradient_suite() -> Result<Vec<SuiteRow>> {
    let mut rows = Vec::new();
    let mut push = |name: String, report: GradCheckReport| rows.push(SuiteRow { name, report });

    for kind in [NormKind::Layer, NormKind::Rms, NormKind::None] {
        let (p, n) = store(1, |pb| Norm::new(pb, "norm", kind, DIM))?;
        let chk = LayerGradCheck::linear_probe(
            p,
            input(1, ROWS, DIM),
            1,
            |p, x| Ok(n.forward(p, x)?.0),
            |p, x, dy, g| {
                let (_, c) = n.forward(p, x)?;
                n.backward(p, &c, dy, g)
            },
        )?;
        push(format!("norm/{}", kind.name()), chk.run()?);
    }

    for bias in [true, false] {
        let (p, d) = store(2, |pb| Dense::new(pb, "dense", DIM, 3, 1.0, bias))?;
        let chk = LayerGradCheck::linear_probe(p, input(2, ROWS, DIM), 2, |p, x| d.forward(p, x), |p, x, dy, g| d.backward(p, x, dy, g))?;
        push(format!("dense/{}", if bias { "bias" } else { "no_bias" }), chk.run()?);
    }

    let chk = LayerGradCheck::linear_probe(
        ParamStore::new(),
        input(3, ROWS, DIM),
        3,
        |_, x| Ok(x.map(gelu)),
        |_, x, dy, _| dy.zip_map(x, |d, v| d * gelu_grad(v)),
    )?;
    push("gelu".into(), chk.run()?);

    for mode in [LruMode::Real, LruMode::Complex] {
        let (p, lru) = store(4, |pb| RgLru::new(pb, "lru", mode, DIM, RingPreset::Small))?;
        let chk = LayerGradCheck::linear_probe(
            p,
            input(4, ROWS, DIM),
            4,
            |p, x| Ok(lru.forward(p, x)?.0),
            |p, x, dy, g| {
                let (_, c) = lru.forward(p, x)?;
                lru.backward(p, &c, dy, g)
            },
        )?;
        push(format!("rg_lru/{}", mode.name()), chk.run()?);
    }

    let mixers = [
        ("mlp", MixerKind::Mlp { hidden: 6 }),
        ("rg_lru_real", MixerKind::RgLru { dim: 6, mode: LruMode::Real, ring: RingPreset::Small }),
        ("rg_lru_complex", MixerKind::RgLru { dim: 6, mode: LruMode::Complex, ring: RingPreset::Small }),
        ("attention", MixerKind::Attention { heads: 2, multi_query: false }),
    ];
    for (label, kind) in mixers {
        for gated in [true, false] {
            // Dropout is on, with the mask pinned by reseeding the context per call.
            let (p, b) = store(5, |pb| ResBlock::new(pb, "block", DIM, kind, gated, NormKind::Layer, 0.25, 1.0))?;
            let chk = LayerGradCheck::linear_probe(
                p,
                input(5, ROWS, DIM),
                5,
                |p, x| Ok(b.forward(p, x, &mut ForwardCtx::train(SeededRng::new(9)))?.0),
                |p, x, dy, g| {
                    let (_, c) = b.forward(p, x, &mut ForwardCtx::train(SeededRng::new(9)))?;
                    b.backward(p, &c, dy, g)
                },
            )?;
            push(format!("resblock/{label}/{}", if gated { "gated" } else { "ungated" }), chk.run()?);
        }
    }

    for groups in [1, 2, DIM] {
        let (p, (down, up)) = store(6, |pb| {
            Ok((DownPool::new(pb, "down", DIM, 2, groups)?, UpPool::new(pb, "up", DIM, 2, groups, 1.0)?))
        })?;
        let chk = LayerGradCheck::linear_probe(
            p.clone(),
            input(6, ROWS, DIM),
            6,
            |p, x| down.forward(p, x),
            |p, x, dy, g| down.backward(p, x, dy, g),
        )?;
        push(format!("down_pool/G={groups}"), chk.run()?);
        let chk = LayerGradCheck::linear_probe(p, input(7, 3, DIM), 7, |p, x| up.forward(p, x), |p, x, dy, g| up.backward(p, x, dy, g))?;
        push(format!("up_pool/G={groups}"), chk.run()?);
    }

    for mq in [false, true] {
        let (p, a) = store(8, |pb| CausalAttention::new(pb, "attention", DIM, 2, mq))?;
        let chk = LayerGradCheck::linear_probe(
            p,
            input(8, ROWS, DIM),
            8,
            |p, x| Ok(a.forward(p, x)?.0),
            |p, x, dy, g| {
                let (_, c) = a.forward(p, x)?;
                a.backward(p, &c, dy, g)
            },
        )?;
        push(format!("attention/{}", if mq { "multi_query" } else { "multi_head" }), chk.run()?);
    }

    let tiny = ModelConfig {
        dim: DIM,
        rec_dim: DIM,
        mlp_dim: Some(6),
        pooling: vec![2, 2],
        layers: vec![1, 1, 1],
        dropout: 0.2,
        init_scale: Some(0.7),
        groups: Some(2),
        ..ModelConfig::default()
    };
    rows.push(model_check("poolformer+nll/short_skip", &tiny, 10)?);
    let long = ModelConfig {
        skip: SkipStyle::Long,
        deepest: DeepMixer::Attention,
        heads: 2,
        norm: NormKind::Rms,
        gated: false,
        ..tiny
    };
    rows.push(model_check("poolformer+nll/long_skip_attention", &long, 11)?);
    Ok(rows)
}
