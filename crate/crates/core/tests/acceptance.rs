//! Acceptance suite: twelve criteria run in sequence, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so that nothing else competes for the
//! CPU while the wall-clock comparison of criterion 10 is measured.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex;
use poolformer::data::{split_assignment, synth_corpus, Split};
use poolformer::dsp::{circular_convolve, fft, ifft, pcm16_to_unit, ComplexVec, Encoding, MuLawCodec};
use poolformer::layers::{count_rnn_params, ForwardCtx, LruMode, ParamBuilder, ParamStore, RgLru, RingPreset};
use poolformer::metrics::linalg::{frobenius, psd_sqrt};
use poolformer::metrics::{fit_gaussian, frechet_distance, inception_score, GaussianStats};
use poolformer::model::{build_model, shift_right, ModelConfig};
use poolformer::scan::{blelloch_prescan, blelloch_scan, conv_recurrence, sequential_recurrence, DiagonalAffineSeq};
use poolformer::suite::gradient_suite;
use poolformer::training::{evaluate_nll, lr_at, train, EmaState, LogRow, TrainConfig};
use poolformer::{SeededRng, Tensor};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn naive_dft(re: &[f64], im: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut out = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        for t in 0..n {
            let ang = sign * 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
            let (s, c) = ang.sin_cos();
            out.0[k] += re[t] * c - im[t] * s;
            out.1[k] += re[t] * s + im[t] * c;
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = SeededRng::new(1);
    let (mut worst_fft, mut worst_rt) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = 1usize << (3 + rng.below(8));
        let re: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let im: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let v = ComplexVec::new(re.clone(), im.clone()).map_err(|e| e.to_string())?;
        let f = fft(&v).map_err(|e| e.to_string())?;
        let (nr, ni) = naive_dft(&re, &im, -1.0);
        worst_fft = worst_fft.max(f.max_abs_diff(&ComplexVec::new(nr, ni).unwrap()));
        worst_rt = worst_rt.max(ifft(&f).map_err(|e| e.to_string())?.max_abs_diff(&v));
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(worst_fft < 1e-9, || format!("fft vs DFT error {worst_fft:e}"))?;
    ensure(worst_rt < 1e-9, || format!("roundtrip error {worst_rt:e}"))?;
    ensure(secs < 10.0, || format!("took {secs:.1} s"))?;
    Ok(format!("max |fft−dft| {worst_fft:.1e}, roundtrip {worst_rt:.1e}, {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = 1 + rng.below(300);
        let f: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let got = circular_convolve(&f, &g).map_err(|e| e.to_string())?;
        for k in 0..n {
            let want: f64 = (0..n).map(|j| f[j] * g[(k + n - j) % n]).sum();
            worst = worst.max((got[k] - want).abs());
        }
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("max |fft conv − direct sum| {worst:.1e} over 100 pairs"))
}

fn random_seq(rng: &mut SeededRng, steps: usize, dim: usize, constant_a: bool) -> DiagonalAffineSeq<f64> {
    let n = steps * dim;
    let polar = |rng: &mut SeededRng| {
        let z = Complex::from_polar(rng.uniform_range(0.5, 0.999), rng.uniform_range(-3.1, 3.1));
        (z.re, z.im)
    };
    let (mut a_re, mut a_im) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let lane: Vec<(f64, f64)> = (0..dim).map(|_| polar(rng)).collect();
    for i in 0..n {
        let (r, im) = if constant_a { lane[i % dim] } else { polar(rng) };
        a_re.push(r);
        a_im.push(im);
    }
    let b_re = (0..n).map(|_| rng.normal()).collect();
    let b_im = (0..n).map(|_| rng.normal()).collect();
    DiagonalAffineSeq::complex(steps, dim, a_re, a_im, b_re, b_im).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = SeededRng::new(3);
    let mut worst = 0.0f64;
    for &steps in &[1usize, 7, 100, 1000, 1 << 14] {
        let seq = random_seq(&mut rng, steps, 8, false);
        let reference = sequential_recurrence(&seq);
        for workers in [1, 2, 4] {
            worst = worst.max(blelloch_scan(&seq, workers).max_abs_diff(&reference));
        }
    }
    ensure(worst < 1e-12, || format!("max scan error {worst:e}"))?;
    let b = vec![3.0, 1.0, 7.0, 0.0, 4.0, 1.0, 6.0, 3.0];
    let sums = DiagonalAffineSeq::real(8, 1, vec![1.0; 8], b).unwrap();
    let pre = blelloch_prescan(&sums, 2);
    let want = [0.0, 3.0, 4.0, 11.0, 11.0, 15.0, 16.0, 22.0];
    ensure(pre.b_re == want, || format!("prescan gave {:?}", pre.b_re))?;
    Ok(format!("max |scan − sequential| {worst:.1e} up to S=16384 with 1/2/4 workers; prescan {:?}", pre.b_re))
}

fn criterion_4() -> Outcome {
    let mut rng = SeededRng::new(4);
    let mut worst = 0.0f64;
    for &steps in &[1usize, 5, 64, 333, 1 << 10] {
        let seq = random_seq(&mut rng, steps, 4, true);
        let got = conv_recurrence(&seq).map_err(|e| e.to_string())?;
        worst = worst.max(got.max_abs_diff(&sequential_recurrence(&seq)));
    }
    ensure(worst < 1e-9, || format!("max error {worst:e}"))?;
    Ok(format!("max |conv − sequential| {worst:.1e} up to S=1024"))
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let rows = gradient_suite().map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("{} ({:e})", r.name, r.report.max_rel_error))
        .collect();
    ensure(failed.is_empty(), || format!("failed: {}", failed.join(", ")))?;
    ensure(secs < 120.0, || format!("took {secs:.1} s"))?;
    let worst = rows.iter().map(|r| r.report.max_rel_error).fold(0.0, f64::max);
    Ok(format!("{} layer checks, worst relative error {worst:.1e}, {secs:.1} s", rows.len()))
}

fn desk_model(pooling: Vec<usize>, layers: Vec<usize>) -> ModelConfig {
    ModelConfig {
        dim: 32,
        rec_dim: 64,
        pooling,
        layers,
        init_scale: Some(0.0),
        ..ModelConfig::default()
    }
}

fn criterion_6() -> Outcome {
    let cfg = ModelConfig {
        init_scale: Some(1.0),
        ..desk_model(vec![2, 4], vec![2, 2, 2])
    };
    let (model, params) = build_model::<f64>(&cfg, SeededRng::new(6)).map_err(|e| e.to_string())?;
    let mut rng = SeededRng::new(60);
    let s = 64;
    for trial in 0..20 {
        let targets: Vec<u8> = (0..s).map(|_| rng.below(256) as u8).collect();
        let inputs = shift_right(&targets);
        let t = 1 + rng.below(s - 1);
        let mut perturbed = inputs.clone();
        perturbed[t] = perturbed[t].wrapping_add(1 + rng.below(255) as u8);
        let a = model.logits(&params, &inputs, &mut ForwardCtx::eval()).map_err(|e| e.to_string())?;
        let b = model.logits(&params, &perturbed, &mut ForwardCtx::eval()).map_err(|e| e.to_string())?;
        for pos in 0..t {
            ensure(a.row(pos) == b.row(pos), || format!("trial {trial}: position {pos} changed after perturbing {t}"))?;
        }
        ensure(a.row(t) != b.row(t), || format!("trial {trial}: perturbation at {t} had no effect"))?;
    }
    Ok("20 perturbations, earlier logits bit-identical".into())
}

fn criterion_7() -> Outcome {
    let (model, _) = build_model::<f32>(&ModelConfig::baseline(), SeededRng::new(7)).map_err(|e| e.to_string())?;
    let layers = model.rg_lru_layers();
    ensure(layers == 36, || format!("{layers} RG-LRU layers"))?;
    let mut store = ParamStore::<f64>::new();
    let lru = RgLru::new(&mut ParamBuilder::new(&mut store, SeededRng::new(0)), "lru", LruMode::Real, 256, RingPreset::Small)
        .map_err(|e| e.to_string())?;
    let formula = count_rnn_params("rg_lru", 256).map_err(|e| e.to_string())?;
    ensure(lru.param_count() == 131_840 && store.scalar_count() == 131_840 && formula == 131_840, || {
        format!("layer {} / store {} / formula {formula}", lru.param_count(), store.scalar_count())
    })?;
    Ok(format!(
        "36 RG-LRU layers; real RG-LRU D=256 has 131840 parameters; baseline total {}",
        model.param_count()
    ))
}

fn criterion_8() -> Outcome {
    let k = 6;
    let same = Tensor::from_fn(&[10, k], |i| [0.1, 0.3, 0.2, 0.15, 0.05, 0.2][i % k]);
    let is_same = inception_score(&same).map_err(|e| e.to_string())?;
    ensure((is_same - 1.0).abs() < 1e-12, || format!("IS of identical rows {is_same}"))?;
    let onehot = Tensor::from_fn(&[3 * k, k], |i| if (i / k) % k == i % k { 1.0 } else { 0.0 });
    let is_k = inception_score(&onehot).map_err(|e| e.to_string())?;
    ensure((is_k - k as f64).abs() < 1e-12, || format!("IS of balanced one-hot rows {is_k}"))?;

    let mut rng = SeededRng::new(8);
    for trial in 0..1000 {
        let (n, k) = (1 + rng.below(16), 1 + rng.below(12));
        let temp = rng.uniform_range(0.05, 5.0);
        let mut p = Tensor::from_fn(&[n, k], |_| (rng.normal() / temp).exp());
        for i in 0..n {
            let s: f64 = p.row(i).iter().sum();
            p.row_mut(i).iter_mut().for_each(|v| *v /= s);
        }
        let is = inception_score(&p).map_err(|e| e.to_string())?;
        ensure((1.0 - 1e-12..=k as f64 + 1e-12).contains(&is), || format!("matrix {trial}: IS {is} outside [1, {k}]"))?;
    }

    let d = 6;
    let feats = Tensor::from_fn(&[50, d], |_| rng.normal());
    let g = fit_gaussian(&feats).map_err(|e| e.to_string())?;
    let self_fid = frechet_distance(&g, &g).map_err(|e| e.to_string())?;
    ensure(self_fid.abs() < 1e-9, || format!("FID(P, P) = {self_fid:e}"))?;

    let (mu1, s1, mu2, s2) = (0.3, 1.7, -1.1, 0.4);
    let one = |mu: f64, s: f64| GaussianStats {
        mean: vec![mu],
        cov: Tensor::new(vec![1, 1], vec![s * s]).unwrap(),
    };
    let fid1 = frechet_distance(&one(mu1, s1), &one(mu2, s2)).map_err(|e| e.to_string())?;
    let want = (mu1 - mu2) * (mu1 - mu2) + (s1 - s2) * (s1 - s2);
    ensure((fid1 - want).abs() < 1e-9, || format!("1-D FID {fid1} vs {want}"))?;

    let mut worst = 0.0f64;
    for _ in 0..20 {
        let b = Tensor::from_fn(&[d, d], |_| rng.normal());
        let a = b.matmul(&b.transpose().unwrap()).unwrap();
        let a = a.zip_map(&a.transpose().unwrap(), |x, y| 0.5 * (x + y)).unwrap();
        let r = psd_sqrt(&a).map_err(|e| e.to_string())?;
        worst = worst.max(frobenius(&r.matmul(&r).unwrap().sub(&a).unwrap()));
    }
    ensure(worst < 1e-8, || format!("psd_sqrt reconstruction error {worst:e}"))?;
    Ok(format!("IS identical {is_same}, one-hot {is_k}; FID(P,P) {self_fid:.1e}; 1-D FID {fid1:.6}; sqrt error {worst:.1e}"))
}

fn criterion_11() -> Outcome {
    let codec = MuLawCodec::default();
    let mut prev = 0u8;
    for s in i16::MIN..=i16::MAX {
        let c = codec.encode(pcm16_to_unit(s)).map_err(|e| e.to_string())?;
        ensure(s == i16::MIN || c >= prev, || format!("code drops at PCM level {s}"))?;
        prev = c;
    }
    let n = 8000;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * 441.0 * i as f64 / 8000.0).sin()).collect();
    let enc = Encoding::MuLaw(codec);
    let (mut sig, mut noise) = (0.0, 0.0);
    for &v in &x {
        let back = enc.decode(enc.encode(v).map_err(|e| e.to_string())?);
        sig += v * v;
        noise += (v - back) * (v - back);
    }
    let snr = 10.0 * (sig / noise).log10();
    ensure(snr > 30.0, || format!("SNR {snr:.2} dB"))?;
    let mut rng = SeededRng::new(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = rng.uniform_range(-1.0, 1.0);
        worst = worst.max((codec.expand(codec.compress(v)) - v).abs());
    }
    ensure(worst < 1e-12, || format!("curve inverse error {worst:e}"))?;
    Ok(format!("monotone over 65536 levels; sine SNR {snr:.2} dB; F⁻¹∘F error {worst:.1e}"))
}

fn criterion_12() -> Outcome {
    let alpha = 0.999;
    let mut s0 = ParamStore::<f64>::new();
    s0.add("w", Tensor::from_vec(vec![1.5, -2.0, 0.25])).unwrap();
    let mut w = ParamStore::<f64>::new();
    w.add("w", Tensor::from_vec(vec![-0.5, 4.0, 0.0])).unwrap();
    let mut ema = EmaState::new(&s0, alpha).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for n in 1..=1000 {
        ema.update(&w).map_err(|e| e.to_string())?;
        let an = alpha.powi(n);
        for ((s, a), b) in ema.shadow.tensors()[0].data().iter().zip(s0.tensors()[0].data()).zip(w.tensors()[0].data()) {
            worst = worst.max((s - (an * a + (1.0 - an) * b)).abs());
        }
    }
    ensure(worst < 1e-12, || format!("EMA closed-form error {worst:e}"))?;
    ensure(lr_at(0) == 0.0, || format!("lr_at(0) = {}", lr_at(0)))?;
    ensure(lr_at(1000) == 0.002, || format!("lr_at(1000) = {}", lr_at(1000)))?;
    Ok(format!("EMA closed form error {worst:.1e} over 1000 steps; lr_at(0)=0, lr_at(1000)=0.002"))
}

struct DeskData {
    train: Vec<Vec<u8>>,
    val: Vec<Vec<u8>>,
}

fn desk_data() -> DeskData {
    let enc = Encoding::MuLaw(MuLawCodec::default());
    let items = synth_corpus(4, 64, 1024, enc, 2024).unwrap();
    let splits = split_assignment(items.len(), 2024);
    let mut data = DeskData { train: vec![], val: vec![] };
    for ((_, toks), split) in items.into_iter().zip(splits) {
        match split {
            Split::Train => data.train.push(toks),
            Split::Val => data.val.push(toks),
            Split::Test => {}
        }
    }
    data
}

fn desk_train_config() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        crop: 256,
        epochs: 1000,
        max_steps: 2000,
        eval_every: 5,
        ..TrainConfig::default()
    }
}

/// First logged wall-clock time at which the validation NLL is at or below `threshold`.
fn time_to(log: &[LogRow], threshold: f64) -> Option<f64> {
    log.iter().find(|r| r.val_nll_bits.is_some_and(|v| v <= threshold)).map(|r| r.wall_seconds)
}

fn print_curve(label: &str, log: &[LogRow]) {
    let points: Vec<String> = log
        .iter()
        .filter_map(|r| r.val_nll_bits.map(|v| format!("{}:{:.0}s:{v:.2}", r.step, r.wall_seconds)))
        .collect();
    println!("    {label} curve (step:seconds:val bits): {}", points.join(" "));
}

struct DeskRun {
    initial: f64,
    final_val: f64,
    log: Vec<LogRow>,
    secs: f64,
}

fn run_desk(cfg: &ModelConfig, data: &DeskData) -> Result<DeskRun, String> {
    let (model, params) = build_model::<f32>(cfg, SeededRng::new(9)).map_err(|e| e.to_string())?;
    let initial = evaluate_nll(&model, &params, &data.val).map_err(|e| e.to_string())?;
    let started = Instant::now();
    let out = train(&model, params, &data.train, &data.val, &desk_train_config(), 9, None).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    ensure(out.steps == 2000, || format!("ran {} steps", out.steps))?;
    let final_val = evaluate_nll(&model, &out.ema, &data.val).map_err(|e| e.to_string())?;
    Ok(DeskRun {
        initial,
        final_val,
        log: out.log,
        secs,
    })
}

fn memorisation() -> Result<f64, String> {
    let cfg = ModelConfig {
        dim: 32,
        rec_dim: 32,
        pooling: vec![2],
        layers: vec![1, 1],
        ..ModelConfig::default()
    };
    let (model, params) = build_model::<f32>(&cfg, SeededRng::new(12)).map_err(|e| e.to_string())?;
    let mut rng = SeededRng::new(13);
    let seq: Vec<u8> = (0..64).map(|_| rng.below(256) as u8).collect();
    let tc = TrainConfig {
        batch_size: 1,
        epochs: 500,
        lr: 0.01,
        warmup: 50,
        ema: 0.0,
        eval_every: 500,
        ..TrainConfig::default()
    };
    let set = vec![seq];
    let out = train(&model, params, &set, &set, &tc, 14, None).map_err(|e| e.to_string())?;
    evaluate_nll(&model, &out.params, &set).map_err(|e| e.to_string())
}

fn criterion_9(data: &DeskData, pooled: &Result<DeskRun, String>) -> Outcome {
    let mem = memorisation()?;
    ensure(mem < 1.0, || format!("memorisation reached only {mem:.3} bits"))?;
    let run = pooled.as_ref().map_err(Clone::clone)?;
    let (initial, final_val, secs) = (run.initial, run.final_val, run.secs);
    print_curve("pooled", &run.log);
    ensure((initial - 8.0).abs() < 1e-6, || format!("initial NLL {initial}"))?;
    ensure(final_val < 4.0, || format!("final eval NLL {final_val:.3} bits"))?;
    ensure(secs < 900.0, || format!("took {secs:.0} s"))?;
    Ok(format!(
        "EMA val NLL {initial:.3} → {final_val:.3} bits in 2000 steps, {secs:.0} s ({} train / {} val sequences); memorisation {mem:.3} bits",
        data.train.len(),
        data.val.len()
    ))
}

const THRESHOLD_BITS: f64 = 4.0;

fn criterion_10(pooled: &Result<DeskRun, String>, unpooled: &Result<DeskRun, String>) -> Outcome {
    let p = pooled.as_ref().map_err(Clone::clone)?;
    let u = unpooled.as_ref().map_err(Clone::clone)?;
    print_curve("unpooled", &u.log);
    let tp = time_to(&p.log, THRESHOLD_BITS);
    let tu = time_to(&u.log, THRESHOLD_BITS);
    let show = |t: Option<f64>| t.map_or("never".to_string(), |t| format!("{t:.0} s"));
    let tp_val = tp.ok_or_else(|| format!("pooled model never reached {THRESHOLD_BITS} bits"))?;
    ensure(tu.is_none_or(|tu| tp_val <= tu), || {
        format!("pooled {} vs unpooled {} to {THRESHOLD_BITS} bits", show(tp), show(tu))
    })?;
    Ok(format!("time to {THRESHOLD_BITS} bits: pooled {} ≤ unpooled {}", show(tp), show(tu)))
}

fn report(n: usize, name: &str, outcome: Outcome, failures: &mut Vec<usize>) {
    match outcome {
        Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
        Err(why) => {
            println!("criterion {n:>2} FAIL  {name}: {why}");
            failures.push(n);
        }
    }
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    })
}

fn main() -> ExitCode {
    let mut failures = Vec::new();
    let quick: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "FFT oracle", criterion_1),
        (2, "convolution theorem", criterion_2),
        (3, "scan equivalence", criterion_3),
        (4, "convolutional view", criterion_4),
        (5, "gradient suite", criterion_5),
        (6, "causality", criterion_6),
        (7, "architecture accounting", criterion_7),
        (8, "metrics math", criterion_8),
        (11, "mu-law", criterion_11),
        (12, "EMA and schedule", criterion_12),
    ];
    for (n, name, f) in quick {
        report(n, name, guarded(f), &mut failures);
    }

    // The pooled run serves criterion 9 and is the fast side of criterion 10.
    let data = desk_data();
    let pooled = catch_unwind(AssertUnwindSafe(|| run_desk(&desk_model(vec![2, 4], vec![2, 2, 2]), &data)))
        .unwrap_or_else(|_| Err("pooled run panicked".into()));
    report(9, "desk-scale learning", guarded(|| criterion_9(&data, &pooled)), &mut failures);
    let unpooled = catch_unwind(AssertUnwindSafe(|| run_desk(&desk_model(vec![], vec![10]), &data)))
        .unwrap_or_else(|_| Err("unpooled run panicked".into()));
    report(10, "pooling benefit", guarded(|| criterion_10(&pooled, &unpooled)), &mut failures);

    if failures.is_empty() {
        println!("acceptance: all 12 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failures:?}");
        ExitCode::FAILURE
    }
}
