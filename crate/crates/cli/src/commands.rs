use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use poolformer::data::{generate_dataset, ingest_wav, write_dataset, Dataset, Split, WavFile, SAMPLE_RATE};
use poolformer::dsp::{unit_to_pcm16, Encoding};
use poolformer::metrics::{
    decode_tokens, fit_gaussian, frechet_distance, inception_score, modified_is_and_am, ClassifierConfig, MetricsReport,
    TinyClassifier,
};
use poolformer::layers::ParamStore;
use poolformer::model::{build_model, load_checkpoint, sample, Poolformer};
use poolformer::suite::gradient_suite;
use poolformer::training::{evaluate_nll, train};
use poolformer::{DType, Error, Result, Scalar, SeededRng};

use crate::config::{DataKind, RunConfig};

/// Everything a command needs: the effective configuration and the run directory.
pub struct Run {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

impl Run {
    fn checkpoint(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join("best.ckpt"))
    }

    fn encoding(&self) -> Result<Encoding> {
        Encoding::parse(&self.cfg.data.encoding)
    }

    /// Loads a checkpoint and insists that it matches the configured architecture.
    fn load_model<T: Scalar>(&self, path: &Path) -> Result<(Poolformer, ParamStore<T>)> {
        let (model, params) = load_checkpoint::<T>(path)?;
        if model.config() != &self.cfg.model {
            return Err(Error::arg(format!(
                "checkpoint {} was trained with a different model configuration:\n{}",
                path.display(),
                model.config().to_text()
            )));
        }
        Ok((model, params))
    }
}

pub fn generate_data(run: &Run) -> Result<()> {
    let d = &run.cfg.data;
    let m = run.cfg.model.pooling_product();
    if d.length == 0 || d.length % m != 0 {
        return Err(Error::arg(format!(
            "data.length {} must be a positive multiple of the pooling product {m}",
            d.length
        )));
    }
    let enc = run.encoding()?;
    let ds = match d.kind {
        DataKind::Synthetic => generate_dataset(&d.dir, d.classes, d.count, d.length, enc, run.cfg.seed)?,
        DataKind::Wav => {
            let src = d.wav.as_ref().ok_or_else(|| Error::arg("data.kind = wav needs data.wav"))?;
            let sr = WavFile::read(src)?.sample_rate;
            let chunks = ingest_wav(src, d.length, enc)?;
            if chunks.is_empty() {
                return Err(Error::arg(format!("{} is shorter than one chunk of {} samples", src.display(), d.length)));
            }
            write_dataset(&d.dir, chunks.into_iter().map(|c| (0, c)).collect(), sr, enc, 1, run.cfg.seed)?
        }
    };
    let count = |s| ds.entries(s).count();
    println!(
        "wrote {} sequences of length {} to {} (train {}, val {}, test {})",
        ds.entries.len(),
        ds.length,
        ds.root.display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test)
    );
    Ok(())
}

pub fn train_cmd(run: &Run) -> Result<()> {
    match run.cfg.train.dtype {
        DType::F32 => train_typed::<f32>(run),
        DType::F64 => train_typed::<f64>(run),
    }
}

fn train_typed<T: Scalar>(run: &Run) -> Result<()> {
    let ds = Dataset::load(&run.cfg.data.dir)?;
    let (train_set, _) = ds.split(Split::Train)?;
    let (val_set, _) = ds.split(Split::Val)?;
    let (model, params) = build_model::<T>(&run.cfg.model, SeededRng::new(run.cfg.seed).fork_named("model"))?;
    println!("model: {} parameters, {} RG-LRU layers", model.param_count(), model.rg_lru_layers());
    let outcome = train(&model, params, &train_set, &val_set, &run.cfg.train, run.cfg.seed, Some(&run.out))?;
    if let Some(last) = outcome.log.last() {
        println!(
            "{} steps; final train NLL {:.4} bits; best val NLL {:.4} bits",
            outcome.steps, last.train_nll_bits, outcome.best_val
        );
    }
    Ok(())
}

fn write_tokens_and_wav(dir: &Path, i: usize, tokens: &[u8], enc: Encoding, sample_rate: u32) -> Result<()> {
    std::fs::write(dir.join(format!("{i:05}.tok")), tokens)?;
    let wav = WavFile {
        sample_rate,
        samples: decode_tokens(tokens, enc).into_iter().map(unit_to_pcm16).collect(),
    };
    wav.write(&dir.join(format!("{i:05}.wav")))
}

pub fn sample_cmd(run: &Run) -> Result<()> {
    match run.cfg.train.dtype {
        DType::F32 => sample_typed::<f32>(run),
        DType::F64 => sample_typed::<f64>(run),
    }
}

fn sample_typed<T: Scalar>(run: &Run) -> Result<()> {
    let (model, params) = run.load_model::<T>(&run.checkpoint(&run.cfg.sample.checkpoint))?;
    let s = &run.cfg.sample;
    let length = if s.length == 0 { run.cfg.data.length } else { s.length };
    let enc = run.encoding()?;
    let sample_rate = Dataset::load(&run.cfg.data.dir).map_or(SAMPLE_RATE, |d| d.sample_rate);
    let dir = run.out.join("samples");
    std::fs::create_dir_all(&dir)?;
    let root = SeededRng::new(run.cfg.seed).fork_named("sample");
    for i in 0..s.count {
        let tokens = sample(&model, &params, length, s.temperature, &mut root.fork(i as u64))?;
        write_tokens_and_wav(&dir, i, &tokens, enc, sample_rate)?;
    }
    println!("wrote {} samples of length {length} to {}", s.count, dir.display());
    Ok(())
}

fn generated_tokens(dir: &Path) -> Result<Vec<Vec<u8>>> {
    let entries = std::fs::read_dir(dir).map_err(|_| Error::State(format!("no samples directory at {}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tok"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(std::fs::read(p)?)).collect()
}

pub fn evaluate_cmd(run: &Run) -> Result<()> {
    match run.cfg.train.dtype {
        DType::F32 => evaluate_typed::<f32>(run),
        DType::F64 => evaluate_typed::<f64>(run),
    }
}

fn evaluate_typed<T: Scalar>(run: &Run) -> Result<()> {
    let e = &run.cfg.eval;
    let ds = Dataset::load(&run.cfg.data.dir)?;
    let enc = ds.encoding()?;
    let mut report = MetricsReport::default();

    let (model, params) = run.load_model::<T>(&run.checkpoint(&e.checkpoint))?;
    let (scored, _) = ds.split(Split::parse(&e.split)?)?;
    if scored.is_empty() {
        return Err(Error::State(format!("split '{}' is empty", e.split)));
    }
    report.push("nll_bits", evaluate_nll(&model, &params, &scored)?);

    let generated = match e.samples.as_str() {
        "generated" => generated_tokens(&run.out.join("samples"))?,
        split => ds.split(Split::parse(split)?)?.0,
    };
    report.push("n_generated", generated.len() as f64);
    if ds.classes < 2 {
        eprintln!("note: dataset has a single class; classifier metrics skipped");
    } else if generated.is_empty() {
        eprintln!("note: no generated samples; classifier metrics skipped");
    } else {
        let to_waves = |seqs: &[Vec<u8>]| seqs.iter().map(|t| decode_tokens(t, enc)).collect::<Vec<_>>();
        let (train_toks, train_labels) = ds.split(Split::Train)?;
        let cc = ClassifierConfig {
            sample_rate: ds.sample_rate as f64,
            steps: e.classifier_steps,
            ..ClassifierConfig::default()
        };
        let mut clf = TinyClassifier::new(ds.classes, cc, run.cfg.seed)?;
        clf.train(&to_waves(&train_toks), &train_labels)?;
        let (mut held, mut held_labels) = ds.split(Split::Val)?;
        let (test, test_labels) = ds.split(Split::Test)?;
        held.extend(test);
        held_labels.extend(test_labels);
        if !held.is_empty() {
            report.push("classifier_accuracy", clf.accuracy(&to_waves(&held), &held_labels)?);
        }
        let (reference, _) = ds.split(Split::parse(&e.reference)?)?;
        let (_, ref_feats) = clf.classifier_features(&to_waves(&reference))?;
        let (probs, gen_feats) = clf.classifier_features(&to_waves(&generated))?;
        if reference.len() >= 2 && generated.len() >= 2 {
            report.push("fid", frechet_distance(&fit_gaussian(&gen_feats)?, &fit_gaussian(&ref_feats)?)?);
        } else {
            eprintln!("note: FID needs at least 2 generated and 2 reference sequences; skipped");
        }
        report.push("is", inception_score(&probs)?);
        let (mis, am) = modified_is_and_am(&probs)?;
        report.push("mis", mis);
        report.push("am", am);
    }

    std::fs::write(run.out.join("metrics.txt"), report.to_text())?;
    std::fs::write(run.out.join("metrics.csv"), format!("{}\n{}\n", report.csv_header(), report.csv_row()))?;
    print!("{}", report.to_text());
    Ok(())
}

pub fn gradcheck_cmd(run: &Run) -> Result<()> {
    let rows = gradient_suite()?;
    let mut csv = String::from("layer,max_rel_error,tolerance,status\n");
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
    println!("{:<width$}  {:>12}  status", "layer", "max rel err");
    for r in &rows {
        let status = if r.passed() { "pass" } else { "FAIL" };
        println!("{:<width$}  {:>12.3e}  {status}", r.name, r.report.max_rel_error);
        let _ = writeln!(csv, "{},{:e},{:e},{status}", r.name, r.report.max_rel_error, r.report.tolerance);
    }
    std::fs::write(run.out.join("gradcheck.csv"), csv)?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Evaluation(format!("gradient check failed for {}", failed.join(", "))))
    }
}

pub fn inspect_cmd(run: &Run) -> Result<()> {
    let (model, params) = match &run.cfg.inspect_checkpoint {
        Some(path) => run.load_model::<f64>(path)?,
        None => build_model::<f64>(&run.cfg.model, SeededRng::new(run.cfg.seed).fork_named("model"))?,
    };
    let mut profile = String::from("layer,mean_abs_a\n");
    for (i, m) in model.magnitude_profile(&params).iter().enumerate() {
        let _ = writeln!(profile, "{i},{m}");
    }
    let mut scatter = String::from("layer,channel,re,im\n");
    for (i, coeffs) in model.coefficients(&params).iter().enumerate() {
        for (c, z) in coeffs.iter().enumerate() {
            let _ = writeln!(scatter, "{i},{c},{},{}", z.re, z.im);
        }
    }
    std::fs::write(run.out.join("magnitude_profile.csv"), profile)?;
    std::fs::write(run.out.join("coefficients.csv"), scatter)?;
    println!("param_count={}", model.param_count());
    println!("rg_lru_layers={}", model.rg_lru_layers());
    println!("block_count={}", run.cfg.model.block_count());
    Ok(())
}
