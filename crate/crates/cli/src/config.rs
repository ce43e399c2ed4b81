//! Flat `section.key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use poolformer::dsp::Encoding;
use poolformer::model::ModelConfig;
use poolformer::training::TrainConfig;
use poolformer::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Synthetic,
    Wav,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    pub kind: DataKind,
    pub dir: PathBuf,
    /// Source recording for `kind = wav`.
    pub wav: Option<PathBuf>,
    pub classes: usize,
    pub count: usize,
    pub length: usize,
    pub encoding: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSection {
    pub count: usize,
    /// 0 means the dataset sequence length.
    pub length: usize,
    pub temperature: f64,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    /// Split scored for NLL.
    pub split: String,
    /// Split whose classifier features are the reference distribution.
    pub reference: String,
    /// `generated` (the run's samples directory) or a split name.
    pub samples: String,
    pub checkpoint: Option<PathBuf>,
    pub classifier_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataSection,
    pub sample: SampleSection,
    pub eval: EvalSection,
    /// Checkpoint to inspect; a freshly initialised model when unset.
    pub inspect_checkpoint: Option<PathBuf>,
}

const SPLITS: [&str; 3] = ["train", "val", "test"];

fn usize_of(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::arg(format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn path_of(v: &str, base: &Path) -> Option<PathBuf> {
    match v {
        "" | "auto" => None,
        _ => Some(base.join(v)),
    }
}

fn split_name(key: &str, v: &str, extra: &[&str]) -> Result<String> {
    if SPLITS.contains(&v) || extra.contains(&v) {
        Ok(v.to_string())
    } else {
        Err(Error::arg(format!("{key}: unknown split '{v}'")))
    }
}

fn show(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("auto".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    /// Defaults, with relative paths anchored at `base`.
    pub fn new(base: &Path) -> Self {
        RunConfig {
            seed: 0,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataSection {
                kind: DataKind::Synthetic,
                dir: base.join("data"),
                wav: None,
                classes: 4,
                count: 64,
                length: 1024,
                encoding: "mu_law".into(),
            },
            sample: SampleSection {
                count: 4,
                length: 0,
                temperature: 1.0,
                checkpoint: None,
            },
            eval: EvalSection {
                split: "test".into(),
                reference: "train".into(),
                samples: "generated".into(),
                checkpoint: None,
                classifier_steps: 300,
            },
            inspect_checkpoint: None,
        }
    }

    /// Applies one `key = value` setting; relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        if key == "seed" {
            self.seed = v.parse().map_err(|_| Error::arg(format!("seed: expected an integer, got '{v}'")))?;
            return Ok(());
        }
        let (section, field) = key.split_once('.').ok_or_else(|| Error::arg(format!("unknown key '{key}'")))?;
        match (section, field) {
            ("model", f) => self.model.set(f, v)?,
            ("train", f) => self.train.set(f, v)?,
            ("data", "kind") => {
                self.data.kind = match v {
                    "synthetic" => DataKind::Synthetic,
                    "wav" => DataKind::Wav,
                    _ => return Err(Error::arg(format!("data.kind: expected synthetic or wav, got '{v}'"))),
                }
            }
            ("data", "dir") => self.data.dir = path_of(v, base).ok_or_else(|| Error::arg("data.dir must be set"))?,
            ("data", "wav") => self.data.wav = path_of(v, base),
            ("data", "classes") => self.data.classes = usize_of(key, v)?,
            ("data", "count") => self.data.count = usize_of(key, v)?,
            ("data", "length") => self.data.length = usize_of(key, v)?,
            ("data", "encoding") => self.data.encoding = Encoding::parse(v)?.name().to_string(),
            ("sample", "count") => self.sample.count = usize_of(key, v)?,
            ("sample", "length") => self.sample.length = usize_of(key, v)?,
            ("sample", "temperature") => {
                self.sample.temperature = v.parse().map_err(|_| Error::arg(format!("{key}: expected a number, got '{v}'")))?
            }
            ("sample", "checkpoint") => self.sample.checkpoint = path_of(v, base),
            ("eval", "split") => self.eval.split = split_name(key, v, &[])?,
            ("eval", "reference") => self.eval.reference = split_name(key, v, &[])?,
            ("eval", "samples") => self.eval.samples = split_name(key, v, &["generated"])?,
            ("eval", "checkpoint") => self.eval.checkpoint = path_of(v, base),
            ("eval", "classifier_steps") => self.eval.classifier_steps = usize_of(key, v)?,
            ("inspect", "checkpoint") => self.inspect_checkpoint = path_of(v, base),
            _ => return Err(Error::arg(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Reads a config file; `#` starts a comment line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::arg(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        let mut cfg = RunConfig::new(&base);
        cfg.apply_text(&text, &base)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            self.set(k.trim(), v, base)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::arg(format!("--set expects key=value, got '{kv}'")))?;
        self.set(k.trim(), v, Path::new("."))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        Encoding::parse(&self.data.encoding)?;
        if !(self.sample.temperature >= 0.0) {
            return Err(Error::arg(format!("sample.temperature must be non-negative, got {}", self.sample.temperature)));
        }
        Ok(())
    }

    /// Every setting with absolute paths, in a form `load` reproduces exactly.
    pub fn to_text(&self) -> String {
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
        let abs_opt = |p: &Option<PathBuf>| show(&p.as_deref().map(abs));
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        for (k, v) in self.model.entries() {
            let _ = writeln!(s, "model.{k} = {v}");
        }
        for (k, v) in self.train.entries() {
            let _ = writeln!(s, "train.{k} = {v}");
        }
        let d = &self.data;
        let kind = match d.kind {
            DataKind::Synthetic => "synthetic",
            DataKind::Wav => "wav",
        };
        let _ = writeln!(s, "data.kind = {kind}");
        let _ = writeln!(s, "data.dir = {}", abs(&d.dir).display());
        let _ = writeln!(s, "data.wav = {}", abs_opt(&d.wav));
        let _ = writeln!(s, "data.classes = {}", d.classes);
        let _ = writeln!(s, "data.count = {}", d.count);
        let _ = writeln!(s, "data.length = {}", d.length);
        let _ = writeln!(s, "data.encoding = {}", d.encoding);
        let _ = writeln!(s, "sample.count = {}", self.sample.count);
        let _ = writeln!(s, "sample.length = {}", self.sample.length);
        let _ = writeln!(s, "sample.temperature = {:?}", self.sample.temperature);
        let _ = writeln!(s, "sample.checkpoint = {}", abs_opt(&self.sample.checkpoint));
        let _ = writeln!(s, "eval.split = {}", self.eval.split);
        let _ = writeln!(s, "eval.reference = {}", self.eval.reference);
        let _ = writeln!(s, "eval.samples = {}", self.eval.samples);
        let _ = writeln!(s, "eval.checkpoint = {}", abs_opt(&self.eval.checkpoint));
        let _ = writeln!(s, "eval.classifier_steps = {}", self.eval.classifier_steps);
        let _ = writeln!(s, "inspect.checkpoint = {}", abs_opt(&self.inspect_checkpoint));
        s
    }
}
