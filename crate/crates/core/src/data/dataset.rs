//! On-disk token datasets.
//!
//! A dataset directory holds raw `u8` token files and `manifest.tsv`:
//! `# key=value` metadata lines followed by `path<TAB>split<TAB>label` rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::synth::{synth_corpus, SAMPLE_RATE};
use crate::dsp::Encoding;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const MANIFEST: &str = "manifest.tsv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::arg(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub path: String,
    pub split: Split,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub sample_rate: u32,
    pub encoding: String,
    pub classes: usize,
    pub length: usize,
    pub entries: Vec<Entry>,
}

/// Assigns 80 % / 10 % / 10 % of `n` items to train / val / test after a
/// seeded shuffle; val and test get at least one item each when `n ≥ 3`.
pub fn split_assignment(n: usize, seed: u64) -> Vec<Split> {
    let mut idx: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).fork_named("split").shuffle(&mut idx);
    let mut n_val = n / 10;
    let mut n_test = n / 10;
    if n >= 3 {
        n_val = n_val.max(1);
        n_test = n_test.max(1);
    }
    let mut out = vec![Split::Train; n];
    for (rank, &i) in idx.iter().enumerate() {
        if rank < n_val {
            out[i] = Split::Val;
        } else if rank < n_val + n_test {
            out[i] = Split::Test;
        }
    }
    out
}

/// Writes a synthetic dataset to `dir` and returns its description.
pub fn generate_dataset(dir: &Path, classes: usize, count: usize, length: usize, encoding: Encoding, seed: u64) -> Result<Dataset> {
    let corpus = synth_corpus(classes, count, length, encoding, seed)?;
    write_dataset(dir, corpus, SAMPLE_RATE, encoding, classes, seed)
}

/// Writes labelled token sequences as a dataset with a seeded 80/10/10 split.
pub fn write_dataset(
    dir: &Path,
    items: Vec<(usize, Vec<u8>)>,
    sample_rate: u32,
    encoding: Encoding,
    classes: usize,
    seed: u64,
) -> Result<Dataset> {
    let length = items.first().map_or(0, |(_, t)| t.len());
    if items.iter().any(|(_, t)| t.len() != length) {
        return Err(Error::arg("all sequences in a dataset must have the same length"));
    }
    if let Some((bad, _)) = items.iter().find(|(l, _)| *l >= classes) {
        return Err(Error::arg(format!("label {bad} out of range for {classes} classes")));
    }
    let splits = split_assignment(items.len(), seed);
    std::fs::create_dir_all(dir.join("tokens"))?;
    let mut entries = Vec::with_capacity(items.len());
    for (i, ((label, toks), split)) in items.into_iter().zip(splits).enumerate() {
        let path = format!("tokens/{i:05}.tok");
        std::fs::write(dir.join(&path), &toks)?;
        entries.push(Entry { path, split, label });
    }
    let ds = Dataset {
        root: dir.to_path_buf(),
        sample_rate,
        encoding: encoding.name().to_string(),
        classes,
        length,
        entries,
    };
    std::fs::write(dir.join(MANIFEST), ds.manifest_text())?;
    Ok(ds)
}

impl Dataset {
    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sample_rate={}", self.sample_rate);
        let _ = writeln!(s, "# encoding={}", self.encoding);
        let _ = writeln!(s, "# classes={}", self.classes);
        let _ = writeln!(s, "# length={}", self.length);
        for e in &self.entries {
            let _ = writeln!(s, "{}\t{}\t{}", e.path, e.split.name(), e.label);
        }
        s
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::State(format!("no dataset manifest at {}", path.display())),
            _ => Error::Io(e),
        })?;
        let mut ds = Dataset {
            root: dir.to_path_buf(),
            sample_rate: SAMPLE_RATE,
            encoding: "mu_law".into(),
            classes: 0,
            length: 0,
            entries: Vec::new(),
        };
        let mut offset = 0u64;
        for line in text.lines() {
            let bad = |msg: String| Error::format(offset, format!("{}: {msg}", path.display()));
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    let num = || v.parse::<usize>().map_err(|_| bad(format!("bad value for {k}")));
                    match k {
                        "sample_rate" => ds.sample_rate = num()? as u32,
                        "encoding" => ds.encoding = Encoding::parse(v).map_err(|e| bad(e.to_string()))?.name().to_string(),
                        "classes" => ds.classes = num()?,
                        "length" => ds.length = num()?,
                        _ => {}
                    }
                }
            } else if !line.trim().is_empty() {
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 3 {
                    return Err(bad(format!("expected 3 tab-separated columns, found {}", cols.len())));
                }
                let split = Split::parse(cols[1]).map_err(|e| bad(e.to_string()))?;
                let label = cols[2].parse().map_err(|_| bad(format!("bad label '{}'", cols[2])))?;
                ds.entries.push(Entry {
                    path: cols[0].to_string(),
                    split,
                    label,
                });
            }
            offset += line.len() as u64 + 1;
        }
        Ok(ds)
    }

    pub fn encoding(&self) -> Result<Encoding> {
        Encoding::parse(&self.encoding)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn read_tokens(&self, e: &Entry) -> Result<Vec<u8>> {
        Ok(std::fs::read(self.root.join(&e.path))?)
    }

    /// Token sequences and labels of one split, in manifest order.
    pub fn split(&self, split: Split) -> Result<(Vec<Vec<u8>>, Vec<usize>)> {
        let mut toks = Vec::new();
        let mut labels = Vec::new();
        for e in self.entries(split) {
            toks.push(self.read_tokens(e)?);
            labels.push(e.label);
        }
        Ok((toks, labels))
    }
}
