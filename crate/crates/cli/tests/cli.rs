use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poolformer::data::WavFile;

const TINY: &str = "\
seed = 3
model.dim = 8
model.rec_dim = 8
model.pooling = [2]
model.layers = [1, 1]
train.batch_size = 4
train.epochs = 1
train.dtype = f64
data.classes = 2
data.count = 12
data.length = 64
sample.count = 1
eval.classifier_steps = 50
";

struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.cfg"), config).unwrap();
        Sandbox { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, cmd: &str, out: &str, extra: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_poolformer"))
            .current_dir(self.dir.path())
            .arg(cmd)
            .arg("--config")
            .arg(self.path("run.cfg"))
            .arg("--out")
            .arg(self.path(out))
            .args(extra)
            .output()
            .unwrap()
    }

    fn ok(&self, cmd: &str, out: &str, extra: &[&str]) -> String {
        let o = self.run(cmd, out, extra);
        assert!(o.status.success(), "{cmd} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn metric(dir: &Path, key: &str) -> Option<f64> {
    std::fs::read_to_string(dir.join("metrics.txt"))
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(|v| v.parse().unwrap()))
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let s = Sandbox::new(TINY);
    s.ok("generate-data", "gen", &[]);
    assert!(s.path("data/manifest.tsv").exists());
    assert_eq!(std::fs::read_dir(s.path("data/tokens")).unwrap().count(), 12);
    s.ok("train", "run", &[]);
    for f in ["train_log.csv", "best.ckpt", "last.ckpt", "effective.cfg"] {
        assert!(s.path("run").join(f).exists(), "{f} missing");
    }
    let log = std::fs::read_to_string(s.path("run/train_log.csv")).unwrap();
    assert!(log.starts_with("epoch,step,lr,train_nll_bits,val_nll_bits,wall_seconds\n"));
    s.ok("sample", "run", &[]);
    assert_eq!(std::fs::read(s.path("run/samples/00000.tok")).unwrap().len(), 64);
    let wav = WavFile::read(&s.path("run/samples/00000.wav")).unwrap();
    assert_eq!((wav.sample_rate, wav.samples.len()), (8000, 64));
    let report = s.ok("evaluate", "run", &[]);
    assert!(report.contains("nll_bits="), "{report}");
    assert!(metric(&s.path("run"), "is").unwrap() >= 1.0);
    let csv = std::fs::read_to_string(s.path("run/metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn evaluating_the_training_set_against_itself_gives_zero_fid() {
    let s = Sandbox::new(TINY);
    s.ok("generate-data", "gen", &[]);
    s.ok("train", "run", &[]);
    s.ok("evaluate", "run", &["--set", "eval.samples=train"]);
    let fid = metric(&s.path("run"), "fid").unwrap();
    assert!(fid < 0.01, "fid {fid}");
}

#[test]
fn reruns_are_bit_identical_and_the_effective_config_reproduces() {
    let s = Sandbox::new(TINY);
    s.ok("generate-data", "gen", &[]);
    s.ok("train", "a", &[]);
    s.ok("train", "b", &[]);
    let ckpt = |d: &str| std::fs::read(s.path(d).join("last.ckpt")).unwrap();
    assert_eq!(ckpt("a"), ckpt("b"));
    assert_eq!(std::fs::read(s.path("a/best.ckpt")).unwrap(), std::fs::read(s.path("b/best.ckpt")).unwrap());

    std::fs::copy(s.path("a/effective.cfg"), s.path("run.cfg")).unwrap();
    s.ok("train", "c", &[]);
    assert_eq!(ckpt("a"), ckpt("c"));
    assert_eq!(
        std::fs::read_to_string(s.path("a/effective.cfg")).unwrap(),
        std::fs::read_to_string(s.path("c/effective.cfg")).unwrap()
    );
    s.ok("train", "d", &["--seed", "4"]);
    assert_ne!(ckpt("a"), ckpt("d"));
}

#[test]
fn same_seed_gives_byte_identical_datasets() {
    let s = Sandbox::new(TINY);
    s.ok("generate-data", "g1", &["--set", "data.dir=d1"]);
    s.ok("generate-data", "g2", &["--set", &format!("data.dir={}", s.path("d2").display())]);
    // `--set` paths are relative to the working directory, which is the sandbox.
    let d1 = s.path("d1");
    let a = std::fs::read(d1.join("manifest.tsv")).unwrap();
    assert_eq!(a, std::fs::read(s.path("d2/manifest.tsv")).unwrap());
    for i in 0..12 {
        let rel = format!("tokens/{i:05}.tok");
        assert_eq!(std::fs::read(d1.join(&rel)).unwrap(), std::fs::read(s.path("d2").join(&rel)).unwrap());
    }
}

#[test]
fn inspect_fresh_baseline_profile_lies_in_the_init_ring() {
    let s = Sandbox::new("model.dim = 128\nmodel.rec_dim = 256\nmodel.pooling = [2, 4, 4, 5]\nmodel.layers = [4, 4, 4, 4, 4]\n");
    let out = s.ok("inspect", "inspect", &[]);
    assert!(out.contains("rg_lru_layers=36"), "{out}");
    let profile = std::fs::read_to_string(s.path("inspect/magnitude_profile.csv")).unwrap();
    let values: Vec<f64> = profile.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 36);
    assert!(values.iter().all(|v| (0.9..=0.99).contains(v)), "{values:?}");
    let scatter = std::fs::read_to_string(s.path("inspect/coefficients.csv")).unwrap();
    // Complex mode: 256 recurrence channels carry 128 complex coefficients.
    assert_eq!(scatter.lines().count(), 1 + 36 * 128);
}

#[test]
fn gradcheck_reports_every_layer_passing() {
    let s = Sandbox::new(TINY);
    let out = s.ok("gradcheck", "gc", &[]);
    assert!(!out.contains("FAIL"), "{out}");
    let csv = std::fs::read_to_string(s.path("gc/gradcheck.csv")).unwrap();
    assert_eq!(csv.lines().count(), 27);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn wav_ingestion_builds_a_dataset() {
    let s = Sandbox::new(&format!("{TINY}data.kind = wav\ndata.wav = clip.wav\n"));
    let samples: Vec<i16> = (0..200).map(|i| ((i as f64 * 0.3).sin() * 20000.0) as i16).collect();
    WavFile { sample_rate: 16000, samples }.write(&s.path("clip.wav")).unwrap();
    s.ok("generate-data", "gen", &[]);
    let manifest = std::fs::read_to_string(s.path("data/manifest.tsv")).unwrap();
    assert!(manifest.contains("# sample_rate=16000"));
    // 200 samples in chunks of 64: the remainder is dropped.
    assert_eq!(std::fs::read_dir(s.path("data/tokens")).unwrap().count(), 3);
}

#[test]
fn argument_errors_exit_with_two() {
    let s = Sandbox::new(TINY);
    assert_eq!(code(&s.run("train", "x", &["--set", "model.bogus=1"])), 2);
    assert_eq!(code(&s.run("train", "x", &["--set", "no-equals-sign"])), 2);
    assert_eq!(code(&s.run("generate-data", "x", &["--set", "data.length=63"])), 2);
    assert_eq!(code(&s.run("generate-data", "x", &["--set", "data.classes=0"])), 2);
    assert_eq!(code(&s.run("train", "x", &["--seed", "minus-one"])), 2);
    let bad = Command::new(env!("CARGO_BIN_EXE_poolformer")).arg("fly").arg("--config").arg("x").output().unwrap();
    assert_eq!(code(&bad), 2);
    std::fs::write(s.path("bad.cfg"), "train.unknown = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_poolformer"))
        .args(["train", "--config"])
        .arg(s.path("bad.cfg"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn config_model_mismatch_is_an_argument_error() {
    let s = Sandbox::new(TINY);
    s.ok("generate-data", "gen", &[]);
    s.ok("train", "run", &[]);
    let o = s.run("sample", "run", &["--set", "model.dim=16"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn format_errors_exit_with_three() {
    let s = Sandbox::new(&format!("{TINY}data.kind = wav\ndata.wav = broken.wav\n"));
    std::fs::write(s.path("broken.wav"), b"RIFX\0\0\0\0WAVE").unwrap();
    assert_eq!(code(&s.run("generate-data", "gen", &[])), 3);

    let t = Sandbox::new(TINY);
    std::fs::create_dir_all(t.path("data")).unwrap();
    std::fs::write(t.path("data/manifest.tsv"), "tokens/0.tok\ttrain\n").unwrap();
    assert_eq!(code(&t.run("train", "run", &[])), 3);

    std::fs::create_dir_all(t.path("run")).unwrap();
    std::fs::write(t.path("run/best.ckpt"), b"not a checkpoint").unwrap();
    assert_eq!(code(&t.run("sample", "run", &[])), 3);
}

#[test]
fn missing_artifacts_are_state_errors() {
    let s = Sandbox::new(TINY);
    let o = s.run("sample", "run", &[]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
    assert_eq!(code(&s.run("train", "run", &[])), 1);
}
