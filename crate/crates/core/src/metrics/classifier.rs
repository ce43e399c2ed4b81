//! A small audio classifier used as the feature extractor for sample
//! metrics: time-averaged log-mel energies, one GELU hidden layer and a
//! softmax over the classes.

use crate::dsp::{mel_spectrogram, stft, Encoding, MelFilterbank, StftConfig};
use crate::error::{Error, Result};
use crate::layers::{gelu, gelu_grad, Dense, ParamBuilder, ParamStore};
use crate::rng::SeededRng;
use crate::tensor::Tensor;
use crate::training::{AdamWConfig, AdamWState};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub sample_rate: f64,
    pub n_fft: usize,
    pub hop: usize,
    pub bands: usize,
    pub hidden: usize,
    pub steps: usize,
    pub lr: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            sample_rate: 8000.0,
            n_fft: 256,
            hop: 128,
            bands: 32,
            hidden: 32,
            steps: 300,
            lr: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyClassifier {
    cfg: ClassifierConfig,
    classes: usize,
    stft: StftConfig<f64>,
    bank: MelFilterbank<f64>,
    /// Per-band standardisation fitted on the training waveforms.
    mean: Vec<f64>,
    std: Vec<f64>,
    hidden: Dense,
    out: Dense,
    params: ParamStore<f64>,
    trained: bool,
}

/// Decodes a token sequence back to amplitudes in `[-1, 1]`.
pub fn decode_tokens(tokens: &[u8], encoding: Encoding) -> Vec<f64> {
    tokens.iter().map(|&t| encoding.decode(t)).collect()
}

struct Pass {
    x: Tensor<f64>,
    h: Tensor<f64>,
    a: Tensor<f64>,
    probs: Tensor<f64>,
}

impl TinyClassifier {
    pub fn new(classes: usize, cfg: ClassifierConfig, seed: u64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::arg(format!("a classifier needs at least 2 classes, got {classes}")));
        }
        let stft = StftConfig::hann(cfg.n_fft, cfg.hop)?;
        let bank = MelFilterbank::new(cfg.bands, cfg.n_fft, cfg.sample_rate, 0.0, cfg.sample_rate / 2.0)?;
        let mut params = ParamStore::new();
        let mut pb = ParamBuilder::new(&mut params, SeededRng::new(seed).fork_named("classifier"));
        let hidden = Dense::scaled(&mut pb, "hidden", cfg.bands, cfg.hidden, 2.0)?;
        let out = Dense::scaled(&mut pb, "out", cfg.hidden, classes, 1.0)?;
        Ok(TinyClassifier {
            mean: vec![0.0; cfg.bands],
            std: vec![1.0; cfg.bands],
            cfg,
            classes,
            stft,
            bank,
            hidden,
            out,
            params,
            trained: false,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn feature_dim(&self) -> usize {
        self.cfg.hidden
    }

    /// Log-mel energies averaged over frames; short clips are zero-padded
    /// to one frame.
    pub fn frontend(&self, wave: &[f64]) -> Result<Vec<f64>> {
        let mut padded;
        let mut signal = wave;
        if wave.len() < self.cfg.n_fft {
            padded = wave.to_vec();
            padded.resize(self.cfg.n_fft, 0.0);
            signal = &padded;
        }
        let mel = mel_spectrogram(&stft(signal, &self.stft)?, &self.bank)?;
        let mut avg = vec![0.0; self.cfg.bands];
        for frame in &mel {
            avg.iter_mut().zip(frame).for_each(|(a, &e)| *a += (e + 1e-10).ln());
        }
        avg.iter_mut().for_each(|a| *a /= mel.len() as f64);
        Ok(avg)
    }

    fn inputs(&self, waves: &[Vec<f64>]) -> Result<Tensor<f64>> {
        if waves.is_empty() {
            return Err(Error::arg("no waveforms given"));
        }
        let rows = waves.iter().map(|w| self.frontend(w)).collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }

    fn standardise(&self, raw: &Tensor<f64>) -> Tensor<f64> {
        let b = self.cfg.bands;
        Tensor::from_fn(raw.shape(), |k| (raw.data()[k] - self.mean[k % b]) / self.std[k % b])
    }

    fn pass(&self, params: &ParamStore<f64>, x: Tensor<f64>) -> Result<Pass> {
        let h = self.hidden.forward(params, &x)?;
        let a = h.map(gelu);
        let mut probs = self.out.forward(params, &a)?;
        for i in 0..probs.rows() {
            let row = probs.row_mut(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|v| *v = (*v - m).exp());
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Pass { x, h, a, probs })
    }

    /// Full-batch Adam on cross-entropy. Returns the final training loss in nats.
    pub fn train(&mut self, waves: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        if waves.len() != labels.len() {
            return Err(Error::arg(format!("{} waveforms but {} labels", waves.len(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.classes) {
            return Err(Error::arg(format!("label {bad} out of range for {} classes", self.classes)));
        }
        let raw = self.inputs(waves)?;
        let (n, b) = (raw.rows(), self.cfg.bands);
        for j in 0..b {
            let col: Vec<f64> = (0..n).map(|i| raw.row(i)[j]).collect();
            let mu = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
            self.mean[j] = mu;
            self.std[j] = var.sqrt().max(1e-6);
        }
        let x = self.standardise(&raw);
        let mut params = self.params.clone();
        let mut opt = AdamWState::new(
            &params,
            AdamWConfig {
                weight_decay: 0.0,
                ..AdamWConfig::default()
            },
        );
        let mut loss = f64::NAN;
        for _ in 0..self.cfg.steps {
            let pass = self.pass(&params, x.clone())?;
            loss = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| -pass.probs.row(i)[l].max(1e-300).ln())
                .sum::<f64>()
                / n as f64;
            let mut dz = pass.probs.clone();
            for (i, &l) in labels.iter().enumerate() {
                dz.row_mut(i)[l] -= 1.0;
            }
            let dz = dz.scale(1.0 / n as f64);
            let mut g = params.zeros_like();
            let da = self.out.backward(&params, &pass.a, &dz, &mut g)?;
            let dh = da.zip_map(&pass.h, |d, h| d * gelu_grad(h))?;
            self.hidden.backward_params(&pass.x, &dh, &mut g)?;
            opt.step(&mut params, &g, self.cfg.lr)?;
        }
        self.params = params;
        self.trained = true;
        Ok(loss)
    }

    /// Class probabilities `[N × K]` and penultimate features `[N × hidden]`.
    pub fn classifier_features(&self, waves: &[Vec<f64>]) -> Result<(Tensor<f64>, Tensor<f64>)> {
        if !self.trained {
            return Err(Error::State("classifier has not been trained".into()));
        }
        let x = self.standardise(&self.inputs(waves)?);
        let pass = self.pass(&self.params, x)?;
        Ok((pass.probs, pass.a))
    }

    pub fn accuracy(&self, waves: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
        let (probs, _) = self.classifier_features(waves)?;
        let k = self.classes;
        let hits = labels
            .iter()
            .enumerate()
            .filter(|(i, &l)| {
                let r = probs.row(*i);
                (0..k).max_by(|&a, &b| r[a].total_cmp(&r[b])) == Some(l)
            })
            .count();
        Ok(hits as f64 / labels.len().max(1) as f64)
    }
}

/// Free-function form of [`TinyClassifier::classifier_features`].
pub fn classifier_features(clf: &TinyClassifier, waves: &[Vec<f64>]) -> Result<(Tensor<f64>, Tensor<f64>)> {
    clf.classifier_features(waves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_assignment, synth_corpus, Split};
    use crate::dsp::MuLawCodec;

    fn corpus(classes: usize, count: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, Vec<Split>) {
        let enc = Encoding::MuLaw(MuLawCodec::default());
        let items = synth_corpus(classes, count, 1024, enc, seed).unwrap();
        let waves = items.iter().map(|(_, t)| decode_tokens(t, enc)).collect();
        let labels = items.iter().map(|(l, _)| *l).collect();
        (waves, labels, split_assignment(count, seed))
    }

    fn pick<T: Clone>(v: &[T], splits: &[Split], train: bool) -> Vec<T> {
        v.iter()
            .zip(splits)
            .filter(|(_, &s)| (s == Split::Train) == train)
            .map(|(x, _)| x.clone())
            .collect()
    }

    #[test]
    fn held_out_accuracy_above_ninety_percent() {
        for classes in [4, 8] {
            let (waves, labels, splits) = corpus(classes, 40 * classes, 21);
            let mut clf = TinyClassifier::new(classes, ClassifierConfig::default(), 1).unwrap();
            clf.train(&pick(&waves, &splits, true), &pick(&labels, &splits, true)).unwrap();
            let acc = clf.accuracy(&pick(&waves, &splits, false), &pick(&labels, &splits, false)).unwrap();
            assert!(acc > 0.9, "{classes} classes: held-out accuracy {acc}");
        }
    }

    #[test]
    fn untrained_is_a_state_error() {
        let clf = TinyClassifier::new(3, ClassifierConfig::default(), 0).unwrap();
        assert!(matches!(clf.classifier_features(&[vec![0.0; 512]]), Err(Error::State(_))));
    }

    #[test]
    fn outputs_are_distributions_and_deterministic() {
        let (waves, labels, _) = corpus(3, 12, 2);
        let mut a = TinyClassifier::new(3, ClassifierConfig { steps: 20, ..Default::default() }, 5).unwrap();
        let mut b = a.clone();
        a.train(&waves, &labels).unwrap();
        b.train(&waves, &labels).unwrap();
        let (pa, fa) = a.classifier_features(&waves[..4]).unwrap();
        let (pb, fb) = b.classifier_features(&waves[..4]).unwrap();
        assert_eq!((pa.clone(), fa.clone()), (pb, fb));
        assert_eq!(fa.shape(), &[4, 32]);
        for i in 0..4 {
            assert!((pa.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(a.train(&waves, &labels[..3]).is_err());
        assert!(a.train(&waves[..1], &[7]).is_err());
    }
}
