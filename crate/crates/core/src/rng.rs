//! Seeded, splittable random streams.
//!
//! A [`SeededRng`] is a ChaCha8 generator keyed by `(seed, stream)`. Child
//! streams are derived from the parent's identity and a caller-chosen key,
//! never from how many values the parent has produced, so the weights of one
//! module do not depend on the order in which other modules were initialised.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream identified by `key`.
    pub fn fork(&self, key: u64) -> Self {
        let stream = splitmix64(self.stream ^ splitmix64(key.wrapping_add(1)));
        Self::with_stream(self.seed, stream)
    }

    /// Independent child stream identified by a name.
    pub fn fork_named(&self, name: &str) -> Self {
        self.fork(fnv1a(name))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<X>(&mut self, items: &mut [X]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// Draws an index from unnormalised non-negative weights.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        // rounding can leave u marginally above the last positive weight
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// I.i.d. `N(0, variance)` samples; zero variance gives exact zeros.
pub fn gaussian_init<T: Scalar>(
    rng: &mut SeededRng,
    shape: &[usize],
    variance: f64,
) -> Result<Tensor<T>> {
    if !(variance >= 0.0) {
        return Err(Error::arg(format!("variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(Tensor::zeros(shape));
    }
    let std = variance.sqrt();
    Ok(Tensor::from_fn(shape, |_| T::of(std * rng.normal())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_gives_zeros() {
        let t: Tensor<f64> = gaussian_init(&mut SeededRng::new(1), &[4], 0.0).unwrap();
        assert_eq!(t.data(), &[0.0; 4]);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(gaussian_init::<f64>(&mut SeededRng::new(1), &[4], -1.0).is_err());
        assert!(gaussian_init::<f64>(&mut SeededRng::new(1), &[4], f64::NAN).is_err());
    }

    #[test]
    fn unit_variance_sample_statistics() {
        let t: Tensor<f64> = gaussian_init(&mut SeededRng::new(7), &[100_000], 1.0).unwrap();
        let n = t.len() as f64;
        let mean = t.sum() / n;
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.98..=1.02).contains(&var), "sample variance {var}");
    }

    #[test]
    fn same_seed_same_tensor() {
        let a: Tensor<f32> = gaussian_init(&mut SeededRng::new(3), &[16], 0.5).unwrap();
        let b: Tensor<f32> = gaussian_init(&mut SeededRng::new(3), &[16], 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forks_ignore_parent_position() {
        let root = SeededRng::new(11);
        let mut advanced = root.clone();
        for _ in 0..10 {
            advanced.uniform();
        }
        let mut a = root.fork_named("layer.0");
        let mut b = advanced.fork_named("layer.0");
        assert_eq!(a.next_u64(), b.next_u64());
        let mut c = root.fork_named("layer.1");
        assert_ne!(root.fork_named("layer.0").next_u64(), c.next_u64());
    }
}
