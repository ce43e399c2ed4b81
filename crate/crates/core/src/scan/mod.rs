//! Diagonal linear recurrences `h_k = a_k ⊙ h_{k−1} + b_k`, executed three ways.
//!
//! * [`sequential_recurrence`]: the plain loop, one step at a time.
//! * [`blelloch_scan`]: work-efficient associative scan over affine maps
//!   `x ↦ a x + b` composed with `(a₁,b₁)•(a₂,b₂) = (a₂a₁, a₂b₁ + b₂)`.
//! * [`conv_recurrence`]: for time-invariant `a`, convolution of the inputs with
//!   the kernel `(1, a, a², …)` through the FFT.
//!
//! Coefficients are complex and stored as split real/imaginary arrays; a real
//! recurrence simply has zero imaginary parts.

mod blelloch;
mod conv;
mod zoh;

pub use blelloch::{blelloch_prescan, blelloch_scan};
pub use conv::conv_recurrence;
pub use zoh::{zoh_discretize, ZohParams};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-step diagonal affine maps over `dim` independent lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalAffineSeq<T> {
    steps: usize,
    dim: usize,
    pub a_re: Vec<T>,
    pub a_im: Vec<T>,
    pub b_re: Vec<T>,
    pub b_im: Vec<T>,
    pub h0_re: Vec<T>,
    pub h0_im: Vec<T>,
}

impl<T: Scalar> DiagonalAffineSeq<T> {
    /// Complex coefficients, each buffer `[steps × dim]` row-major; zero initial state.
    pub fn complex(
        steps: usize,
        dim: usize,
        a_re: Vec<T>,
        a_im: Vec<T>,
        b_re: Vec<T>,
        b_im: Vec<T>,
    ) -> Result<Self> {
        let n = steps * dim;
        for (name, len) in [
            ("a_re", a_re.len()),
            ("a_im", a_im.len()),
            ("b_re", b_re.len()),
            ("b_im", b_im.len()),
        ] {
            if len != n {
                return Err(Error::arg(format!(
                    "{name} has {len} entries, expected {steps}×{dim}"
                )));
            }
        }
        Ok(DiagonalAffineSeq {
            steps,
            dim,
            a_re,
            a_im,
            b_re,
            b_im,
            h0_re: vec![T::zero(); dim],
            h0_im: vec![T::zero(); dim],
        })
    }

    pub fn real(steps: usize, dim: usize, a: Vec<T>, b: Vec<T>) -> Result<Self> {
        let z = vec![T::zero(); a.len()];
        let zb = vec![T::zero(); b.len()];
        Self::complex(steps, dim, a, z, b, zb)
    }

    pub fn with_initial(mut self, h0_re: Vec<T>, h0_im: Vec<T>) -> Result<Self> {
        if h0_re.len() != self.dim || h0_im.len() != self.dim {
            return Err(Error::arg("initial state must have one entry per lane"));
        }
        self.h0_re = h0_re;
        self.h0_im = h0_im;
        Ok(self)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when every step shares the same coefficients.
    pub fn is_time_invariant(&self) -> bool {
        let d = self.dim;
        (1..self.steps).all(|k| {
            self.a_re[k * d..(k + 1) * d] == self.a_re[..d]
                && self.a_im[k * d..(k + 1) * d] == self.a_im[..d]
        })
    }
}

/// Hidden states `h_1..h_S`, `[steps × dim]` complex.
#[derive(Debug, Clone, PartialEq)]
pub struct States<T> {
    pub steps: usize,
    pub dim: usize,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> States<T> {
    /// Largest modulus of the entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .zip(other.re.iter().zip(&other.im))
            .map(|((&ar, &ai), (&br, &bi))| ((ar - br) * (ar - br) + (ai - bi) * (ai - bi)).sqrt())
            .fold(T::zero(), T::max)
    }
}

/// Combines two affine elements, `first` applied before `second`.
#[inline]
pub(crate) fn combine<T: Scalar>(first: (T, T, T, T), second: (T, T, T, T)) -> (T, T, T, T) {
    let (a1r, a1i, b1r, b1i) = first;
    let (a2r, a2i, b2r, b2i) = second;
    (
        a2r * a1r - a2i * a1i,
        a2r * a1i + a2i * a1r,
        a2r * b1r - a2i * b1i + b2r,
        a2r * b1i + a2i * b1r + b2i,
    )
}

/// Step-by-step evaluation of the recurrence.
pub fn sequential_recurrence<T: Scalar>(seq: &DiagonalAffineSeq<T>) -> States<T> {
    let (s, d) = (seq.steps, seq.dim);
    let mut re = vec![T::zero(); s * d];
    let mut im = vec![T::zero(); s * d];
    let mut hr = seq.h0_re.clone();
    let mut hi = seq.h0_im.clone();
    for k in 0..s {
        for j in 0..d {
            let idx = k * d + j;
            let (ar, ai) = (seq.a_re[idx], seq.a_im[idx]);
            let nr = ar * hr[j] - ai * hi[j] + seq.b_re[idx];
            let ni = ar * hi[j] + ai * hr[j] + seq.b_im[idx];
            hr[j] = nr;
            hi[j] = ni;
            re[idx] = nr;
            im[idx] = ni;
        }
    }
    States {
        steps: s,
        dim: d,
        re,
        im,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::rng::SeededRng;

    /// Random complex sequence with `|a| <= max_mod`.
    pub fn random_seq(rng: &mut SeededRng, steps: usize, dim: usize, max_mod: f64) -> DiagonalAffineSeq<f64> {
        let n = steps * dim;
        let mut a_re = Vec::with_capacity(n);
        let mut a_im = Vec::with_capacity(n);
        for _ in 0..n {
            let r = max_mod * rng.uniform().sqrt();
            let th = rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI);
            a_re.push(r * th.cos());
            a_im.push(r * th.sin());
        }
        let b_re = (0..n).map(|_| rng.normal()).collect();
        let b_im = (0..n).map(|_| rng.normal()).collect();
        DiagonalAffineSeq::complex(steps, dim, a_re, a_im, b_re, b_im).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::random_seq;
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn prefix_sum_lifting() {
        let b = vec![3.0, 1.0, 7.0, 0.0, 4.0, 1.0, 6.0, 3.0];
        let seq = DiagonalAffineSeq::real(8, 1, vec![1.0; 8], b).unwrap();
        let h = sequential_recurrence(&seq);
        assert_eq!(h.re, vec![3.0, 4.0, 11.0, 11.0, 15.0, 16.0, 22.0, 25.0]);
    }

    #[test]
    fn memoryless_when_a_is_zero() {
        let b = vec![1.5, -2.0, 0.25, 9.0];
        let seq = DiagonalAffineSeq::real(2, 2, vec![0.0; 4], b.clone()).unwrap();
        assert_eq!(sequential_recurrence(&seq).re, b);
    }

    #[test]
    fn geometric_half() {
        let seq = DiagonalAffineSeq::real(3, 1, vec![0.5; 3], vec![1.0; 3]).unwrap();
        assert_eq!(sequential_recurrence(&seq).re, vec![1.0, 1.5, 1.75]);
    }

    #[test]
    fn shape_validation() {
        assert!(DiagonalAffineSeq::<f64>::real(3, 2, vec![0.0; 6], vec![0.0; 5]).is_err());
        let seq = DiagonalAffineSeq::<f64>::real(1, 2, vec![0.0; 2], vec![0.0; 2]).unwrap();
        assert!(seq.with_initial(vec![1.0], vec![0.0]).is_err());
    }

    fn elem(rng: &mut SeededRng) -> (f64, f64, f64, f64) {
        (rng.normal(), rng.normal(), rng.normal(), rng.normal())
    }

    #[test]
    fn combine_is_associative() {
        let mut rng = SeededRng::new(9);
        for _ in 0..1000 {
            let (e1, e2, e3) = (elem(&mut rng), elem(&mut rng), elem(&mut rng));
            let l = combine(combine(e1, e2), e3);
            let r = combine(e1, combine(e2, e3));
            // evaluate both composite maps at a random point x
            let (xr, xi) = (rng.normal(), rng.normal());
            let apply = |e: (f64, f64, f64, f64)| (e.0 * xr - e.1 * xi + e.2, e.0 * xi + e.1 * xr + e.3);
            let (lr, li) = apply(l);
            let (rr, ri) = apply(r);
            assert!(((lr - rr).powi(2) + (li - ri).powi(2)).sqrt() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn contractive_states_stay_bounded(seed in 0u64..1000, steps in 1usize..64, dim in 1usize..4) {
            let mut rng = SeededRng::new(seed);
            let seq = random_seq(&mut rng, steps, dim, 1.0);
            let h0r: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let h0i: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let seq = seq.with_initial(h0r, h0i).unwrap();
            let h = sequential_recurrence(&seq);
            let modulus = |r: f64, i: f64| (r * r + i * i).sqrt();
            let h0 = (0..dim).map(|j| modulus(seq.h0_re[j], seq.h0_im[j])).fold(0.0, f64::max);
            let mut bound = h0;
            for k in 0..steps {
                let bk = (0..dim)
                    .map(|j| modulus(seq.b_re[k * dim + j], seq.b_im[k * dim + j]))
                    .fold(0.0, f64::max);
                bound += bk;
                let hk = (0..dim)
                    .map(|j| modulus(h.re[k * dim + j], h.im[k * dim + j]))
                    .fold(0.0, f64::max);
                prop_assert!(hk <= bound * (1.0 + 1e-12));
            }
        }
    }
}
