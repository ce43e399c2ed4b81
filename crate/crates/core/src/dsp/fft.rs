//! Iterative radix-2 FFT over split real/imaginary buffers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Complex vector stored as two equal-length real arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Scalar> ComplexVec<T> {
    pub fn new(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::arg(format!(
                "real part has {} entries, imaginary part {}",
                re.len(),
                im.len()
            )));
        }
        Ok(ComplexVec { re, im })
    }

    pub fn zeros(n: usize) -> Self {
        ComplexVec {
            re: vec![T::zero(); n],
            im: vec![T::zero(); n],
        }
    }

    pub fn from_real(re: Vec<T>) -> Self {
        let im = vec![T::zero(); re.len()];
        ComplexVec { re, im }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn conj(&self) -> Self {
        ComplexVec {
            re: self.re.clone(),
            im: self.im.iter().map(|&v| -v).collect(),
        }
    }

    pub fn norm_sqr(&self, k: usize) -> T {
        self.re[k] * self.re[k] + self.im[k] * self.im[k]
    }

    pub fn abs(&self, k: usize) -> T {
        self.norm_sqr(k).sqrt()
    }

    /// Largest modulus of the entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        (0..self.len().min(other.len()))
            .map(|k| {
                let dr = self.re[k] - other.re[k];
                let di = self.im[k] - other.im[k];
                (dr * dr + di * di).sqrt()
            })
            .fold(T::zero(), T::max)
    }
}

/// Precomputed bit-reversal permutation and twiddles for one length.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    n: usize,
    rev: Vec<usize>,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::arg(format!("FFT length {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        // twiddles are evaluated in f64 regardless of T
        let half = n / 2;
        let step = -2.0 * std::f64::consts::PI / n as f64;
        let cos = (0..half).map(|k| T::of((step * k as f64).cos())).collect();
        let sin = (0..half).map(|k| T::of((step * k as f64).sin())).collect();
        Ok(FftPlan { n, rev, cos, sin })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward DFT `f̂_k = Σ_j f_j exp(-2πi kj/n)`.
    pub fn forward_in_place(&self, re: &mut [T], im: &mut [T]) {
        assert_eq!(re.len(), self.n);
        assert_eq!(im.len(), self.n);
        for i in 0..self.n {
            let j = self.rev[i];
            if i < j {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let (wr, wi) = (self.cos[k * stride], self.sin[k * stride]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len *= 2;
        }
    }

    /// In-place inverse via `IDFT(f̂) = conj(DFT(conj(f̂))) / n`.
    pub fn inverse_in_place(&self, re: &mut [T], im: &mut [T]) {
        im.iter_mut().for_each(|v| *v = -*v);
        self.forward_in_place(re, im);
        let scale = T::one() / T::of(self.n as f64);
        re.iter_mut().for_each(|v| *v *= scale);
        im.iter_mut().for_each(|v| *v = -*v * scale);
    }
}

pub fn fft<T: Scalar>(v: &ComplexVec<T>) -> Result<ComplexVec<T>> {
    let plan = FftPlan::new(v.len())?;
    let mut out = v.clone();
    plan.forward_in_place(&mut out.re, &mut out.im);
    Ok(out)
}

pub fn ifft<T: Scalar>(v: &ComplexVec<T>) -> Result<ComplexVec<T>> {
    let plan = FftPlan::new(v.len())?;
    let mut out = v.clone();
    plan.inverse_in_place(&mut out.re, &mut out.im);
    Ok(out)
}

/// Circular convolution `(f∗g)_k = Σ_j f_j g_{(k−j) mod n}` through the
/// frequency domain.
///
/// Lengths that are not a power of two are zero-padded to one at least
/// `2n − 1` long; the linear convolution computed there is then folded back
/// onto the circle.
pub fn circular_convolve<T: Scalar>(f: &[T], g: &[T]) -> Result<Vec<T>> {
    if f.len() != g.len() {
        return Err(Error::arg(format!(
            "convolution operands differ in length ({} vs {})",
            f.len(),
            g.len()
        )));
    }
    let n = f.len();
    if n == 0 {
        return Err(Error::arg("cannot convolve empty sequences"));
    }
    let m = if n.is_power_of_two() { n } else { (2 * n - 1).next_power_of_two() };
    let plan = FftPlan::new(m)?;
    let padded = |x: &[T]| {
        let mut v = x.to_vec();
        v.resize(m, T::zero());
        ComplexVec::from_real(v)
    };
    let mut a = padded(f);
    let mut b = padded(g);
    plan.forward_in_place(&mut a.re, &mut a.im);
    plan.forward_in_place(&mut b.re, &mut b.im);
    for k in 0..m {
        let r = a.re[k] * b.re[k] - a.im[k] * b.im[k];
        let i = a.re[k] * b.im[k] + a.im[k] * b.re[k];
        a.re[k] = r;
        a.im[k] = i;
    }
    plan.inverse_in_place(&mut a.re, &mut a.im);
    let mut out = a.re;
    for k in n..m {
        let v = out[k];
        out[k % n] += v;
    }
    out.truncate(n);
    Ok(out)
}
