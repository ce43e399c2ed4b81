use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::ForwardCtx;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Exact gelu `x Φ(x)` with the Gaussian CDF written through `erf`.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    half * x * (T::one() + Scalar::erf(x * T::of(FRAC_1_SQRT_2)))
}

/// `Φ(x) + x φ(x)`.
#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    let cdf = half * (T::one() + Scalar::erf(x * T::of(FRAC_1_SQRT_2)));
    let pdf = (-(x * x) * half).exp() * T::of(1.0 / (2.0 * PI).sqrt());
    cdf + x * pdf
}

/// Logistic function, evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Inverted dropout. In eval mode, or with rate 0, returns `None` and leaves
/// `x` untouched; otherwise scales kept entries by `1/(1−rate)` and returns
/// the per-entry multipliers.
pub fn dropout_forward<T: Scalar>(x: &mut Tensor<T>, rate: f64, ctx: &mut ForwardCtx) -> Result<Option<Vec<T>>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::arg(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if !ctx.is_train() || rate == 0.0 {
        return Ok(None);
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let rng = ctx.rng();
    let mask: Vec<T> = (0..x.len())
        .map(|_| if rng.uniform() < rate { T::zero() } else { keep })
        .collect();
    x.data_mut().iter_mut().zip(&mask).for_each(|(v, &m)| *v *= m);
    Ok(Some(mask))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, dy: &mut Tensor<T>) {
    if let Some(mask) = mask {
        dy.data_mut().iter_mut().zip(mask).for_each(|(v, &m)| *v *= m);
    }
}
