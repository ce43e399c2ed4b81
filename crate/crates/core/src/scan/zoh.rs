use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Continuous diagonal system `h' = a h + b x` sampled with step `delta`.
#[derive(Debug, Clone)]
pub struct ZohParams<T> {
    pub a: Vec<Complex<T>>,
    pub b: Vec<Complex<T>>,
    pub delta: T,
}

/// `(e^z − 1) / z`, continuous through `z = 0`.
fn phi1<T: Scalar>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::of(1e-4) {
        let one = Complex::new(T::one(), T::zero());
        one + z * (Complex::new(T::of(0.5), T::zero()) + z * (Complex::new(T::of(1.0 / 6.0), T::zero()) + z * T::of(1.0 / 24.0)))
    } else {
        (z.exp() - T::one()) / z
    }
}

/// Zero-order-hold discretisation: `ā = exp(aΔ)`, `b̄ = (exp(aΔ) − 1)/a · b`,
/// which tends to `Δ b` as `a → 0`.
pub fn zoh_discretize<T: Scalar>(p: &ZohParams<T>) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    if !(p.delta > T::zero()) {
        return Err(Error::arg("timestep must be positive"));
    }
    if p.a.len() != p.b.len() {
        return Err(Error::arg("a and b must have the same number of lanes"));
    }
    let a_bar = p.a.iter().map(|&a| (a * p.delta).exp()).collect();
    let b_bar = p
        .a
        .iter()
        .zip(&p.b)
        .map(|(&a, &b)| phi1(a * p.delta) * b * p.delta)
        .collect();
    Ok((a_bar, b_bar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn half_decay() {
        let p = ZohParams { a: vec![c(-1.0, 0.0)], b: vec![c(1.0, 0.0)], delta: 2f64.ln() };
        let (a, b) = zoh_discretize(&p).unwrap();
        assert!((a[0] - c(0.5, 0.0)).norm() < 1e-15);
        // (0.5 − 1) / (−1) = 0.5
        assert!((b[0] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_coefficient_limit() {
        let p = ZohParams { a: vec![c(0.0, 0.0), c(1e-12, 0.0)], b: vec![c(3.0, 1.0); 2], delta: 0.25 };
        let (a, b) = zoh_discretize(&p).unwrap();
        assert_eq!(a[0], c(1.0, 0.0));
        assert!((b[0] - c(0.75, 0.25)).norm() < 1e-15);
        assert!((b[1] - c(0.75, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn small_step_continuity() {
        let p = ZohParams { a: vec![c(-0.5, 2.0)], b: vec![c(1.0, 0.0)], delta: 1e-9 };
        let (a, b) = zoh_discretize(&p).unwrap();
        assert!((a[0] - c(1.0, 0.0)).norm() < 1e-8);
        assert!(b[0].norm() < 1e-8);
    }

    #[test]
    fn series_and_direct_branches_agree() {
        for z in [c(1.1e-4, 0.0), c(0.0, -1.2e-4), c(-9e-5, 5e-5)] {
            let direct = (z.exp() - 1.0) / z;
            assert!((phi1(z) - direct).norm() < 1e-11);
        }
    }

    #[test]
    fn invalid_step() {
        let p = ZohParams { a: vec![c(-1.0, 0.0)], b: vec![c(1.0, 0.0)], delta: 0.0 };
        assert!(zoh_discretize(&p).is_err());
    }
}
