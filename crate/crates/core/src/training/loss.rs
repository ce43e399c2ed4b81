use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::VOCAB;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

fn check(logits: &Tensor<impl Scalar>, targets: &[u8]) -> Result<usize> {
    let v = *logits.shape().last().unwrap_or(&0);
    if v != VOCAB || logits.len() != targets.len() * VOCAB {
        return Err(Error::arg(format!(
            "logits of shape {:?} do not match {} targets over {VOCAB} codes",
            logits.shape(),
            targets.len()
        )));
    }
    if targets.is_empty() {
        return Err(Error::arg("no targets"));
    }
    Ok(targets.len())
}

/// `(−log₂ p[target], softmax row)` for one row, via log-sum-exp.
fn row_terms<T: Scalar>(row: &[T], target: u8) -> (f64, Vec<f64>) {
    let max = row.iter().map(|v| v.to_f64_lossless()).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|v| (v.to_f64_lossless() - max).exp()).collect();
    let z: f64 = e.iter().sum();
    let nll = (z.ln() - (row[target as usize].to_f64_lossless() - max)) / LN_2;
    (nll, e.into_iter().map(|x| x / z).collect())
}

/// Summed negative log-likelihood in bits; rows of `logits` align with `targets`.
pub fn nll_bits_sum<T: Scalar>(logits: &Tensor<T>, targets: &[u8]) -> Result<f64> {
    check(logits, targets)?;
    Ok(logits.data().chunks(VOCAB).zip(targets).map(|(r, &t)| row_terms(r, t).0).sum())
}

/// Mean negative log₂-likelihood per token for `[… × 256]` logits.
pub fn nll_bits<T: Scalar>(logits: &Tensor<T>, targets: &[u8]) -> Result<f64> {
    Ok(nll_bits_sum(logits, targets)? / targets.len() as f64)
}

/// Summed bits and the gradient of `weight · Σ bits` with respect to the logits.
pub fn nll_bits_grad<T: Scalar>(logits: &Tensor<T>, targets: &[u8], weight: f64) -> Result<(f64, Tensor<T>)> {
    check(logits, targets)?;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &t) in logits.data().chunks(VOCAB).zip(targets) {
        let (nll, mut p) = row_terms(row, t);
        total += nll;
        p[t as usize] -= 1.0;
        grad.extend(p.into_iter().map(|v| T::of(v * weight / LN_2)));
    }
    Ok((total, Tensor::new(logits.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{finite_difference_gradient, relative_error};
    use crate::rng::SeededRng;

    #[test]
    fn uniform_logits_are_eight_bits() {
        let l = Tensor::<f64>::zeros(&[3, 256]);
        assert_eq!(nll_bits(&l, &[0, 17, 255]).unwrap(), 8.0);
        let l = Tensor::<f32>::full(&[2, 5, 256], 3.5);
        assert_eq!(nll_bits(&l, &[1; 10]).unwrap(), 8.0);
    }

    #[test]
    fn confident_correct_logits_approach_zero() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 10.0, 40.0, 1000.0] {
            let mut l = Tensor::<f64>::zeros(&[1, 256]);
            l.data_mut()[42] = margin;
            let b = nll_bits(&l, &[42]).unwrap();
            assert!(b < prev && b >= 0.0);
            prev = b;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn two_class_matches_hand_value() {
        // Every code but 0 and 1 is pushed to probability e^{-800} ≈ 0.
        let mut l = Tensor::<f64>::full(&[2, 256], -800.0);
        l.data_mut()[0] = 0.3;
        l.data_mut()[1] = -1.2;
        l.data_mut()[256] = 2.0;
        l.data_mut()[257] = 0.5;
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let expect = (-(sig(1.5)).log2() - (1.0 - sig(1.5)).log2()) / 2.0;
        assert!((nll_bits(&l, &[0, 1]).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(3);
        let l = Tensor::<f64>::from_fn(&[3, 256], |_| 2.0 * rng.normal());
        let t = [5u8, 200, 77];
        let (_, g) = nll_bits_grad(&l, &t, 1.0 / 3.0).unwrap();
        let fd = finite_difference_gradient(|x| nll_bits(x, &t).unwrap(), &l, 1e-5).unwrap();
        for (a, n) in g.data().iter().zip(fd.data()) {
            assert!(relative_error(*a, *n) < 1e-4, "{a} vs {n}");
        }
    }

    #[test]
    fn shape_mismatch_is_error() {
        assert!(nll_bits(&Tensor::<f64>::zeros(&[2, 256]), &[1]).is_err());
        assert!(nll_bits(&Tensor::<f64>::zeros(&[2, 10]), &[1, 2]).is_err());
    }
}
