//! Classifier-based sample scores computed from predicted class
//! distributions `p(y|x)`, one row per generated sample.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied inside logarithms of the second KL argument so that a
/// distribution with an exact zero cannot produce an infinite score.
const LOG_FLOOR: f64 = 1e-12;

fn check_probs(probs: &Tensor<f64>) -> Result<(usize, usize)> {
    let (n, k) = match probs.shape() {
        [n, k] => (*n, *k),
        s => return Err(Error::arg(format!("probabilities must be [N × K], got {s:?}"))),
    };
    if n == 0 || k == 0 {
        return Err(Error::arg("probability matrix is empty"));
    }
    for i in 0..n {
        let row = probs.row(i);
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::arg(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::arg(format!("row {i} sums to {s}, not 1")));
        }
    }
    Ok((n, k))
}

/// `KL(p ‖ q)` in nats with `0 ln 0 = 0`.
fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a.ln() - b.max(LOG_FLOOR).ln()))
        .sum()
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&a| a > 0.0).map(|&a| -a * a.ln()).sum()
}

fn marginal(probs: &Tensor<f64>, n: usize, k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k];
    for i in 0..n {
        m.iter_mut().zip(probs.row(i)).for_each(|(a, &p)| *a += p);
    }
    m.iter_mut().for_each(|a| *a /= n as f64);
    m
}

/// `exp(E_x KL(p(y|x) ‖ p(y)))` with `p(y)` the sample marginal.
/// Lies in `[1, K]`.
pub fn inception_score(probs: &Tensor<f64>) -> Result<f64> {
    let (n, k) = check_probs(probs)?;
    let pbar = marginal(probs, n, k);
    let mean_kl = (0..n).map(|i| kl(probs.row(i), &pbar)).sum::<f64>() / n as f64;
    Ok(mean_kl.max(0.0).exp())
}

/// Modified inception score and AM score.
///
/// mIS is `exp(E_i E_j KL(p_i ‖ p_j))` with `j` ranging over the samples
/// sharing `i`'s predicted (argmax) class, so it rewards diversity within a
/// class. AM is `KL(u ‖ p̄) + E_x H(p(y|x))` with `u` the uniform label
/// distribution of a balanced training set.
pub fn modified_is_and_am(probs: &Tensor<f64>) -> Result<(f64, f64)> {
    let (_, k) = check_probs(probs)?;
    let uniform = vec![1.0 / k as f64; k];
    Ok((modified_inception_score(probs)?, am_score(probs, &uniform)?))
}

pub fn modified_inception_score(probs: &Tensor<f64>) -> Result<f64> {
    let (n, k) = check_probs(probs)?;
    let argmax = |r: &[f64]| (0..k).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0);
    let pred: Vec<usize> = (0..n).map(|i| argmax(probs.row(i))).collect();
    let mut total = 0.0;
    for i in 0..n {
        let mates: Vec<usize> = (0..n).filter(|&j| pred[j] == pred[i]).collect();
        let s: f64 = mates.iter().map(|&j| kl(probs.row(i), probs.row(j))).sum();
        total += s / mates.len() as f64;
    }
    Ok((total / n as f64).max(0.0).exp())
}

/// AM score against an explicit reference label distribution.
pub fn am_score(probs: &Tensor<f64>, reference: &[f64]) -> Result<f64> {
    let (n, k) = check_probs(probs)?;
    if reference.len() != k {
        return Err(Error::arg(format!("reference has {} classes, probabilities have {k}", reference.len())));
    }
    let pbar = marginal(probs, n, k);
    let mean_h = (0..n).map(|i| entropy(probs.row(i))).sum::<f64>() / n as f64;
    Ok(kl(reference, &pbar) + mean_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn random_probs(n: usize, k: usize, rng: &mut SeededRng) -> Tensor<f64> {
        let sharp = rng.uniform_range(0.1, 8.0);
        let mut t = Tensor::from_fn(&[n, k], |_| (sharp * rng.normal()).exp());
        for i in 0..n {
            let row = t.row_mut(i);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        t
    }

    fn one_hot(labels: &[usize], k: usize) -> Tensor<f64> {
        Tensor::from_fn(&[labels.len(), k], |idx| if labels[idx / k] == idx % k { 1.0 } else { 0.0 })
    }

    #[test]
    fn bounds_over_random_matrices() {
        let mut rng = SeededRng::new(11);
        for _ in 0..1000 {
            let n = 1 + rng.below(20) as usize;
            let k = 1 + rng.below(10) as usize;
            let is = inception_score(&random_probs(n, k, &mut rng)).unwrap();
            assert!((1.0 - 1e-12..=k as f64 + 1e-9).contains(&is), "IS {is} outside [1, {k}]");
        }
    }

    #[test]
    fn extremes() {
        let k = 5;
        let perfect = one_hot(&[0, 1, 2, 3, 4, 0, 1, 2, 3, 4], k);
        assert!((inception_score(&perfect).unwrap() - 5.0).abs() < 1e-12);
        let collapsed = one_hot(&[2; 7], k);
        assert!((inception_score(&collapsed).unwrap() - 1.0).abs() < 1e-12);
        let uniform = Tensor::full(&[4, k], 0.2);
        assert!((inception_score(&uniform).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modified_score_and_am_hand_values() {
        // Identical rows: no within-class diversity.
        let same = Tensor::from_fn(&[3, 2], |i| if i % 2 == 0 { 0.7 } else { 0.3 });
        assert!((modified_inception_score(&same).unwrap() - 1.0).abs() < 1e-12);
        // Uniform predictions: AM is the label entropy.
        let uniform = Tensor::full(&[6, 4], 0.25);
        let (_, am) = modified_is_and_am(&uniform).unwrap();
        assert!((am - 4f64.ln()).abs() < 1e-12);
        // Confident, balanced predictions: AM vanishes.
        let perfect = one_hot(&[0, 1, 2, 3], 4);
        assert!(modified_is_and_am(&perfect).unwrap().1.abs() < 1e-12);
        // Two rows in class 0 with KL(p‖q) = 0.9 ln 1.5 + 0.1 ln 0.25 each way averaged.
        let pair = Tensor::new(vec![2, 2], vec![0.9, 0.1, 0.6, 0.4]).unwrap();
        let kl_pq = 0.9 * (0.9f64 / 0.6).ln() + 0.1 * (0.1f64 / 0.4).ln();
        let kl_qp = 0.6 * (0.6f64 / 0.9).ln() + 0.4 * (0.4f64 / 0.1).ln();
        let want = ((kl_pq + kl_qp) / 4.0).exp();
        assert!((modified_inception_score(&pair).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        assert!(inception_score(&Tensor::zeros(&[0, 3])).is_err());
        assert!(inception_score(&Tensor::full(&[2, 2], 0.4)).is_err());
        assert!(inception_score(&Tensor::new(vec![1, 2], vec![1.5, -0.5]).unwrap()).is_err());
        assert!(am_score(&Tensor::full(&[2, 2], 0.5), &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn score_is_permutation_invariant(seed in 0u64..10_000) {
            let mut rng = SeededRng::new(seed);
            let p = random_probs(8, 4, &mut rng);
            let mut order: Vec<usize> = (0..8).collect();
            rng.shuffle(&mut order);
            let q = Tensor::from_fn(&[8, 4], |i| p.row(order[i / 4])[i % 4]);
            let (a, b) = (inception_score(&p).unwrap(), inception_score(&q).unwrap());
            prop_assert!((a - b).abs() < 1e-12 * a);
            let (ma, mb) = (modified_is_and_am(&p).unwrap(), modified_is_and_am(&q).unwrap());
            prop_assert!((ma.0 - mb.0).abs() < 1e-9 && (ma.1 - mb.1).abs() < 1e-9);
            prop_assert!(ma.0 >= 1.0 && ma.1 >= -1e-12);
        }
    }
}
