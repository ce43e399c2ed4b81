use super::linalg::{psd_sqrt, symmetrize, trace};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: Vec<f64>,
    /// `[d × d]`, symmetric.
    pub cov: Tensor<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of the rows of `[N × d]` features.
pub fn fit_gaussian(features: &Tensor<f64>) -> Result<GaussianStats> {
    let (n, d) = match features.shape() {
        [n, d] => (*n, *d),
        s => return Err(Error::arg(format!("features must be [N × d], got {s:?}"))),
    };
    if n < 2 {
        return Err(Error::arg(format!("need at least 2 feature rows, got {n}")));
    }
    let mut mean = vec![0.0; d];
    for i in 0..n {
        mean.iter_mut().zip(features.row(i)).for_each(|(m, &x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centred = Tensor::from_fn(&[n, d], |k| features.data()[k] - mean[k % d]);
    let cov = centred.transpose()?.matmul(&centred)?.scale(1.0 / (n - 1) as f64);
    Ok(GaussianStats {
        mean,
        cov: symmetrize(&cov)?,
    })
}

/// Squared Fréchet distance between two Gaussians,
/// `‖μ − μ′‖² + Tr(Σ + Σ′ − 2(√Σ Σ′ √Σ)^{1/2})`.
pub fn frechet_distance(p: &GaussianStats, q: &GaussianStats) -> Result<f64> {
    if p.dim() != q.dim() || p.cov.shape() != q.cov.shape() {
        return Err(Error::arg(format!("dimension mismatch: {} vs {}", p.dim(), q.dim())));
    }
    let mean_term: f64 = p.mean.iter().zip(&q.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let s = psd_sqrt(&p.cov)?;
    let inner = symmetrize(&s.matmul(&q.cov)?.matmul(&s)?)?;
    let cross = trace(&psd_sqrt(&inner)?)?;
    let d2 = mean_term + trace(&p.cov)? + trace(&q.cov)? - 2.0 * cross;
    if d2 < -1e-8 {
        return Err(Error::Evaluation(format!("Fréchet distance came out negative ({d2:e})")));
    }
    Ok(d2.max(0.0))
}
