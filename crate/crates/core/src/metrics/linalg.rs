//! Small dense symmetric linear algebra in `f64`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn square_dim(m: &Tensor<f64>) -> Result<usize> {
    match m.shape() {
        [r, c] if r == c => Ok(*r),
        s => Err(Error::arg(format!("expected a square matrix, got shape {s:?}"))),
    }
}

/// Largest `|M_ij − M_ji|`.
pub fn asymmetry(m: &Tensor<f64>) -> Result<f64> {
    let d = square_dim(m)?;
    let a = m.data();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            worst = worst.max((a[i * d + j] - a[j * d + i]).abs());
        }
    }
    Ok(worst)
}

/// Eigen-decomposition `M = Q diag(λ) Qᵀ` of a symmetric matrix by cyclic
/// Jacobi rotations. Returns `λ` and `Q` (eigenvectors in columns).
pub fn symmetric_eigen(m: &Tensor<f64>) -> Result<(Vec<f64>, Tensor<f64>)> {
    let d = square_dim(m)?;
    let mut a = m.data().to_vec();
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        q[i * d + i] = 1.0;
    }
    let total: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * total || off == 0.0 {
            break;
        }
        for p in 0..d {
            for r in p + 1..d {
                let apr = a[p * d + r];
                if apr == 0.0 {
                    continue;
                }
                let (app, arr) = (a[p * d + p], a[r * d + r]);
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (akp, akr) = (a[k * d + p], a[k * d + r]);
                    a[k * d + p] = c * akp - s * akr;
                    a[k * d + r] = s * akp + c * akr;
                }
                for k in 0..d {
                    let (apk, ark) = (a[p * d + k], a[r * d + k]);
                    a[p * d + k] = c * apk - s * ark;
                    a[r * d + k] = s * apk + c * ark;
                }
                for k in 0..d {
                    let (qkp, qkr) = (q[k * d + p], q[k * d + r]);
                    q[k * d + p] = c * qkp - s * qkr;
                    q[k * d + r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let eig = (0..d).map(|i| a[i * d + i]).collect();
    Ok((eig, Tensor::new(vec![d, d], q)?))
}

/// `Q f(Λ) Qᵀ`.
fn spectral_map(lambda: &[f64], q: &Tensor<f64>, f: impl Fn(f64) -> f64) -> Tensor<f64> {
    let d = lambda.len();
    let qd = q.data();
    let fl: Vec<f64> = lambda.iter().map(|&l| f(l)).collect();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let v: f64 = (0..d).map(|k| qd[i * d + k] * fl[k] * qd[j * d + k]).sum();
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
    Tensor::new(vec![d, d], out).expect("sized above")
}

/// Principal square root of a symmetric positive semi-definite matrix.
///
/// Eigenvalues under the rounding floor `d·ε·λ_max` are indistinguishable
/// from zero and are set to zero, negative ones included; otherwise the
/// square root would lift that noise from `ε` to `√ε`.
pub fn psd_sqrt(m: &Tensor<f64>) -> Result<Tensor<f64>> {
    let scale = 1.0 + m.max_abs();
    let asym = asymmetry(m)?;
    if asym > 1e-8 * scale {
        return Err(Error::arg(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let (lambda, q) = symmetric_eigen(m)?;
    let top = lambda.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let floor = lambda.len() as f64 * f64::EPSILON * top;
    Ok(spectral_map(&lambda, &q, |l| if l <= floor { 0.0 } else { l.sqrt() }))
}

pub fn trace(m: &Tensor<f64>) -> Result<f64> {
    let d = square_dim(m)?;
    Ok((0..d).map(|i| m.data()[i * d + i]).sum())
}

pub fn frobenius(m: &Tensor<f64>) -> f64 {
    m.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `(M + Mᵀ)/2`.
pub fn symmetrize(m: &Tensor<f64>) -> Result<Tensor<f64>> {
    let t = m.transpose()?;
    Ok(m.zip_map(&t, |a, b| 0.5 * (a + b))?)
}
