use super::{ParamBuilder, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Layer,
    Rms,
    None,
}

impl NormKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "layer" => Ok(NormKind::Layer),
            "rms" => Ok(NormKind::Rms),
            "none" => Ok(NormKind::None),
            other => Err(Error::arg(format!("unknown norm kind '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Layer => "layer",
            NormKind::Rms => "rms",
            NormKind::None => "none",
        }
    }
}

/// Per-row normalisation over the feature dimension.
///
/// * layer: `γ ⊙ (x − μ)/√(var + ε) + β`
/// * rms: `γ ⊙ x/√(mean(x²) + ε)`
/// * none: identity
#[derive(Debug, Clone)]
pub struct Norm {
    pub kind: NormKind,
    pub dim: usize,
    pub eps: f64,
    gamma: Option<ParamId>,
    beta: Option<ParamId>,
}

#[derive(Debug, Clone)]
pub struct NormCache<T> {
    xhat: Vec<T>,
    inv: Vec<T>,
}

impl Norm {
    pub const DEFAULT_EPS: f64 = 1e-6;

    pub fn new<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("norm dimension must be positive"));
        }
        let mut pb = pb.child(name);
        let gamma = match kind {
            NormKind::None => None,
            _ => Some(pb.full("gamma", &[dim], 1.0)?),
        };
        let beta = match kind {
            NormKind::Layer => Some(pb.zeros("beta", &[dim])?),
            _ => None,
        };
        Ok(Norm {
            kind,
            dim,
            eps: Self::DEFAULT_EPS,
            gamma,
            beta,
        })
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            NormKind::Layer => 2 * self.dim,
            NormKind::Rms => self.dim,
            NormKind::None => 0,
        }
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<(Tensor<T>, NormCache<T>)> {
        if x.ndim() != 2 || x.cols() != self.dim {
            return Err(Error::Shape {
                expected: vec![x.len() / self.dim, self.dim],
                actual: x.shape().to_vec(),
            });
        }
        if self.kind == NormKind::None {
            return Ok((x.clone(), NormCache { xhat: Vec::new(), inv: Vec::new() }));
        }
        let d = self.dim;
        let n = T::of(d as f64);
        let eps = T::of(self.eps);
        let gamma = p.get(self.gamma.expect("scaled norm")).data();
        let beta = self.beta.map(|b| p.get(b).data());
        let mut xhat = vec![T::zero(); x.len()];
        let mut inv = Vec::with_capacity(x.rows());
        let mut y = vec![T::zero(); x.len()];
        for (r, row) in x.data().chunks_exact(d).enumerate() {
            let (mean, ms) = if self.kind == NormKind::Layer {
                let mean = row.iter().copied().sum::<T>() / n;
                let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                (mean, var)
            } else {
                (T::zero(), row.iter().map(|&v| v * v).sum::<T>() / n)
            };
            let iv = T::one() / (ms + eps).sqrt();
            inv.push(iv);
            for j in 0..d {
                let h = (row[j] - mean) * iv;
                xhat[r * d + j] = h;
                y[r * d + j] = gamma[j] * h + beta.map_or(T::zero(), |b| b[j]);
            }
        }
        Ok((Tensor::new(x.shape().to_vec(), y)?, NormCache { xhat, inv }))
    }

    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, cache: &NormCache<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        if self.kind == NormKind::None {
            return Ok(dy.clone());
        }
        let d = self.dim;
        let n = T::of(d as f64);
        let gamma = p.get(self.gamma.expect("scaled norm")).data().to_vec();
        let mut dgamma = vec![T::zero(); d];
        let mut dbeta = vec![T::zero(); d];
        let mut dx = vec![T::zero(); dy.len()];
        let mut dh = vec![T::zero(); d];
        for (r, dyr) in dy.data().chunks_exact(d).enumerate() {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            for j in 0..d {
                dgamma[j] += dyr[j] * xh[j];
                dbeta[j] += dyr[j];
                dh[j] = dyr[j] * gamma[j];
            }
            let mean_dh = dh.iter().copied().sum::<T>() / n;
            let mean_dhx = dh.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() / n;
            let iv = cache.inv[r];
            for j in 0..d {
                let centred = if self.kind == NormKind::Layer { dh[j] - mean_dh } else { dh[j] };
                dx[r * d + j] = iv * (centred - xh[j] * mean_dhx);
            }
        }
        let gg = g.get_mut(self.gamma.expect("scaled norm")).data_mut();
        gg.iter_mut().zip(&dgamma).for_each(|(a, &b)| *a += b);
        if let Some(b) = self.beta {
            g.get_mut(b).data_mut().iter_mut().zip(&dbeta).for_each(|(a, &v)| *a += v);
        }
        Tensor::new(dy.shape().to_vec(), dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::LayerGradCheck;
    use crate::rng::SeededRng;

    fn build(kind: NormKind, dim: usize) -> (ParamStore<f64>, Norm) {
        let mut store = ParamStore::new();
        let norm = Norm::new(&mut ParamBuilder::new(&mut store, SeededRng::new(1)), "n", kind, dim).unwrap();
        (store, norm)
    }

    #[test]
    fn constant_row_layer_norm_is_zero() {
        let (p, n) = build(NormKind::Layer, 4);
        let (y, _) = n.forward(&p, &Tensor::full(&[1, 4], 3.5)).unwrap();
        assert!(y.max_abs() < 1e-12);
    }

    #[test]
    fn rms_of_plus_minus_three() {
        let (p, n) = build(NormKind::Rms, 2);
        let (y, _) = n.forward(&p, &Tensor::new(vec![1, 2], vec![3.0, -3.0]).unwrap()).unwrap();
        let want = 3.0 / (9.0f64 + 1e-6).sqrt();
        assert!((y.data()[0] - want).abs() < 1e-15 && (y.data()[1] + want).abs() < 1e-15);
        assert!((y.data()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn none_is_identity() {
        let (p, n) = build(NormKind::None, 3);
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.0);
        assert_eq!(n.forward(&p, &x).unwrap().0, x);
        assert_eq!(n.param_count(), 0);
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(build(NormKind::Layer, 8).1.param_count(), 16);
        assert_eq!(build(NormKind::Rms, 8).1.param_count(), 8);
        let (p, _) = build(NormKind::Rms, 8);
        assert_eq!(p.scalar_count(), 8);
    }

    #[test]
    fn layer_norm_shift_invariance() {
        let (p, n) = build(NormKind::Layer, 6);
        let mut rng = SeededRng::new(2);
        let x = Tensor::from_fn(&[3, 6], |_| rng.normal());
        let shifted = x.map(|v| v + 17.25);
        let (a, _) = n.forward(&p, &x).unwrap();
        let (b, _) = n.forward(&p, &shifted).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-10);
    }

    #[test]
    fn gradcheck_all_kinds() {
        for kind in [NormKind::Layer, NormKind::Rms, NormKind::None] {
            let (mut p, n) = build(kind, 5);
            let mut rng = SeededRng::new(8);
            for t in p.tensors_mut() {
                t.data_mut().iter_mut().for_each(|v| *v += 0.3 * rng.normal());
            }
            let x = Tensor::from_fn(&[4, 5], |_| rng.normal());
            let check = LayerGradCheck::linear_probe(
                p,
                x,
                2,
                |p, x| Ok(n.forward(p, x)?.0),
                |p, x, dy, g| {
                    let (_, c) = n.forward(p, x)?;
                    n.backward(p, &c, dy, g)
                },
            )
            .unwrap();
            let r = check.run().unwrap();
            assert!(r.passed(), "{kind:?}: {r:?}");
        }
    }
}
