use super::{ParamBuilder, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gemm, Tensor};

/// Affine map `y = x W + b` over the rows of `x`; `W` is `[n_in × n_out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    w: ParamId,
    b: Option<ParamId>,
}

impl Dense {
    /// Weights drawn from `N(0, variance)`, bias zero.
    pub fn new<T: Scalar>(
        pb: &mut ParamBuilder<'_, T>,
        name: &str,
        n_in: usize,
        n_out: usize,
        variance: f64,
        bias: bool,
    ) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::arg(format!("dense layer '{name}' needs non-zero sizes")));
        }
        let mut pb = pb.child(name);
        let w = pb.normal("w", &[n_in, n_out], variance)?;
        let b = if bias { Some(pb.zeros("b", &[n_out])?) } else { None };
        Ok(Dense { n_in, n_out, w, b })
    }

    /// `N(0, scale / n_in)` weights, the fan-in scaled initialisation.
    pub fn scaled<T: Scalar>(pb: &mut ParamBuilder<'_, T>, name: &str, n_in: usize, n_out: usize, scale: f64) -> Result<Self> {
        Self::new(pb, name, n_in, n_out, scale / n_in as f64, true)
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> Option<ParamId> {
        self.b
    }

    pub fn param_count(&self) -> usize {
        self.n_in * self.n_out + if self.b.is_some() { self.n_out } else { 0 }
    }

    fn rows_of<T: Scalar>(&self, x: &Tensor<T>) -> Result<usize> {
        if x.ndim() != 2 || x.cols() != self.n_in {
            return Err(Error::Shape {
                expected: vec![x.len() / self.n_in.max(1), self.n_in],
                actual: x.shape().to_vec(),
            });
        }
        Ok(x.rows())
    }

    pub fn forward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let s = self.rows_of(x)?;
        let mut y = vec![T::zero(); s * self.n_out];
        if let Some(b) = self.b {
            let b = p.get(b).data();
            for row in y.chunks_exact_mut(self.n_out) {
                row.copy_from_slice(b);
            }
        }
        gemm(s, self.n_in, self.n_out, x.data(), false, p.get(self.w).data(), false, &mut y, true);
        Tensor::new(vec![s, self.n_out], y)
    }

    /// Accumulates `dW`, `db` into `g` and returns `dx`.
    pub fn backward<T: Scalar>(&self, p: &ParamStore<T>, x: &Tensor<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<Tensor<T>> {
        self.backward_params(x, dy, g)?;
        let s = x.rows();
        let mut dx = vec![T::zero(); s * self.n_in];
        gemm(s, self.n_out, self.n_in, dy.data(), false, p.get(self.w).data(), true, &mut dx, false);
        Tensor::new(vec![s, self.n_in], dx)
    }

    /// Parameter gradients only, for layers whose input needs no gradient.
    pub fn backward_params<T: Scalar>(&self, x: &Tensor<T>, dy: &Tensor<T>, g: &mut ParamStore<T>) -> Result<()> {
        let s = self.rows_of(x)?;
        dy.ensure_shape(&[s, self.n_out])?;
        gemm(self.n_in, s, self.n_out, x.data(), true, dy.data(), false, g.get_mut(self.w).data_mut(), true);
        if let Some(b) = self.b {
            let gb = g.get_mut(b).data_mut();
            for row in dy.data().chunks_exact(self.n_out) {
                gb.iter_mut().zip(row).for_each(|(a, &d)| *a += d);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::LayerGradCheck;
    use crate::rng::SeededRng;

    fn setup(bias: bool) -> (ParamStore<f64>, Dense) {
        let mut store = ParamStore::new();
        let mut pb = ParamBuilder::new(&mut store, SeededRng::new(3));
        let d = Dense::new(&mut pb, "d", 4, 3, 1.0, bias).unwrap();
        if let Some(b) = d.bias() {
            let mut rng = SeededRng::new(9);
            store.get_mut(b).data_mut().iter_mut().for_each(|v| *v = rng.normal());
        }
        (store, d)
    }

    #[test]
    fn matches_naive_product() {
        let (p, d) = setup(true);
        let mut rng = SeededRng::new(4);
        let x = Tensor::from_fn(&[5, 4], |_| rng.normal());
        let y = d.forward(&p, &x).unwrap();
        let (w, b) = (p.get(d.weight()), p.get(d.bias().unwrap()));
        for s in 0..5 {
            for o in 0..3 {
                let want: f64 = (0..4).map(|i| x.row(s)[i] * w.data()[i * 3 + o]).sum::<f64>() + b.data()[o];
                assert!((y.row(s)[o] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradcheck_passes() {
        for bias in [true, false] {
            let (p, d) = setup(bias);
            let mut rng = SeededRng::new(5);
            let x = Tensor::from_fn(&[6, 4], |_| rng.normal());
            let check = LayerGradCheck::linear_probe(
                p,
                x,
                1,
                |p, x| d.forward(p, x),
                |p, x, dy, g| d.backward(p, x, dy, g),
            )
            .unwrap();
            let report = check.run().unwrap();
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn corrupted_backward_fails() {
        let (p, d) = setup(true);
        let x = Tensor::from_fn(&[3, 4], |i| (i as f64 * 0.37).sin());
        let check = LayerGradCheck::linear_probe(
            p,
            x,
            1,
            |p, x| d.forward(p, x),
            |p, x, dy, g| Ok(d.backward(p, x, dy, g)?.scale(2.0)),
        )
        .unwrap();
        assert!(!check.run().unwrap().passed());
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let (p, d) = setup(false);
        assert!(matches!(d.forward(&p, &Tensor::zeros(&[2, 5])), Err(Error::Shape { .. })));
    }
}
