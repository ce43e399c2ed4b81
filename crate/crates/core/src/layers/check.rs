use super::ParamStore;
use crate::error::Result;
use crate::gradcheck::{gradient_check, GradCheckReport, GradCheckable, DEFAULT_STEP, DEFAULT_TOL};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

type LossFn<'a> = Box<dyn Fn(&ParamStore<f64>, Option<&Tensor<f64>>) -> Result<f64> + 'a>;
type GradFn<'a> =
    Box<dyn Fn(&ParamStore<f64>, Option<&Tensor<f64>>) -> Result<(Option<Tensor<f64>>, ParamStore<f64>)> + 'a>;

/// Adapts a layer (or a whole model) to [`GradCheckable`]: the optional
/// activation input is checked as `"x"`, followed by every parameter tensor.
pub struct LayerGradCheck<'a> {
    params: ParamStore<f64>,
    input: Option<Tensor<f64>>,
    loss_fn: LossFn<'a>,
    grad_fn: GradFn<'a>,
}

impl<'a> LayerGradCheck<'a> {
    /// Scalar objective with its own analytic gradient.
    pub fn new(
        params: ParamStore<f64>,
        input: Option<Tensor<f64>>,
        loss_fn: impl Fn(&ParamStore<f64>, Option<&Tensor<f64>>) -> Result<f64> + 'a,
        grad_fn: impl Fn(&ParamStore<f64>, Option<&Tensor<f64>>) -> Result<(Option<Tensor<f64>>, ParamStore<f64>)> + 'a,
    ) -> Self {
        LayerGradCheck {
            params,
            input,
            loss_fn: Box::new(loss_fn),
            grad_fn: Box::new(grad_fn),
        }
    }

    /// Objective `Σ P ⊙ f(x)` for a fixed random probe `P`, which exercises the
    /// full Jacobian rather than one output direction.
    ///
    /// `backward(params, x, dy, grads)` must accumulate parameter gradients
    /// into `grads` and return `dL/dx`.
    pub fn linear_probe<F, B>(params: ParamStore<f64>, input: Tensor<f64>, seed: u64, forward: F, backward: B) -> Result<Self>
    where
        F: Fn(&ParamStore<f64>, &Tensor<f64>) -> Result<Tensor<f64>> + 'a,
        B: Fn(&ParamStore<f64>, &Tensor<f64>, &Tensor<f64>, &mut ParamStore<f64>) -> Result<Tensor<f64>> + 'a,
    {
        let y = forward(&params, &input)?;
        let mut rng = SeededRng::new(seed).fork_named("probe");
        let probe = Tensor::from_fn(y.shape(), |_| rng.normal());
        let probe_b = probe.clone();
        let forward = std::rc::Rc::new(forward);
        let forward_l = forward.clone();
        Ok(Self::new(
            params,
            Some(input),
            move |p, x| forward_l(p, x.expect("input present"))?.dot(&probe),
            move |p, x| {
                let x = x.expect("input present");
                let mut g = p.zeros_like();
                let dx = backward(p, x, &probe_b, &mut g)?;
                Ok((Some(dx), g))
            },
        ))
    }

    pub fn check(&self, h: f64, tol: f64) -> Result<GradCheckReport> {
        gradient_check(self, h, tol)
    }

    /// Check with the default step `1e-5` and tolerance `1e-4`.
    pub fn run(&self) -> Result<GradCheckReport> {
        self.check(DEFAULT_STEP, DEFAULT_TOL)
    }

    fn split<'v>(&self, values: &'v [Tensor<f64>]) -> Result<(Option<&'v Tensor<f64>>, ParamStore<f64>)> {
        let (x, rest) = if self.input.is_some() {
            (Some(&values[0]), &values[1..])
        } else {
            (None, values)
        };
        let mut p = self.params.clone();
        p.set_all(rest.to_vec())?;
        Ok((x, p))
    }
}

impl GradCheckable for LayerGradCheck<'_> {
    fn inputs(&self) -> Vec<(String, Tensor<f64>)> {
        let mut out = Vec::new();
        if let Some(x) = &self.input {
            out.push(("x".to_string(), x.clone()));
        }
        out.extend(self.params.iter().map(|(n, t)| (n.to_string(), t.clone())));
        out
    }

    fn loss(&self, values: &[Tensor<f64>]) -> Result<f64> {
        let (x, p) = self.split(values)?;
        (self.loss_fn)(&p, x)
    }

    fn gradients(&self, values: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>> {
        let (x, p) = self.split(values)?;
        let (dx, g) = (self.grad_fn)(&p, x)?;
        let mut out = Vec::new();
        if let Some(dx) = dx {
            out.push(dx);
        }
        out.extend(g.tensors().iter().cloned());
        Ok(out)
    }
}
