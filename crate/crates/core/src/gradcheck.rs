//! Central finite differences as an oracle for analytic backward passes.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor of the relative-error denominator.
pub const EPS_ABS: f64 = 1e-8;

/// Default step and tolerance used across the gradient suite.
pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOL: f64 = 1e-4;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every entry of `x`.
pub fn finite_difference_gradient(
    mut f: impl FnMut(&Tensor<f64>) -> f64,
    x: &Tensor<f64>,
    h: f64,
) -> Result<Tensor<f64>> {
    if !(h > 0.0) {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let up = f(&probe);
        probe.data_mut()[i] = orig - h;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Evaluation(format!(
                "objective is not finite around entry {i}"
            )));
        }
        grad.data_mut()[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(EPS_ABS)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Worst relative error per checked tensor, in input order.
    pub per_tensor: Vec<(String, f64)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error < self.tolerance
    }
}

/// A differentiable computation with named real inputs (activations and
/// parameters alike) and a scalar objective.
pub trait GradCheckable {
    /// Current values of every checked tensor, with names.
    fn inputs(&self) -> Vec<(String, Tensor<f64>)>;

    /// Scalar objective at the given input values (same order as `inputs`).
    fn loss(&self, values: &[Tensor<f64>]) -> Result<f64>;

    /// Analytic gradient of `loss` with respect to every input.
    fn gradients(&self, values: &[Tensor<f64>]) -> Result<Vec<Tensor<f64>>>;
}

/// Compares analytic and finite-difference gradients for every input tensor.
pub fn gradient_check(
    target: &dyn GradCheckable,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let named = target.inputs();
    let values: Vec<Tensor<f64>> = named.iter().map(|(_, t)| t.clone()).collect();
    let analytic = target.gradients(&values)?;
    if analytic.len() != values.len() {
        return Err(Error::arg("gradient count does not match input count"));
    }
    let mut per_tensor = Vec::with_capacity(values.len());
    let mut max_rel: f64 = 0.0;
    for (idx, (name, _)) in named.iter().enumerate() {
        analytic[idx].ensure_shape(values[idx].shape())?;
        let mut scratch = values.clone();
        let mut failure = None;
        let numeric = finite_difference_gradient(
            |x| {
                scratch[idx] = x.clone();
                match target.loss(&scratch) {
                    Ok(v) => v,
                    Err(e) => {
                        failure = Some(e);
                        f64::NAN
                    }
                }
            },
            &values[idx],
            h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let numeric = numeric?;
        let worst = analytic[idx]
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(&a, &n)| relative_error(a, n))
            .fold(0.0, f64::max);
        max_rel = max_rel.max(worst);
        per_tensor.push((name.clone(), worst));
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        per_tensor,
        tolerance: tol,
    })
}
