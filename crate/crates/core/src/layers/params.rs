use crate::error::{Error, Result};
use crate::rng::{gaussian_init, SeededRng};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to one tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named tensors in insertion order. Gradients live in a second store with
/// the same names and shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(Error::arg(format!("duplicate parameter name '{name}'")));
        }
        self.names.push(name);
        self.tensors.push(tensor);
        Ok(ParamId(self.tensors.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of stored scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// Checks that `other` has the same names and shapes.
    pub fn ensure_same_layout<U: Scalar>(&self, other: &ParamStore<U>) -> Result<()> {
        if self.names != other.names {
            return Err(Error::arg("parameter stores have different names"));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.shape() != b.shape() {
                return Err(Error::Shape {
                    expected: a.shape().to_vec(),
                    actual: b.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// `self += other`, entry by entry.
    pub fn accumulate(&mut self, other: &Self) -> Result<()> {
        self.ensure_same_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale_all(&mut self, s: T) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    /// Replaces every tensor, keeping names; shapes must match.
    pub fn set_all(&mut self, values: Vec<Tensor<T>>) -> Result<()> {
        if values.len() != self.tensors.len() {
            return Err(Error::arg(format!(
                "expected {} tensors, got {}",
                self.tensors.len(),
                values.len()
            )));
        }
        for (old, new) in self.tensors.iter().zip(&values) {
            new.ensure_shape(old.shape())?;
        }
        self.tensors = values;
        Ok(())
    }
}

/// Registers parameters under a hierarchical name prefix.
///
/// Each tensor draws from a stream forked off the builder's stream by the
/// tensor's full name, so initial values do not depend on construction order.
pub struct ParamBuilder<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: SeededRng,
    prefix: String,
}

impl<'a, T: Scalar> ParamBuilder<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, rng: SeededRng) -> Self {
        ParamBuilder {
            store,
            rng,
            prefix: String::new(),
        }
    }

    fn full_name(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    pub fn child(&mut self, name: &str) -> ParamBuilder<'_, T> {
        let prefix = self.full_name(name);
        ParamBuilder {
            store: self.store,
            rng: self.rng.clone(),
            prefix,
        }
    }

    /// Random stream reserved for `name` under the current prefix.
    pub fn rng_for(&self, name: &str) -> SeededRng {
        self.rng.fork_named(&self.full_name(name))
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], variance: f64) -> Result<ParamId> {
        let t = gaussian_init(&mut self.rng_for(name), shape, variance)?;
        self.tensor(name, t)
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.tensor(name, Tensor::zeros(shape))
    }

    pub fn full(&mut self, name: &str, shape: &[usize], value: f64) -> Result<ParamId> {
        self.tensor(name, Tensor::full(shape, T::of(value)))
    }

    pub fn tensor(&mut self, name: &str, t: Tensor<T>) -> Result<ParamId> {
        let full = self.full_name(name);
        self.store.add(full, t)
    }
}
