use std::collections::HashMap;

use rand::Rng;

use crate::graph::{Gradients, Graph, Var};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Index of a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

/// Ordered collection of named learnable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    values: Vec<Tensor<F>>,
    index: HashMap<String, usize>,
}

impl<F: Real> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { names: Vec::new(), values: Vec::new(), index: HashMap::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name {name}");
        self.index.insert(name.clone(), self.values.len());
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<F>> {
        self.index.get(name).map(|&i| &self.values[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.index.get(name).map(|&i| &mut self.values[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor<F>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(Tensor::all_finite)
    }

    /// Record every tensor on `graph`, as leaves when `trainable`.
    pub fn bind<'g>(&self, graph: &'g Graph<F>, trainable: bool) -> Bound<'g, F> {
        let vars = self
            .values
            .iter()
            .map(|t| if trainable { graph.leaf(t.clone()) } else { graph.constant(t.clone()) })
            .collect();
        Bound { vars }
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }
}

/// A [`ParamStore`] recorded on one graph.
pub struct Bound<'g, F: Real> {
    vars: Vec<Var<'g, F>>,
}

impl<'g, F: Real> Bound<'g, F> {
    /// Wrap variables recorded elsewhere, in store order.
    pub fn from_vars(vars: Vec<Var<'g, F>>) -> Self {
        Bound { vars }
    }

    pub fn get(&self, id: ParamId) -> Var<'g, F> {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var<'g, F>] {
        &self.vars
    }

    /// One gradient per parameter, zero-filled where the root did not depend on it.
    pub fn grads(&self, grads: &Gradients<F>) -> Vec<Tensor<F>> {
        self.vars.iter().map(|&v| grads.get_or_zero(v)).collect()
    }
}

/// He-style uniform initialization for a `Cout x Cin x Kh x Kw` kernel
/// feeding a leaky ReLU with the given negative slope.
pub fn kaiming_uniform<F: Real, R: Rng + ?Sized>(shape: Shape, negative_slope: f64, rng: &mut R) -> Tensor<F> {
    let fan_in = (shape.c * shape.h * shape.w) as f64;
    let bound = (6.0 / ((1.0 + negative_slope * negative_slope) * fan_in)).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}
