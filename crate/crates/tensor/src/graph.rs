//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s in creation
//! order, which is already a topological order. [`Graph::backward`] walks the
//! tape in reverse and accumulates gradients into leaves created with
//! [`Graph::leaf`]. Constants never receive gradients and operations whose
//! inputs are all constant store no backward closure at all.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Computes parent gradients from the output gradient.
///
/// The second argument flags which parents need a gradient; entries for
/// parents that do not may be `None`.
pub type BackwardFn<F> = Box<dyn Fn(&Tensor<F>, &[bool]) -> Vec<Option<Tensor<F>>>>;

struct Node<F: Real> {
    value: Rc<Tensor<F>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<F>>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph<F: Real> {
    nodes: RefCell<Vec<Node<F>>>,
}

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, F: Real> {
    graph: &'g Graph<F>,
    id: usize,
}

impl<F: Real> fmt::Debug for Var<'_, F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node<F>) -> Var<'_, F> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var { graph: self, id: nodes.len() - 1 }
    }

    /// Value that never receives a gradient.
    pub fn constant(&self, value: Tensor<F>) -> Var<'_, F> {
        self.push(Node { value: Rc::new(value), parents: Vec::new(), backward: None, requires_grad: false })
    }

    /// Differentiable input; its gradient is reported by [`Graph::backward`].
    pub fn leaf(&self, value: Tensor<F>) -> Var<'_, F> {
        self.push(Node { value: Rc::new(value), parents: Vec::new(), backward: None, requires_grad: true })
    }

    /// Records an operation with a hand-written backward pass.
    ///
    /// `backward` receives the gradient of the output and must return one
    /// entry per parent, in order, each shaped like that parent's value.
    pub fn custom<'g, B>(&'g self, parents: &[Var<'g, F>], value: Tensor<F>, backward: B) -> Var<'g, F>
    where
        B: Fn(&Tensor<F>, &[bool]) -> Vec<Option<Tensor<F>>> + 'static,
    {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| {
                debug_assert!(std::ptr::eq(p.graph, self), "var from another graph");
                nodes[p.id].requires_grad
            })
        };
        let backward: Option<BackwardFn<F>> = if requires_grad { Some(Box::new(backward)) } else { None };
        self.push(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.id).collect(),
            backward,
            requires_grad,
        })
    }

    /// Gradients of the scalar `root` with respect to every leaf it depends on.
    pub fn backward(&self, root: Var<'_, F>) -> Gradients<F> {
        let nodes = self.nodes.borrow();
        let root_shape = nodes[root.id].value.shape();
        assert_eq!(root_shape.numel(), 1, "backward() needs a scalar root, got {root_shape:?}");
        let mut grads: Vec<Option<Tensor<F>>> = (0..=root.id).map(|_| None).collect();
        grads[root.id] = Some(Tensor::ones(root_shape));
        let mut leaves = HashMap::new();

        for id in (0..=root.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.backward {
                None => {
                    leaves.insert(id, g);
                }
                Some(bw) => {
                    let needs: Vec<bool> = node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
                    let parent_grads = bw(&g, &needs);
                    debug_assert_eq!(parent_grads.len(), node.parents.len());
                    for ((&p, pg), need) in node.parents.iter().zip(parent_grads).zip(needs) {
                        if !need {
                            continue;
                        }
                        let Some(pg) = pg else { continue };
                        debug_assert_eq!(pg.shape(), nodes[p].value.shape(), "gradient shape for node {p}");
                        match &mut grads[p] {
                            Some(acc) => acc.add_assign(&pg),
                            slot @ None => *slot = Some(pg),
                        }
                    }
                }
            }
        }
        Gradients { leaves }
    }
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug, Default)]
pub struct Gradients<F> {
    leaves: HashMap<usize, Tensor<F>>,
}

impl<F: Real> Gradients<F> {
    /// Gradient for `v`, or `None` when `v` did not influence the root.
    pub fn get(&self, v: Var<'_, F>) -> Option<&Tensor<F>> {
        self.leaves.get(&v.id)
    }

    pub fn take(&mut self, v: Var<'_, F>) -> Option<Tensor<F>> {
        self.leaves.remove(&v.id)
    }

    /// Gradient for `v`, zero-filled when `v` did not influence the root.
    pub fn get_or_zero(&self, v: Var<'_, F>) -> Tensor<F> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(v.shape()))
    }
}

impl<'g, F: Real> Var<'g, F> {
    pub fn graph(&self) -> &'g Graph<F> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<F>> {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Shape {
        self.graph.nodes.borrow()[self.id].value.shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// Scalar value of a `1x1x1x1` variable.
    pub fn item(&self) -> F {
        self.value().item()
    }

    /// Same value, cut from the tape.
    pub fn detach(&self) -> Var<'g, F> {
        let v = self.value();
        self.graph.push(Node { value: v, parents: Vec::new(), backward: None, requires_grad: false })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_accumulate_over_shared_subexpressions() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::scalar(3.0));
        // y = x*x + x  => dy/dx = 2x + 1 = 7
        let y = x * x + x;
        let grads = g.backward(y);
        assert_eq!(grads.get(x).unwrap().item(), 7.0);
    }

    #[test]
    fn constants_and_detached_values_get_no_gradient() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::scalar(2.0));
        let c = g.constant(Tensor::scalar(5.0));
        let y = x * c + x.detach() * x.detach();
        let grads = g.backward(y);
        assert_eq!(grads.get(x).unwrap().item(), 5.0);
        assert!(grads.get(c).is_none());
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let g = Graph::<f32>::new();
        let x = g.leaf(Tensor::scalar(1.0));
        let z = g.leaf(Tensor::scalar(1.0));
        let grads = g.backward(x.scale(2.0));
        assert!(grads.get(z).is_none());
        assert_eq!(grads.get_or_zero(z).item(), 0.0);
    }

    #[test]
    fn backward_can_run_twice() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::scalar(1.5));
        let a = x * x;
        let b = x.scale(4.0);
        assert_eq!(g.backward(a).get(x).unwrap().item(), 3.0);
        assert_eq!(g.backward(b).get(x).unwrap().item(), 4.0);
    }
}
