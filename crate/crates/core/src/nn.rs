//! Small building blocks shared by the networks.

use hytex_tensor::{kaiming_uniform, Bound, Conv2dSpec, ParamId, ParamStore, Real, Shape, Tensor, Var};
use rand::Rng;

pub(crate) const LEAK: f64 = 0.2;

/// Square convolution with bias and "same" padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conv {
    weight: ParamId,
    bias: ParamId,
    spec: Conv2dSpec,
}

impl Conv {
    pub fn new<F: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<F>,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), kaiming_uniform(Shape::new(cout, cin, kernel, kernel), LEAK, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(Shape::new(1, cout, 1, 1)));
        Conv { weight, bias, spec: Conv2dSpec { stride, padding: kernel / 2 } }
    }

    pub fn apply<'g, F: Real>(&self, p: &Bound<'g, F>, x: Var<'g, F>) -> Var<'g, F> {
        x.conv2d(p.get(self.weight), Some(p.get(self.bias)), self.spec)
    }

    /// Convolution followed by a leaky ReLU.
    pub fn act<'g, F: Real>(&self, p: &Bound<'g, F>, x: Var<'g, F>) -> Var<'g, F> {
        self.apply(p, x).leaky_relu(LEAK)
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }
}
