use crate::graph::{Graph, Var};
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

impl<F: Real> Graph<F> {
    /// Concatenate along the channel axis.
    pub fn cat_channels<'g>(&'g self, parts: &[Var<'g, F>]) -> Var<'g, F> {
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor<F>> = values.iter().map(|v| v.as_ref()).collect();
        let out = Tensor::cat_channels(&refs).expect("cat_channels shapes");
        let widths: Vec<usize> = values.iter().map(|v| v.shape().c).collect();
        self.custom(parts, out, move |g, need| {
            let mut start = 0;
            widths
                .iter()
                .zip(need)
                .map(|(&c, &need)| {
                    let r = need.then(|| g.narrow_channels(start, c));
                    start += c;
                    r
                })
                .collect()
        })
    }

    /// Concatenate along the batch axis.
    pub fn cat_batch<'g>(&'g self, parts: &[Var<'g, F>]) -> Var<'g, F> {
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let refs: Vec<&Tensor<F>> = values.iter().map(|v| v.as_ref()).collect();
        let out = Tensor::cat_batch(&refs).expect("cat_batch shapes");
        let counts: Vec<usize> = values.iter().map(|v| v.shape().n).collect();
        self.custom(parts, out, move |g, need| {
            let mut start = 0;
            counts
                .iter()
                .zip(need)
                .map(|(&n, &need)| {
                    let r = need.then(|| g.narrow_batch(start, n));
                    start += n;
                    r
                })
                .collect()
        })
    }
}

impl<'g, F: Real> Var<'g, F> {
    /// Channels `start..start + len`.
    pub fn narrow_channels(self, start: usize, len: usize) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        let out = x.narrow_channels(start, len);
        self.graph().custom(&[self], out, move |g, _| {
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for c in 0..len {
                    dx.plane_mut(n, start + c).copy_from_slice(g.plane(n, c));
                }
            }
            vec![Some(dx)]
        })
    }

    /// Batch items `start..start + len`.
    pub fn narrow_batch(self, start: usize, len: usize) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        let out = x.narrow_batch(start, len);
        self.graph().custom(&[self], out, move |g, _| {
            let mut dx = Tensor::zeros(s);
            let item = s.c * s.plane();
            dx.data_mut()[start * item..(start + len) * item].copy_from_slice(g.data());
            vec![Some(dx)]
        })
    }

    /// Reinterpret with a different shape of equal volume.
    pub fn reshape(self, shape: Shape) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        let out = (*x).clone().reshape(shape).expect("reshape volume");
        self.graph()
            .custom(&[self], out, move |g, _| vec![Some(g.clone().reshape(s).expect("reshape volume"))])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_routes_gradients_back_to_parts() {
        let g = Graph::<f64>::new();
        let a = g.leaf(Tensor::full(Shape::new(1, 2, 2, 2), 1.0));
        let b = g.leaf(Tensor::full(Shape::new(1, 1, 2, 2), 2.0));
        let w = g.constant(Tensor::from_fn(Shape::new(1, 3, 2, 2), |_, c, _, _| (c + 1) as f64));
        let y = (g.cat_channels(&[a, b]) * w).sum();
        let grads = g.backward(y);
        assert_eq!(grads.get(a).unwrap().plane(0, 1), &[2.0; 4]);
        assert_eq!(grads.get(b).unwrap().plane(0, 0), &[3.0; 4]);
    }

    #[test]
    fn narrow_batch_gradient_is_zero_elsewhere() {
        let g = Graph::<f64>::new();
        let x = g.leaf(Tensor::full(Shape::new(3, 1, 1, 2), 1.0));
        let grads = g.backward(x.narrow_batch(1, 1).sum());
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    }
}
