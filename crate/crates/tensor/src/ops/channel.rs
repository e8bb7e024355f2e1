//! Per-pixel operations across the channel axis, and instance normalization.

use std::rc::Rc;

use crate::graph::Var;
use crate::real::Real;
use crate::tensor::Tensor;

impl<'g, F: Real> Var<'g, F> {
    /// Softmax over channels at every `(n, h, w)`.
    pub fn softmax_channels(self) -> Var<'g, F> {
        let x = self.value();
        let y = Rc::new(softmax_values(&x));
        let yk = y.clone();
        self.graph().custom(&[self], (*y).clone(), move |g, _| {
            let s = g.shape();
            let p = s.plane();
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for i in 0..p {
                    let mut dot = F::zero();
                    for c in 0..s.c {
                        let o = (n * s.c + c) * p + i;
                        dot += g.data()[o] * yk.data()[o];
                    }
                    for c in 0..s.c {
                        let o = (n * s.c + c) * p + i;
                        dx.data_mut()[o] = yk.data()[o] * (g.data()[o] - dot);
                    }
                }
            }
            vec![Some(dx)]
        })
    }

    /// Log-softmax over channels at every `(n, h, w)`.
    pub fn log_softmax_channels(self) -> Var<'g, F> {
        let x = self.value();
        let soft = Rc::new(softmax_values(&x));
        let s = x.shape();
        let p = s.plane();
        let mut out = Tensor::zeros(s);
        for n in 0..s.n {
            for i in 0..p {
                let mut m = F::neg_infinity();
                for c in 0..s.c {
                    m = m.max(x.data()[(n * s.c + c) * p + i]);
                }
                let mut z = F::zero();
                for c in 0..s.c {
                    z += (x.data()[(n * s.c + c) * p + i] - m).exp();
                }
                let lz = m + z.ln();
                for c in 0..s.c {
                    let o = (n * s.c + c) * p + i;
                    out.data_mut()[o] = x.data()[o] - lz;
                }
            }
        }
        self.graph().custom(&[self], out, move |g, _| {
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for i in 0..p {
                    let mut total = F::zero();
                    for c in 0..s.c {
                        total += g.data()[(n * s.c + c) * p + i];
                    }
                    for c in 0..s.c {
                        let o = (n * s.c + c) * p + i;
                        dx.data_mut()[o] = g.data()[o] - soft.data()[o] * total;
                    }
                }
            }
            vec![Some(dx)]
        })
    }

    /// Normalize each `(n, c)` plane to zero mean and unit variance.
    pub fn instance_norm(self, eps: f64) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        let p = s.plane();
        let pf = F::from_usize(p).unwrap();
        let eps = F::lit(eps);
        let mut y = Tensor::zeros(s);
        let mut inv_std = Vec::with_capacity(s.n * s.c);
        for n in 0..s.n {
            for c in 0..s.c {
                let src = x.plane(n, c);
                let mean = src.iter().copied().sum::<F>() / pf;
                let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / pf;
                let is = F::one() / (var + eps).sqrt();
                inv_std.push(is);
                for (d, &v) in y.plane_mut(n, c).iter_mut().zip(src) {
                    *d = (v - mean) * is;
                }
            }
        }
        let y = Rc::new(y);
        let yk = y.clone();
        self.graph().custom(&[self], (*y).clone(), move |g, _| {
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for c in 0..s.c {
                    let gy = g.plane(n, c);
                    let yy = yk.plane(n, c);
                    let mg = gy.iter().copied().sum::<F>() / pf;
                    let mgy = gy.iter().zip(yy).map(|(&a, &b)| a * b).sum::<F>() / pf;
                    let is = inv_std[n * s.c + c];
                    for ((d, &a), &b) in dx.plane_mut(n, c).iter_mut().zip(gy).zip(yy) {
                        *d = is * (a - mg - b * mgy);
                    }
                }
            }
            vec![Some(dx)]
        })
    }
}

pub(crate) fn softmax_values<F: Real>(x: &Tensor<F>) -> Tensor<F> {
    let s = x.shape();
    let p = s.plane();
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for i in 0..p {
            let mut m = F::neg_infinity();
            for c in 0..s.c {
                m = m.max(x.data()[(n * s.c + c) * p + i]);
            }
            let mut z = F::zero();
            for c in 0..s.c {
                let o = (n * s.c + c) * p + i;
                let e = (x.data()[o] - m).exp();
                out.data_mut()[o] = e;
                z += e;
            }
            for c in 0..s.c {
                out.data_mut()[(n * s.c + c) * p + i] /= z;
            }
        }
    }
    out
}
