use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use crate::graph::Var;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

/// Materialize `t` at the (larger) broadcast shape `to`.
pub(crate) fn broadcast_to<F: Real>(t: &Tensor<F>, to: Shape) -> Tensor<F> {
    let s = t.shape();
    if s == to {
        return t.clone();
    }
    let sd = s.dims();
    let st = s.strides();
    let eff: [usize; 4] = std::array::from_fn(|i| if sd[i] == 1 { 0 } else { st[i] });
    let src = t.data();
    let mut data = Vec::with_capacity(to.numel());
    for n in 0..to.n {
        for c in 0..to.c {
            for h in 0..to.h {
                let base = n * eff[0] + c * eff[1] + h * eff[2];
                if eff[3] == 0 {
                    data.extend(std::iter::repeat(src[base]).take(to.w));
                } else {
                    data.extend_from_slice(&src[base..base + to.w]);
                }
            }
        }
    }
    Tensor::from_vec(to, data).expect("broadcast volume")
}

fn binary_values<F: Real>(a: &Tensor<F>, b: &Tensor<F>, op: &'static str, f: impl Fn(F, F) -> F) -> Tensor<F> {
    let out = Shape::broadcast(a.shape(), b.shape())
        .unwrap_or_else(|| panic!("{op}: cannot broadcast {:?} with {:?}", a.shape(), b.shape()));
    if a.shape() == out && b.shape() == out {
        return a.zip_map(b, f);
    }
    let a = broadcast_to(a, out);
    let b = broadcast_to(b, out);
    a.zip_map(&b, f)
}

impl<'g, F: Real> Var<'g, F> {
    fn unary(self, f: impl Fn(F) -> F, df: impl Fn(F, F) -> F + 'static) -> Var<'g, F> {
        let x = self.value();
        let y = Rc::new(x.map(f));
        let y_keep = y.clone();
        self.graph().custom(&[self], (*y).clone(), move |g, _| {
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .zip(y_keep.data())
                .map(|((&g, &x), &y)| g * df(x, y))
                .collect();
            vec![Some(Tensor::from_vec(g.shape(), data).unwrap())]
        })
    }

    pub fn add_var(self, other: Var<'g, F>) -> Var<'g, F> {
        let (a, b) = (self.value(), other.value());
        let (sa, sb) = (a.shape(), b.shape());
        let out = binary_values(&a, &b, "add", |x, y| x + y);
        self.graph().custom(&[self, other], out, move |g, need| {
            vec![need[0].then(|| g.reduce_to(sa)), need[1].then(|| g.reduce_to(sb))]
        })
    }

    pub fn sub_var(self, other: Var<'g, F>) -> Var<'g, F> {
        let (a, b) = (self.value(), other.value());
        let (sa, sb) = (a.shape(), b.shape());
        let out = binary_values(&a, &b, "sub", |x, y| x - y);
        self.graph().custom(&[self, other], out, move |g, need| {
            vec![need[0].then(|| g.reduce_to(sa)), need[1].then(|| g.map(|v| -v).reduce_to(sb))]
        })
    }

    pub fn mul_var(self, other: Var<'g, F>) -> Var<'g, F> {
        let (a, b) = (self.value(), other.value());
        let out = binary_values(&a, &b, "mul", |x, y| x * y);
        self.graph().custom(&[self, other], out, move |g, need| {
            let os = g.shape();
            let da = need[0].then(|| g.zip_map(&broadcast_to(&b, os), |g, y| g * y).reduce_to(a.shape()));
            let db = need[1].then(|| g.zip_map(&broadcast_to(&a, os), |g, x| g * x).reduce_to(b.shape()));
            vec![da, db]
        })
    }

    pub fn scale(self, k: f64) -> Var<'g, F> {
        let k = F::lit(k);
        self.unary(move |x| x * k, move |_, _| k)
    }

    pub fn add_scalar(self, k: f64) -> Var<'g, F> {
        let k = F::lit(k);
        self.unary(move |x| x + k, |_, _| F::one())
    }

    /// `1 - x`
    pub fn one_minus(self) -> Var<'g, F> {
        self.unary(|x| F::one() - x, |_, _| -F::one())
    }

    pub fn relu(self) -> Var<'g, F> {
        self.unary(|x| x.max(F::zero()), |x, _| if x > F::zero() { F::one() } else { F::zero() })
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'g, F> {
        let s = F::lit(slope);
        self.unary(move |x| if x > F::zero() { x } else { x * s }, move |x, _| if x > F::zero() { F::one() } else { s })
    }

    pub fn sigmoid(self) -> Var<'g, F> {
        self.unary(sigmoid, |_, y| y * (F::one() - y))
    }

    pub fn tanh(self) -> Var<'g, F> {
        self.unary(|x| x.tanh(), |_, y| F::one() - y * y)
    }

    pub fn exp(self) -> Var<'g, F> {
        self.unary(|x| x.exp(), |_, y| y)
    }

    pub fn ln(self) -> Var<'g, F> {
        self.unary(|x| x.ln(), |x, _| F::one() / x)
    }

    pub fn abs(self) -> Var<'g, F> {
        self.unary(
            |x| x.abs(),
            |x, _| {
                if x > F::zero() {
                    F::one()
                } else if x < F::zero() {
                    -F::one()
                } else {
                    F::zero()
                }
            },
        )
    }

    pub fn square(self) -> Var<'g, F> {
        self.unary(|x| x * x, |x, _| x + x)
    }

    /// Square root; the gradient at exactly zero is taken as zero.
    pub fn sqrt(self) -> Var<'g, F> {
        self.unary(
            |x| x.sqrt(),
            |_, y| if y > F::zero() { F::one() / (y + y) } else { F::zero() },
        )
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(self) -> Var<'g, F> {
        self.unary(softplus, |x, _| sigmoid(x))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(self) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        self.graph().custom(&[self], Tensor::scalar(x.sum()), move |g, _| vec![Some(Tensor::full(s, g.item()))])
    }

    /// Mean of all elements as a scalar.
    pub fn mean(self) -> Var<'g, F> {
        let n = self.shape().numel() as f64;
        self.sum().scale(1.0 / n)
    }
}

pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

pub(crate) fn softplus<F: Real>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl<'g, F: Real> Add for Var<'g, F> {
    type Output = Var<'g, F>;
    fn add(self, rhs: Self) -> Self::Output {
        self.add_var(rhs)
    }
}

impl<'g, F: Real> Sub for Var<'g, F> {
    type Output = Var<'g, F>;
    fn sub(self, rhs: Self) -> Self::Output {
        self.sub_var(rhs)
    }
}

impl<'g, F: Real> Mul for Var<'g, F> {
    type Output = Var<'g, F>;
    fn mul(self, rhs: Self) -> Self::Output {
        self.mul_var(rhs)
    }
}

impl<'g, F: Real> Neg for Var<'g, F> {
    type Output = Var<'g, F>;
    fn neg(self) -> Self::Output {
        self.scale(-1.0)
    }
}
