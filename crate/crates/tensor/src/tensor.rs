use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, TensorError};
use crate::real::Real;

/// Four-dimensional `N x C x H x W` extent.
///
/// Scalars are `1x1x1x1`; per-channel vectors are `1xCx1x1`; convolution
/// kernels are `Cout x Cin x Kh x Kw`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { n: 1, c: 1, h: 1, w: 1 };

    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub const fn from_dims(d: [usize; 4]) -> Self {
        Shape { n: d[0], c: d[1], h: d[2], w: d[3] }
    }

    /// Row-major element strides.
    pub const fn strides(&self) -> [usize; 4] {
        [self.c * self.h * self.w, self.h * self.w, self.w, 1]
    }

    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Broadcast two shapes: each dimension must match or be 1 on one side.
    pub fn broadcast(a: Shape, b: Shape) -> Option<Shape> {
        let (da, db) = (a.dims(), b.dims());
        let mut out = [0; 4];
        for i in 0..4 {
            out[i] = if da[i] == db[i] {
                da[i]
            } else if da[i] == 1 {
                db[i]
            } else if db[i] == 1 {
                da[i]
            } else {
                return None;
            };
        }
        Some(Shape::from_dims(out))
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.n, self.c, self.h, self.w)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Dense row-major NCHW array.
#[derive(Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Shape,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, F::zero())
    }

    pub fn ones(shape: Shape) -> Self {
        Self::full(shape, F::one())
    }

    pub fn full(shape: Shape, value: F) -> Self {
        Tensor { shape, data: vec![value; shape.numel()] }
    }

    pub fn scalar(value: F) -> Self {
        Self::full(Shape::SCALAR, value)
    }

    pub fn from_vec(shape: Shape, data: Vec<F>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(TensorError::Length { expected: shape.numel(), got: data.len() });
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(shape.numel());
        for n in 0..shape.n {
            for c in 0..shape.c {
                for h in 0..shape.h {
                    for w in 0..shape.w {
                        data.push(f(n, c, h, w));
                    }
                }
            }
        }
        Tensor { shape, data }
    }

    pub fn uniform<R: Rng + ?Sized>(shape: Shape, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..shape.numel()).map(|_| F::lit(rng.gen_range(lo..hi))).collect();
        Tensor { shape, data }
    }

    pub fn normal<R: Rng + ?Sized>(shape: Shape, std: f64, rng: &mut R) -> Self {
        let data = (0..shape.numel())
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                F::lit(z * std)
            })
            .collect();
        Tensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> F {
        self.data[self.offset(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: F) {
        let o = self.offset(n, c, h, w);
        self.data[o] = v;
    }

    /// Contiguous `H x W` plane for batch item `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[F] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [F] {
        let p = self.shape.plane();
        let start = (n * self.shape.c + c) * p;
        &mut self.data[start..start + p]
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.shape.numel() {
            return Err(TensorError::Length { expected: shape.numel(), got: self.data.len() });
        }
        Ok(Tensor { shape, data: self.data })
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor { shape: self.shape, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(F, F) -> F) -> Self {
        assert_eq!(self.shape, other.shape, "zip_map shape mismatch");
        Tensor {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, k: F) -> Self {
        self.map(|x| x * k)
    }

    pub fn sum(&self) -> F {
        // fixed left-to-right order keeps reductions reproducible
        let mut acc = F::zero();
        for &x in &self.data {
            acc += x;
        }
        acc
    }

    pub fn mean(&self) -> F {
        self.sum() / F::from_usize(self.len()).unwrap()
    }

    pub fn max_abs(&self) -> F {
        self.data.iter().fold(F::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn min(&self) -> F {
        self.data.iter().fold(F::infinity(), |m, &x| m.min(x))
    }

    pub fn max(&self) -> F {
        self.data.iter().fold(F::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn item(&self) -> F {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor {:?}", self.shape);
        self.data[0]
    }

    /// Elementwise conversion to another precision.
    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| G::from_f64(x.as_f64()).unwrap()).collect(),
        }
    }

    /// Copy of channels `start..start + len`.
    pub fn narrow_channels(&self, start: usize, len: usize) -> Self {
        let s = self.shape;
        assert!(start + len <= s.c, "channel range out of bounds");
        let out_shape = Shape::new(s.n, len, s.h, s.w);
        let p = s.plane();
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..s.n {
            let base = (n * s.c + start) * p;
            data.extend_from_slice(&self.data[base..base + len * p]);
        }
        Tensor { shape: out_shape, data }
    }

    /// Copy of batch items `start..start + len`.
    pub fn narrow_batch(&self, start: usize, len: usize) -> Self {
        let s = self.shape;
        assert!(start + len <= s.n, "batch range out of bounds");
        let item = s.c * s.plane();
        Tensor {
            shape: Shape::new(len, s.c, s.h, s.w),
            data: self.data[start * item..(start + len) * item].to_vec(),
        }
    }

    /// Concatenate along the channel axis.
    pub fn cat_channels(parts: &[&Tensor<F>]) -> Result<Self> {
        let first = parts.first().ok_or(TensorError::Empty)?.shape;
        let mut c_total = 0;
        for t in parts {
            let s = t.shape;
            if s.n != first.n || s.h != first.h || s.w != first.w {
                return Err(TensorError::Shape {
                    op: "cat_channels",
                    lhs: first,
                    rhs: s,
                });
            }
            c_total += s.c;
        }
        let out_shape = Shape::new(first.n, c_total, first.h, first.w);
        let p = first.plane();
        let mut data = Vec::with_capacity(out_shape.numel());
        for n in 0..first.n {
            for t in parts {
                let item = t.shape.c * p;
                data.extend_from_slice(&t.data[n * item..(n + 1) * item]);
            }
        }
        Ok(Tensor { shape: out_shape, data })
    }

    /// Concatenate along the batch axis.
    pub fn cat_batch(parts: &[&Tensor<F>]) -> Result<Self> {
        let first = parts.first().ok_or(TensorError::Empty)?.shape;
        let mut n_total = 0;
        let mut data = Vec::new();
        for t in parts {
            let s = t.shape;
            if s.c != first.c || s.h != first.h || s.w != first.w {
                return Err(TensorError::Shape { op: "cat_batch", lhs: first, rhs: s });
            }
            n_total += s.n;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor { shape: Shape::new(n_total, first.c, first.h, first.w), data })
    }

    /// Sum over broadcast dimensions so that the result has `target` shape.
    pub fn reduce_to(&self, target: Shape) -> Self {
        if self.shape == target {
            return self.clone();
        }
        let s = self.shape.dims();
        let t = target.dims();
        for i in 0..4 {
            assert!(t[i] == s[i] || t[i] == 1, "cannot reduce {:?} to {:?}", self.shape, target);
        }
        let ts = target.strides();
        let eff = [
            if t[0] == 1 { 0 } else { ts[0] },
            if t[1] == 1 { 0 } else { ts[1] },
            if t[2] == 1 { 0 } else { ts[2] },
            if t[3] == 1 { 0 } else { ts[3] },
        ];
        let mut out = Tensor::zeros(target);
        let mut i = 0;
        for n in 0..s[0] {
            for c in 0..s[1] {
                for h in 0..s[2] {
                    let base = n * eff[0] + c * eff[1] + h * eff[2];
                    for w in 0..s[3] {
                        out.data[base + w * eff[3]] += self.data[i];
                        i += 1;
                    }
                }
            }
        }
        out
    }
}

impl<F: fmt::Debug> fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}
