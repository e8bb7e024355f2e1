//! 2-D convolution via im2col + GEMM, and nearest/average resampling.

use std::rc::Rc;

use crate::graph::Var;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: usize,
    pub padding: usize,
}

impl Conv2dSpec {
    pub fn output_hw(&self, h: usize, w: usize, kh: usize, kw: usize) -> (usize, usize) {
        assert!(h + 2 * self.padding >= kh && w + 2 * self.padding >= kw, "kernel larger than padded input");
        ((h + 2 * self.padding - kh) / self.stride + 1, (w + 2 * self.padding - kw) / self.stride + 1)
    }
}

struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    fn rows(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<F: Real>(x: &[F], g: &Geometry, col: &mut [F]) {
    let (ho, wo) = (g.ho, g.wo);
    for c in 0..g.cin {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * ho * wo..(row + 1) * ho * wo];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(F::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { F::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im<F: Real>(col: &[F], g: &Geometry, dx: &mut [F]) {
    let (ho, wo) = (g.ho, g.wo);
    for c in 0..g.cin {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &col[row * ho * wo..(row + 1) * ho * wo];
                for oy in 0..ho {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let line = &src[oy * wo..(oy + 1) * wo];
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, &v) in line.iter().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

impl<'g, F: Real> Var<'g, F> {
    /// Cross-correlation of `self` (`N x Cin x H x W`) with `weight`
    /// (`Cout x Cin x Kh x Kw`), plus an optional `1 x Cout x 1 x 1` bias.
    pub fn conv2d(self, weight: Var<'g, F>, bias: Option<Var<'g, F>>, spec: Conv2dSpec) -> Var<'g, F> {
        let x = self.value();
        let wt = weight.value();
        let (xs, ws) = (x.shape(), wt.shape());
        assert_eq!(xs.c, ws.c, "conv2d: input has {} channels, kernel expects {}", xs.c, ws.c);
        let (ho, wo) = spec.output_hw(xs.h, xs.w, ws.h, ws.w);
        let geo = Rc::new(Geometry {
            cin: xs.c,
            h: xs.h,
            w: xs.w,
            kh: ws.h,
            kw: ws.w,
            ho,
            wo,
            stride: spec.stride,
            pad: spec.padding,
        });
        let cout = ws.n;
        let (k, cols) = (geo.rows(), geo.cols());
        let out_shape = Shape::new(xs.n, cout, ho, wo);
        let mut out = Tensor::zeros(out_shape);
        let bias_val = bias.map(|b| {
            let b = b.value();
            assert_eq!(b.shape(), Shape::new(1, cout, 1, 1), "conv2d bias shape");
            b
        });

        let item_in = xs.c * xs.plane();
        let item_out = cout * ho * wo;
        let mut col_cache: Vec<Vec<F>> = Vec::new();
        for n in 0..xs.n {
            let xin = &x.data()[n * item_in..(n + 1) * item_in];
            let dst = &mut out.data_mut()[n * item_out..(n + 1) * item_out];
            if let Some(b) = &bias_val {
                for (co, chunk) in dst.chunks_mut(ho * wo).enumerate() {
                    chunk.fill(b.data()[co]);
                }
            }
            let beta = if bias_val.is_some() { F::one() } else { F::zero() };
            if geo.is_pointwise() {
                F::gemm(cout, k, cols, F::one(), wt.data(), (k as isize, 1), xin, (cols as isize, 1), beta, dst, (cols as isize, 1));
            } else {
                let mut col = vec![F::zero(); k * cols];
                im2col(xin, &geo, &mut col);
                F::gemm(cout, k, cols, F::one(), wt.data(), (k as isize, 1), &col, (cols as isize, 1), beta, dst, (cols as isize, 1));
                col_cache.push(col);
            }
        }

        let mut parents = vec![self, weight];
        if let Some(b) = bias {
            parents.push(b);
        }
        let has_bias = bias.is_some();
        self.graph().custom(&parents, out, move |gy, need| {
            let mut dx = need[0].then(|| Tensor::zeros(xs));
            let mut dw = need[1].then(|| Tensor::zeros(ws));
            for n in 0..xs.n {
                let gy_n = &gy.data()[n * item_out..(n + 1) * item_out];
                let col: &[F] = if geo.is_pointwise() { &x.data()[n * item_in..(n + 1) * item_in] } else { &col_cache[n] };
                if let Some(dw) = dw.as_mut() {
                    // dW += gy_n (cout x cols) @ col^T (cols x k)
                    F::gemm(cout, cols, k, F::one(), gy_n, (cols as isize, 1), col, (1, cols as isize), F::one(), dw.data_mut(), (k as isize, 1));
                }
                if let Some(dx) = dx.as_mut() {
                    let dxn = &mut dx.data_mut()[n * item_in..(n + 1) * item_in];
                    if geo.is_pointwise() {
                        F::gemm(k, cout, cols, F::one(), wt.data(), (1, k as isize), gy_n, (cols as isize, 1), F::zero(), dxn, (cols as isize, 1));
                    } else {
                        let mut dcol = vec![F::zero(); k * cols];
                        F::gemm(k, cout, cols, F::one(), wt.data(), (1, k as isize), gy_n, (cols as isize, 1), F::zero(), &mut dcol, (cols as isize, 1));
                        col2im(&dcol, &geo, dxn);
                    }
                }
            }
            let mut grads = vec![dx, dw];
            if has_bias {
                let db = need[2].then(|| {
                    let mut db = Tensor::zeros(Shape::new(1, cout, 1, 1));
                    for n in 0..xs.n {
                        for co in 0..cout {
                            let s: F = gy.plane(n, co).iter().copied().sum();
                            db.data_mut()[co] += s;
                        }
                    }
                    db
                });
                grads.push(db);
            }
            grads
        })
    }

    /// Nearest-neighbour upsampling by an integer factor.
    pub fn upsample_nearest(self, factor: usize) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        let os = Shape::new(s.n, s.c, s.h * factor, s.w * factor);
        let mut out = Tensor::zeros(os);
        for n in 0..s.n {
            for c in 0..s.c {
                let src = x.plane(n, c);
                let dst = out.plane_mut(n, c);
                for y in 0..os.h {
                    for xx in 0..os.w {
                        dst[y * os.w + xx] = src[(y / factor) * s.w + xx / factor];
                    }
                }
            }
        }
        self.graph().custom(&[self], out, move |g, _| {
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for c in 0..s.c {
                    let src = g.plane(n, c);
                    let dst = dx.plane_mut(n, c);
                    for y in 0..os.h {
                        for xx in 0..os.w {
                            dst[(y / factor) * s.w + xx / factor] += src[y * os.w + xx];
                        }
                    }
                }
            }
            vec![Some(dx)]
        })
    }

    /// Non-overlapping average pooling; `H` and `W` must be divisible by `factor`.
    pub fn avg_pool(self, factor: usize) -> Var<'g, F> {
        let x = self.value();
        let s = x.shape();
        assert!(s.h % factor == 0 && s.w % factor == 0, "avg_pool: {:?} not divisible by {factor}", s);
        let os = Shape::new(s.n, s.c, s.h / factor, s.w / factor);
        let inv = F::one() / F::from_usize(factor * factor).unwrap();
        let mut out = Tensor::zeros(os);
        for n in 0..s.n {
            for c in 0..s.c {
                let src = x.plane(n, c);
                let dst = out.plane_mut(n, c);
                for y in 0..s.h {
                    for xx in 0..s.w {
                        dst[(y / factor) * os.w + xx / factor] += src[y * s.w + xx] * inv;
                    }
                }
            }
        }
        self.graph().custom(&[self], out, move |g, _| {
            let mut dx = Tensor::zeros(s);
            for n in 0..s.n {
                for c in 0..s.c {
                    let src = g.plane(n, c);
                    let dst = dx.plane_mut(n, c);
                    for y in 0..s.h {
                        for xx in 0..s.w {
                            dst[y * s.w + xx] = src[(y / factor) * os.w + xx / factor] * inv;
                        }
                    }
                }
            }
            vec![Some(dx)]
        })
    }
}
