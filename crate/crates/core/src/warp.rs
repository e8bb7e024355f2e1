//! Backward warping with precomputed flow, and flow confidence masks.
//!
//! Output pixel `(x, y)` samples the source image bilinearly at
//! `(x + dx, y + dy)` in pixel-index coordinates. Taps that fall outside the
//! image contribute zero.

use std::cell::Cell;

use hytex_tensor::{Graph, Real, Shape, Tensor, Var};

use crate::error::{Error, Result};

/// Dense backward flow, `1 x 2 x H x W` (channel 0 = dx, channel 1 = dy).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField(pub Tensor<f32>);

/// Per-pixel flow credibility `c_k`, `1 x 1 x H x W`, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMask(pub Tensor<f32>);

impl FlowField {
    pub fn zeros(h: usize, w: usize) -> Self {
        FlowField(Tensor::zeros(Shape::new(1, 2, h, w)))
    }

    pub fn constant(h: usize, w: usize, dx: f32, dy: f32) -> Self {
        FlowField(Tensor::from_fn(Shape::new(1, 2, h, w), |_, c, _, _| if c == 0 { dx } else { dy }))
    }

    pub fn height(&self) -> usize {
        self.0.shape().h
    }

    pub fn width(&self) -> usize {
        self.0.shape().w
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.0.shape();
        if s.n != 1 || s.c != 2 {
            return Err(Error::shape("flow", format!("expected 1x2xHxW, got {s}")));
        }
        if !self.0.all_finite() {
            return Err(Error::Data("flow field contains non-finite values".into()));
        }
        Ok(())
    }
}

impl ConfidenceMask {
    pub fn ones(h: usize, w: usize) -> Self {
        ConfidenceMask(Tensor::ones(Shape::new(1, 1, h, w)))
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        ConfidenceMask(Tensor::zeros(Shape::new(1, 1, h, w)))
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.0.shape();
        if s.n != 1 || s.c != 1 {
            return Err(Error::shape("confidence", format!("expected 1x1xHxW, got {s}")));
        }
        if self.0.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("confidence outside [0, 1]".into()));
        }
        Ok(())
    }
}

thread_local! {
    static WARP_CALLS: Cell<usize> = const { Cell::new(0) };
}

/// Number of warps executed on this thread since the last reset.
pub fn warp_invocations() -> usize {
    WARP_CALLS.with(Cell::get)
}

pub fn reset_warp_invocations() {
    WARP_CALLS.with(|c| c.set(0));
}

/// Bilinear taps `(source offset within a plane, weight)` per output pixel.
struct Taps<F> {
    taps: Vec<[(usize, F); 4]>,
}

fn taps<F: Real>(flow: &FlowField) -> Taps<F> {
    let (h, w) = (flow.height(), flow.width());
    let mut taps = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let sx = x as f64 + flow.0.at(0, 0, y, x) as f64;
            let sy = y as f64 + flow.0.at(0, 1, y, x) as f64;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let mut t = [(0usize, F::zero()); 4];
            let corners = [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x0 + 1, y0, fx * (1.0 - fy)), (x0, y0 + 1, (1.0 - fx) * fy), (x0 + 1, y0 + 1, fx * fy)];
            for (slot, (cx, cy, wgt)) in t.iter_mut().zip(corners) {
                if wgt != 0.0 && cx >= 0 && cy >= 0 && (cx as usize) < w && (cy as usize) < h {
                    *slot = (cy as usize * w + cx as usize, F::lit(wgt));
                }
            }
            taps.push(t);
        }
    }
    Taps { taps }
}

fn check(image: Shape, flow: &FlowField) -> Result<()> {
    flow.validate()?;
    if image.h != flow.height() || image.w != flow.width() {
        return Err(Error::shape("warp", format!("image {image} vs flow {}", flow.0.shape())));
    }
    Ok(())
}

fn apply<F: Real>(image: &Tensor<F>, taps: &Taps<F>) -> Tensor<F> {
    let s = image.shape();
    let mut out = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let src = image.plane(n, c);
            for (o, t) in out.plane_mut(n, c).iter_mut().zip(&taps.taps) {
                let mut acc = F::zero();
                for &(i, wgt) in t {
                    if wgt != F::zero() {
                        acc += src[i] * wgt;
                    }
                }
                *o = acc;
            }
        }
    }
    out
}

fn scatter<F: Real>(grad: &Tensor<F>, taps: &Taps<F>) -> Tensor<F> {
    let s = grad.shape();
    let mut dx = Tensor::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let g = grad.plane(n, c);
            let dst = dx.plane_mut(n, c);
            for (&gv, t) in g.iter().zip(&taps.taps) {
                for &(i, wgt) in t {
                    if wgt != F::zero() {
                        dst[i] += gv * wgt;
                    }
                }
            }
        }
    }
    dx
}

/// Warp every channel of `image` (`N x C x H x W`) with `flow`.
pub fn warp<F: Real>(image: &Tensor<F>, flow: &FlowField) -> Result<Tensor<F>> {
    check(image.shape(), flow)?;
    WARP_CALLS.with(|c| c.set(c.get() + 1));
    Ok(apply(image, &taps(flow)))
}

/// Differentiable [`warp`]; gradients flow to the image only.
pub fn warp_var<'g, F: Real>(graph: &'g Graph<F>, image: Var<'g, F>, flow: &FlowField) -> Result<Var<'g, F>> {
    check(image.shape(), flow)?;
    WARP_CALLS.with(|c| c.set(c.get() + 1));
    let taps = taps::<F>(flow);
    let out = apply(&image.value(), &taps);
    Ok(graph.custom(&[image], out, move |g, _| vec![Some(scatter(g, &taps))]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hytex_tensor::check_gradients;
    use rand::SeedableRng;

    fn ramp(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| (c * 100 + y * 10 + x) as f64 / 137.0)
    }

    #[test]
    fn zero_flow_is_bit_exact_identity() {
        let img = ramp(7, 9);
        assert_eq!(warp(&img, &FlowField::zeros(7, 9)).unwrap(), img);
    }

    #[test]
    fn integer_flow_shifts_interior() {
        let img = ramp(8, 10);
        let out = warp(&img, &FlowField::constant(8, 10, -2.0, 0.0)).unwrap();
        for c in 0..3 {
            for y in 0..8 {
                for x in 2..10 {
                    assert_eq!(out.at(0, c, y, x), img.at(0, c, y, x - 2));
                }
                for x in 0..2 {
                    assert_eq!(out.at(0, c, y, x), 0.0);
                }
            }
        }
    }

    #[test]
    fn half_pixel_flow_averages_neighbours() {
        let img = ramp(4, 4);
        let out = warp(&img, &FlowField::constant(4, 4, 0.5, 0.0)).unwrap();
        assert!((out.at(0, 0, 1, 1) - 0.5 * (img.at(0, 0, 1, 1) + img.at(0, 0, 1, 2))).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_sizes() {
        assert!(matches!(warp(&ramp(4, 4), &FlowField::zeros(4, 5)), Err(Error::Shape { .. })));
    }

    #[test]
    fn linear_in_image() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = Tensor::<f64>::uniform(Shape::new(1, 2, 6, 6), -1.0, 1.0, &mut rng);
        let v = Tensor::<f64>::uniform(Shape::new(1, 2, 6, 6), -1.0, 1.0, &mut rng);
        let flow = FlowField(Tensor::uniform(Shape::new(1, 2, 6, 6), -2.0, 2.0, &mut rng));
        let (a, b) = (0.7, -1.3);
        let lhs = warp(&u.zip_map(&v, |x, y| a * x + b * y), &flow).unwrap();
        let wu = warp(&u, &flow).unwrap();
        let wv = warp(&v, &flow).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs.data()[i] - (a * wu.data()[i] + b * wv.data()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let img = Tensor::<f64>::uniform(Shape::new(1, 2, 6, 6), -1.0, 1.0, &mut rng);
            let flow = FlowField(Tensor::uniform(Shape::new(1, 2, 6, 6), -2.5, 2.5, &mut rng));
            let weights = Tensor::<f64>::uniform(Shape::new(1, 2, 6, 6), -1.0, 1.0, &mut rng);
            let r = check_gradients(&[img], 1e-6, None, |g, v| {
                (warp_var(g, v[0], &flow).unwrap() * g.constant(weights.clone())).square().sum()
            });
            assert!(r[0].relative_error < 1e-4, "{:?}", r[0]);
        }
    }

    #[test]
    fn invocation_counter_counts_both_paths() {
        reset_warp_invocations();
        let img = ramp(4, 4);
        let flow = FlowField::zeros(4, 4);
        warp(&img, &flow).unwrap();
        let g = Graph::new();
        warp_var(&g, g.constant(img), &flow).unwrap();
        assert_eq!(warp_invocations(), 2);
    }
}
