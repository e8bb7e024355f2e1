//! Differentiable texture lookup and probability-weighted part blending.
//!
//! Texel addressing: coordinate `u = 0` lands on the centre of column 0 and
//! `u = 1` on the centre of column `R - 1`; `v` indexes rows the same way.
//! Coordinates outside `[0, 1]` are clamped and counted.

use std::cell::Cell;

use hytex_tensor::{Graph, Real, Shape, Tensor, Var};

use crate::error::{Error, Result};
use crate::texture::COLOR_CHANNELS;

thread_local! {
    static CLAMPED: Cell<u64> = const { Cell::new(0) };
}

/// Number of out-of-range coordinates clamped on this thread since the last reset.
pub fn clamped_lookups() -> u64 {
    CLAMPED.with(Cell::get)
}

pub fn reset_clamped_lookups() {
    CLAMPED.with(|c| c.set(0));
}

/// Bilinear footprint of one lookup.
#[derive(Clone, Copy)]
struct Footprint<F> {
    x0: usize,
    y0: usize,
    fx: F,
    fy: F,
    u_free: bool,
    v_free: bool,
}

fn footprint<F: Real>(u: F, v: F, r: usize, clamped: &mut u64) -> Footprint<F> {
    let axis = |c: F, clamped: &mut u64| {
        let inside = c >= F::zero() && c <= F::one();
        if !inside {
            *clamped += 1;
        }
        let c = if c.is_nan() { F::zero() } else { c.max(F::zero()).min(F::one()) };
        let p = c * F::lit((r - 1) as f64);
        let i = p.floor().to_usize().unwrap_or(0).min(r - 2);
        (i, p - F::lit(i as f64), inside)
    };
    let (x0, fx, u_free) = axis(u, clamped);
    let (y0, fy, v_free) = axis(v, clamped);
    Footprint { x0, y0, fx, fy, u_free, v_free }
}

fn check_sample_shapes(tex: Shape, coords: Shape) -> Result<()> {
    if tex.n != 1 || tex.h != tex.w || tex.h < 2 {
        return Err(Error::shape("sample_part", format!("texture part must be 1xCxRxR with R >= 2, got {tex}")));
    }
    if coords.c != 2 {
        return Err(Error::shape("sample_part", format!("coordinates must have 2 channels, got {coords}")));
    }
    Ok(())
}

/// Tensor-level bilinear lookup of `texture` (`1 x C x R x R`) at `coords` (`B x 2 x H x W`).
pub fn sample_part_values<F: Real>(texture: &Tensor<F>, coords: &Tensor<F>) -> Result<Tensor<F>> {
    check_sample_shapes(texture.shape(), coords.shape())?;
    Ok(sample_forward(texture, coords))
}

fn sample_forward<F: Real>(texture: &Tensor<F>, coords: &Tensor<F>) -> Tensor<F> {
    let ts = texture.shape();
    let cs = coords.shape();
    let r = ts.h;
    let mut out = Tensor::zeros(Shape::new(cs.n, ts.c, cs.h, cs.w));
    let mut clamped = 0;
    let plane = cs.h * cs.w;
    for b in 0..cs.n {
        let (us, vs) = (coords.plane(b, 0), coords.plane(b, 1));
        let fps: Vec<Footprint<F>> = (0..plane).map(|i| footprint(us[i], vs[i], r, &mut clamped)).collect();
        for c in 0..ts.c {
            let t = texture.plane(0, c);
            let o = out.plane_mut(b, c);
            for (i, fp) in fps.iter().enumerate() {
                let base = fp.y0 * r + fp.x0;
                let (t00, t01, t10, t11) = (t[base], t[base + 1], t[base + r], t[base + r + 1]);
                let top = t00 + (t01 - t00) * fp.fx;
                let bottom = t10 + (t11 - t10) * fp.fx;
                o[i] = top + (bottom - top) * fp.fy;
            }
        }
    }
    CLAMPED.with(|c| c.set(c.get() + clamped));
    out
}

/// Map one texture part (`1 x C x R x R`) to screen space through per-pixel
/// coordinates (`B x 2 x H x W`, channel 0 = u, 1 = v). Differentiable in both.
pub fn sample_part<'g, F: Real>(graph: &'g Graph<F>, texture: Var<'g, F>, coords: Var<'g, F>) -> Result<Var<'g, F>> {
    check_sample_shapes(texture.shape(), coords.shape())?;
    let (tv, cv) = (texture.value(), coords.value());
    let out = sample_forward(&tv, &cv);
    Ok(graph.custom(&[texture, coords], out, move |g, needs| {
        let ts = tv.shape();
        let cs = cv.shape();
        let r = ts.h;
        let scale = F::lit((r - 1) as f64);
        let plane = cs.h * cs.w;
        let mut dt = needs[0].then(|| Tensor::zeros(ts));
        let mut dc = needs[1].then(|| Tensor::zeros(cs));
        let mut ignored = 0;
        for b in 0..cs.n {
            let (us, vs) = (cv.plane(b, 0), cv.plane(b, 1));
            let fps: Vec<Footprint<F>> = (0..plane).map(|i| footprint(us[i], vs[i], r, &mut ignored)).collect();
            let mut du = vec![F::zero(); plane];
            let mut dv = vec![F::zero(); plane];
            for c in 0..ts.c {
                let t = tv.plane(0, c);
                let gp = g.plane(b, c);
                for (i, fp) in fps.iter().enumerate() {
                    let gi = gp[i];
                    if gi == F::zero() {
                        continue;
                    }
                    let base = fp.y0 * r + fp.x0;
                    let (fx, fy) = (fp.fx, fp.fy);
                    let (one_x, one_y) = (F::one() - fx, F::one() - fy);
                    if let Some(dt) = dt.as_mut() {
                        let d = dt.plane_mut(0, c);
                        d[base] += gi * one_x * one_y;
                        d[base + 1] += gi * fx * one_y;
                        d[base + r] += gi * one_x * fy;
                        d[base + r + 1] += gi * fx * fy;
                    }
                    if dc.is_some() {
                        let (t00, t01, t10, t11) = (t[base], t[base + 1], t[base + r], t[base + r + 1]);
                        if fp.u_free {
                            du[i] += gi * (one_y * (t01 - t00) + fy * (t11 - t10)) * scale;
                        }
                        if fp.v_free {
                            dv[i] += gi * (one_x * (t10 - t00) + fx * (t11 - t01)) * scale;
                        }
                    }
                }
            }
            if let Some(dc) = dc.as_mut() {
                dc.plane_mut(b, 0).copy_from_slice(&du);
                dc.plane_mut(b, 1).copy_from_slice(&dv);
            }
        }
        vec![dt, dc]
    }))
}

/// `sum_{i=1..N} P_i * sample_i`; the background probability `P_0` is not used.
pub fn blend_parts<'g, F: Real>(probs: Var<'g, F>, samples: &[Var<'g, F>]) -> Result<Var<'g, F>> {
    let ps = probs.shape();
    if ps.c != samples.len() + 1 {
        return Err(Error::shape("blend_parts", format!("{} probability channels for {} parts", ps.c, samples.len())));
    }
    let first = samples.first().ok_or_else(|| Error::shape("blend_parts", "no parts"))?.shape();
    let mut acc: Option<Var<'g, F>> = None;
    for (i, &s) in samples.iter().enumerate() {
        let ss = s.shape();
        if ss != first || ss.n != ps.n || ss.h != ps.h || ss.w != ps.w {
            return Err(Error::shape("blend_parts", format!("part {} sample {ss} vs probabilities {ps}", i + 1)));
        }
        let term = probs.narrow_channels(i + 1, 1) * s;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.unwrap())
}

/// Map every part of `texture` (`N x C x R x R`) with `coords` (`B x 2N x H x W`)
/// and blend them with `probs` (`B x (N+1) x H x W`).
pub fn map_texture<'g, F: Real>(
    graph: &'g Graph<F>,
    texture: Var<'g, F>,
    probs: Var<'g, F>,
    coords: Var<'g, F>,
) -> Result<Var<'g, F>> {
    let n = texture.shape().n;
    if coords.shape().c != 2 * n {
        return Err(Error::shape("map_texture", format!("{} coordinate channels for {n} parts", coords.shape().c)));
    }
    let samples = (0..n)
        .map(|i| sample_part(graph, texture.narrow_batch(i, 1), coords.narrow_channels(2 * i, 2)))
        .collect::<Result<Vec<_>>>()?;
    blend_parts(probs, &samples)
}

/// Explicit colour channels of a mapped screen feature.
pub fn static_component<'g, F: Real>(feature: Var<'g, F>) -> Result<Var<'g, F>> {
    if feature.shape().c < COLOR_CHANNELS {
        return Err(Error::shape("static_component", format!("feature {} has fewer than 3 channels", feature.shape())));
    }
    Ok(feature.narrow_channels(0, COLOR_CHANNELS))
}
