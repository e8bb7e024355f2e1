//! Learnable background plate and foreground/background composition.

use std::path::Path;

use hytex_tensor::{ParamId, ParamStore, Real, Shape, Tensor, Var};

use crate::error::{Error, Result};
use crate::fill::diffusion_fill;
use crate::Image;

const FILL_SMOOTHING: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundImage<F: Real = f32> {
    params: ParamStore<F>,
    id: ParamId,
}

impl<F: Real> BackgroundImage<F> {
    pub fn from_image(values: Tensor<F>) -> Result<Self> {
        let s = values.shape();
        if s.n != 1 || s.c != 3 {
            return Err(Error::shape("background", format!("expected 1x3xHxW, got {s}")));
        }
        let mut params = ParamStore::new();
        let id = params.add("values", values);
        Ok(BackgroundImage { params, id })
    }

    pub fn values(&self) -> &Tensor<F> {
        self.params.get(self.id)
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn param_id(&self) -> ParamId {
        self.id
    }

    /// Project back onto `[0, 1]`; called after every optimizer step.
    pub fn clamp(&mut self) {
        for v in self.params.get_mut(self.id).data_mut() {
            *v = v.max(F::zero()).min(F::one());
        }
    }

    pub fn to_image(&self) -> Image {
        self.values().cast()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        crate::io::save_png(path, &self.to_image())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Self::from_image(crate::io::load_png(path)?.cast())
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundInit {
    pub background: BackgroundImage<f32>,
    /// Pixels never observed as background, filled by diffusion.
    pub filled_pixels: usize,
    /// True when no pixel was ever background and the global mean was used.
    pub fell_back: bool,
}

/// Per-pixel mean over the frames where the pixel is background (`mask` false),
/// with never-seen pixels filled from their neighbours.
pub fn init_background(frames: &[&Image], fg_masks: &[Vec<bool>]) -> Result<BackgroundInit> {
    let first = frames.first().ok_or_else(|| Error::Data("background initialization needs frames".into()))?;
    let s = first.shape();
    if frames.len() != fg_masks.len() {
        return Err(Error::shape("init_background", format!("{} frames vs {} masks", frames.len(), fg_masks.len())));
    }
    let plane = s.h * s.w;
    let mut sums = vec![0.0f64; 3 * plane];
    let mut counts = vec![0u32; plane];
    let mut global = [0.0f64; 3];
    for (k, (f, m)) in frames.iter().zip(fg_masks).enumerate() {
        if f.shape() != s || m.len() != plane {
            return Err(Error::shape("init_background", format!("frame {k} is {} with a {}-pixel mask", f.shape(), m.len())));
        }
        for i in 0..plane {
            for (c, g) in global.iter_mut().enumerate() {
                *g += f.plane(0, c)[i] as f64;
            }
            if !m[i] {
                counts[i] += 1;
                for c in 0..3 {
                    sums[c * plane + i] += f.plane(0, c)[i] as f64;
                }
            }
        }
    }
    let known: Vec<bool> = counts.iter().map(|&k| k > 0).collect();
    for i in 0..plane {
        if counts[i] > 0 {
            for c in 0..3 {
                sums[c * plane + i] /= counts[i] as f64;
            }
        }
    }
    let filled_pixels = known.iter().filter(|&&k| !k).count();
    let fell_back = !diffusion_fill(&mut sums, 3, s.h, s.w, &known, FILL_SMOOTHING);
    if fell_back {
        log::warn!("no pixel is ever background; initializing the background to the global mean colour");
        let denom = (frames.len() * plane) as f64;
        for c in 0..3 {
            sums[c * plane..(c + 1) * plane].fill(global[c] / denom);
        }
    }
    let img = Tensor::from_vec(Shape::new(1, 3, s.h, s.w), sums.into_iter().map(|v| v as f32).collect()).unwrap();
    Ok(BackgroundInit { background: BackgroundImage::from_image(img)?, filled_pixels, fell_back })
}

fn check_composite(fg: Shape, bg: Shape, p0: Shape) -> Result<()> {
    let ok = fg.c == 3 && p0.c == 1 && bg.c == 3 && fg.h == bg.h && fg.w == bg.w && p0.h == fg.h && p0.w == fg.w && p0.n == fg.n && (bg.n == fg.n || bg.n == 1);
    if !ok {
        return Err(Error::shape("composite", format!("foreground {fg}, background {bg}, background probability {p0}")));
    }
    Ok(())
}

/// `fg * (1 - p0) + bg * p0`; `bg` may be a single image shared by the batch.
pub fn composite<'g, F: Real>(fg: Var<'g, F>, bg: Var<'g, F>, p0: Var<'g, F>) -> Result<Var<'g, F>> {
    check_composite(fg.shape(), bg.shape(), p0.shape())?;
    Ok(fg * p0.one_minus() + bg * p0)
}

/// [`composite`] applied to the static (colour-only) foreground.
pub fn composite_static<'g, F: Real>(static_fg: Var<'g, F>, bg: Var<'g, F>, p0: Var<'g, F>) -> Result<Var<'g, F>> {
    composite(static_fg, bg, p0)
}

/// Tensor-level composition for inference.
pub fn composite_values<F: Real>(fg: &Tensor<F>, bg: &Tensor<F>, p0: &Tensor<F>) -> Result<Tensor<F>> {
    let (fs, bs, ps) = (fg.shape(), bg.shape(), p0.shape());
    check_composite(fs, bs, ps)?;
    Ok(Tensor::from_fn(fs, |n, c, y, x| {
        let p = p0.at(n, 0, y, x);
        let b = bg.at(if bs.n == 1 { 0 } else { n }, c, y, x);
        fg.at(n, c, y, x) * (F::one() - p) + b * p
    }))
}
