//! Learnable multi-part hybrid texture.
//!
//! Values are stored as an `N x 18 x R x R` tensor: part-major, then channel,
//! then texel row (v) and column (u). Channels 0-2 hold explicit colour, the
//! remaining 15 hold implicit detail codes decoded by the rendering network.

use std::path::{Path, PathBuf};

use hytex_tensor::{ParamId, ParamStore, Real, Shape, Tensor};

use crate::error::{Error, Result};
use crate::fill::diffusion_fill;
use crate::io::{put_f32s, write_bytes, Cursor};
use crate::scene::{texel_index, SyntheticSequence};
use crate::Image;

pub const TEXTURE_CHANNELS: usize = 18;
pub const COLOR_CHANNELS: usize = 3;
pub const TEXTURE_MAGIC: &[u8; 4] = b"HTX1";
const FILL_SMOOTHING: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridTexture<F: Real = f32> {
    params: ParamStore<F>,
    id: ParamId,
}

impl<F: Real> HybridTexture<F> {
    pub fn zeros(n_parts: usize, resolution: usize) -> Self {
        Self::from_values(Tensor::zeros(Shape::new(n_parts, TEXTURE_CHANNELS, resolution, resolution))).unwrap()
    }

    pub fn from_values(values: Tensor<F>) -> Result<Self> {
        let s = values.shape();
        if s.c != TEXTURE_CHANNELS || s.h != s.w || s.n == 0 || s.h < 2 {
            return Err(Error::shape("hybrid texture", format!("expected Nx{TEXTURE_CHANNELS}xRxR with R >= 2, got {s}")));
        }
        let mut params = ParamStore::new();
        let id = params.add("values", values);
        Ok(HybridTexture { params, id })
    }

    pub fn n_parts(&self) -> usize {
        self.values().shape().n
    }

    pub fn resolution(&self) -> usize {
        self.values().shape().h
    }

    pub fn values(&self) -> &Tensor<F> {
        self.params.get(self.id)
    }

    pub fn values_mut(&mut self) -> &mut Tensor<F> {
        self.params.get_mut(self.id)
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

    pub fn cast<G: Real>(&self) -> HybridTexture<G> {
        HybridTexture::from_values(self.values().cast()).unwrap()
    }

    /// Largest magnitude among the implicit channels.
    pub fn implicit_max_abs(&self) -> F {
        let t = self.values();
        let mut m = F::zero();
        for n in 0..self.n_parts() {
            for c in COLOR_CHANNELS..TEXTURE_CHANNELS {
                for &v in t.plane(n, c) {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    /// Colour channels of one part (0-based), clamped to `[0, 1]`.
    pub fn part_preview(&self, part: usize) -> Image {
        let r = self.resolution();
        let t = self.values();
        Tensor::from_fn(Shape::new(1, 3, r, r), |_, c, y, x| t.at(part, c, y, x).as_f64().clamp(0.0, 1.0) as f32)
    }

    /// Write `texture_part_%02d.png` for every part (numbered from 1, like part ids).
    pub fn export_previews(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        (0..self.n_parts())
            .map(|i| {
                let path = dir.join(format!("texture_part_{:02}.png", i + 1));
                crate::io::save_png(&path, &self.part_preview(i))?;
                Ok(path)
            })
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let t = self.values();
        let mut out = Vec::with_capacity(16 + 4 * t.len());
        out.extend_from_slice(TEXTURE_MAGIC);
        for d in [self.n_parts(), TEXTURE_CHANNELS, self.resolution()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        put_f32s(&mut out, t.data().iter().map(|v| v.as_f64() as f32));
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut cur = Cursor::new(bytes, path);
        cur.magic(TEXTURE_MAGIC)?;
        let (n, c, r) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
        if c != TEXTURE_CHANNELS {
            return Err(Error::format(path, format!("texture has {c} channels, expected {TEXTURE_CHANNELS}")));
        }
        if n == 0 || r < 2 {
            return Err(Error::format(path, format!("invalid texture dimensions {n} parts at {r}x{r}")));
        }
        let count = n.checked_mul(c * r).and_then(|v| v.checked_mul(r)).ok_or_else(|| Error::format(path, "size overflow"))?;
        let vals = cur.f32s(count)?;
        cur.finish()?;
        let values = Tensor::from_vec(Shape::new(n, c, r, r), vals.into_iter().map(|v| F::lit(v as f64)).collect())
            .expect("length checked");
        Self::from_values(values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?, path)
    }
}

/// Result of [`initialize_from_video`].
#[derive(Debug, Clone)]
pub struct TextureInit {
    pub texture: HybridTexture<f32>,
    /// Per part, whether each texel received at least one sample.
    pub covered: Vec<Vec<bool>>,
    /// Parts (0-based) with no samples; their colour is the global mean.
    pub uncovered_parts: Vec<usize>,
}

/// Average frame colours into texels through the ground-truth UV map, fill
/// uncovered texels by diffusion, and zero the implicit channels.
pub fn initialize_from_video(seq: &SyntheticSequence, resolution: usize) -> Result<TextureInit> {
    initialize_from_frames(seq, &(0..seq.len()).collect::<Vec<_>>(), resolution)
}

/// [`initialize_from_video`] restricted to the frames listed in `frames`.
pub fn initialize_from_frames(seq: &SyntheticSequence, frames: &[usize], resolution: usize) -> Result<TextureInit> {
    if frames.is_empty() {
        return Err(Error::Data("texture initialization needs at least one frame".into()));
    }
    if let Some(&bad) = frames.iter().find(|&&t| t >= seq.len()) {
        return Err(Error::Data(format!("frame {bad} is outside the {}-frame sequence", seq.len())));
    }
    if resolution < 2 {
        return Err(Error::config("texture_resolution", "must be at least 2"));
    }
    let n = seq.n_parts();
    let plane = resolution * resolution;
    let (h, w) = (seq.height(), seq.width());
    // running means, one RGB triple per texel
    let mut mean = vec![0.0f64; n * 3 * plane];
    let mut count = vec![0u32; n * plane];
    for &t in frames {
        let (frame, ids, uv) = (&seq.frames[t], &seq.part_id_gt[t], &seq.uv_gt[t]);
        for y in 0..h {
            for x in 0..w {
                let id = ids.at(x, y) as usize;
                if id == 0 {
                    continue;
                }
                let p = id - 1;
                let texel = texel_index(uv.at(0, 1, y, x), resolution) * resolution
                    + texel_index(uv.at(0, 0, y, x), resolution);
                let k = &mut count[p * plane + texel];
                *k += 1;
                for c in 0..3 {
                    let m = &mut mean[(p * 3 + c) * plane + texel];
                    *m += (frame.at(0, c, y, x) as f64 - *m) / *k as f64;
                }
            }
        }
    }

    let covered: Vec<Vec<bool>> = (0..n).map(|p| count[p * plane..(p + 1) * plane].iter().map(|&k| k > 0).collect()).collect();
    let mut global = [0.0f64; 3];
    let mut total = 0.0;
    for p in 0..n {
        for i in 0..plane {
            let k = count[p * plane + i] as f64;
            for (c, g) in global.iter_mut().enumerate() {
                *g += mean[(p * 3 + c) * plane + i] * k;
            }
            total += k;
        }
    }
    if total > 0.0 {
        global.iter_mut().for_each(|g| *g /= total);
    } else {
        global = [0.5; 3];
    }

    let mut uncovered_parts = Vec::new();
    for (p, cov) in covered.iter().enumerate() {
        let slice = &mut mean[p * 3 * plane..(p + 1) * 3 * plane];
        if !diffusion_fill(slice, 3, resolution, resolution, cov, FILL_SMOOTHING) {
            uncovered_parts.push(p);
            for c in 0..3 {
                slice[c * plane..(c + 1) * plane].fill(global[c]);
            }
        }
    }
    if !uncovered_parts.is_empty() {
        log::warn!("texture parts with no coverage (1-based ids): {:?}", uncovered_parts.iter().map(|p| p + 1).collect::<Vec<_>>());
    }

    let values = Tensor::from_fn(Shape::new(n, TEXTURE_CHANNELS, resolution, resolution), |p, c, y, x| {
        if c < 3 {
            mean[(p * 3 + c) * plane + y * resolution + x] as f32
        } else {
            0.0
        }
    });
    Ok(TextureInit { texture: HybridTexture::from_values(values)?, covered, uncovered_parts })
}
