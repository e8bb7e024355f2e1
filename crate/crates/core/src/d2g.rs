//! Pose-conditioned network turning the mapped 18-channel feature into RGB.
//!
//! The feature is encoded and downsampled twice; the pose label goes through
//! its own encoder to the same resolution and is concatenated there. A trunk
//! of residual blocks follows, then an upsampling decoder with skips from the
//! feature encoder. `tanh` output is remapped to `[0, 1]`.

use hytex_tensor::{Bound, Graph, ParamStore, Real, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Conv;
use crate::pose::{PoseLabelImage, POSE_CHANNELS};
use crate::texture::TEXTURE_CHANNELS;
use crate::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct D2gConfig {
    pub width: usize,
    pub pose_width: usize,
    pub residual_blocks: usize,
    /// Inject the pose label at the bottleneck; off gives the unconditioned variant.
    pub pose_conditioning: bool,
}

impl Default for D2gConfig {
    fn default() -> Self {
        D2gConfig { width: 32, pose_width: 16, residual_blocks: 4, pose_conditioning: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layers {
    front: Conv,
    down1: Conv,
    down2: Conv,
    pose: Option<[Conv; 3]>,
    merge: Conv,
    trunk: Vec<[Conv; 2]>,
    up1: Conv,
    up0: Conv,
    out: Conv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetailRenderer<F: Real = f32> {
    pub params: ParamStore<F>,
    pub config: D2gConfig,
    layers: Layers,
}

impl<F: Real> DetailRenderer<F> {
    pub fn new<R: Rng + ?Sized>(config: &D2gConfig, rng: &mut R) -> Self {
        let (w, pw) = (config.width, config.pose_width);
        let mut p = ParamStore::new();
        let front = Conv::new(&mut p, "front", TEXTURE_CHANNELS, w, 3, 1, rng);
        let down1 = Conv::new(&mut p, "down1", w, w, 3, 2, rng);
        let down2 = Conv::new(&mut p, "down2", w, w, 3, 2, rng);
        let pose = config.pose_conditioning.then(|| {
            [
                Conv::new(&mut p, "pose0", POSE_CHANNELS, pw, 3, 1, rng),
                Conv::new(&mut p, "pose1", pw, pw, 3, 2, rng),
                Conv::new(&mut p, "pose2", pw, pw, 3, 2, rng),
            ]
        });
        let merge_in = if config.pose_conditioning { w + pw } else { w };
        let merge = Conv::new(&mut p, "merge", merge_in, w, 1, 1, rng);
        let trunk = (0..config.residual_blocks)
            .map(|i| [Conv::new(&mut p, &format!("res{i}.a"), w, w, 3, 1, rng), Conv::new(&mut p, &format!("res{i}.b"), w, w, 3, 1, rng)])
            .collect();
        let up1 = Conv::new(&mut p, "up1", 2 * w, w, 3, 1, rng);
        let up0 = Conv::new(&mut p, "up0", 2 * w, w, 3, 1, rng);
        let out = Conv::new(&mut p, "out", w, 3, 1, 1, rng);
        DetailRenderer { params: p, config: config.clone(), layers: Layers { front, down1, down2, pose, merge, trunk, up1, up0, out } }
    }

    pub fn cast<G: Real>(&self) -> DetailRenderer<G> {
        DetailRenderer { params: self.params.cast(), config: self.config.clone(), layers: self.layers.clone() }
    }

    /// `feature` is `B x 18 x H x W`, `pose` is `B x 6 x H x W`; returns `B x 3 x H x W` in `[0, 1]`.
    pub fn forward<'g>(&self, p: &Bound<'g, F>, feature: Var<'g, F>, pose: Var<'g, F>) -> Result<Var<'g, F>> {
        let (fs, ps) = (feature.shape(), pose.shape());
        if fs.c != TEXTURE_CHANNELS || ps.c != POSE_CHANNELS || fs.n != ps.n || fs.h != ps.h || fs.w != ps.w {
            return Err(Error::shape("render_details", format!("feature {fs} vs pose {ps}")));
        }
        if fs.h % 4 != 0 || fs.w % 4 != 0 || fs.h == 0 || fs.w == 0 {
            return Err(Error::shape("render_details", format!("spatial size {}x{} is not a multiple of 4", fs.h, fs.w)));
        }
        let g = feature.graph();
        let l = &self.layers;
        let f0 = l.front.act(p, feature);
        let f1 = l.down1.act(p, f0);
        let f2 = l.down2.act(p, f1);
        let bottleneck = match &l.pose {
            Some([p0, p1, p2]) => {
                let q = p2.act(p, p1.act(p, p0.act(p, pose)));
                g.cat_channels(&[f2, q])
            }
            None => f2,
        };
        let mut x = l.merge.act(p, bottleneck);
        for [a, b] in &l.trunk {
            x = x + b.apply(p, a.act(p, x));
        }
        let u1 = l.up1.act(p, g.cat_channels(&[x.upsample_nearest(2), f1]));
        let u0 = l.up0.act(p, g.cat_channels(&[u1.upsample_nearest(2), f0]));
        Ok(l.out.apply(p, u0).tanh().add_scalar(1.0).scale(0.5))
    }

    /// Inference on one frame.
    pub fn render_details(&self, feature: &Tensor<F>, pose: &PoseLabelImage) -> Result<Image> {
        let g = Graph::<F>::new();
        let p = self.params.bind(&g, false);
        let out = self.forward(&p, g.constant(feature.clone()), g.constant(pose.0.cast()))?;
        let img = out.value().cast();
        Ok(img)
    }
}
