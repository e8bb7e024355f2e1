//! The assembled renderer: UV generator, hybrid texture, detail network and
//! background, plus conversion to and from checkpoints and inference.

use std::path::{Path, PathBuf};

use hytex_tensor::{Bound, Graph, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::{composite, composite_static, BackgroundImage};
use crate::checkpoint::{config_hash, Checkpoint};
use crate::d2g::{D2gConfig, DetailRenderer};
use crate::error::{Error, Result};
use crate::io;
use crate::losses::DiscriminatorConfig;
use crate::mapping::{map_texture, static_component};
use crate::pose::{rasterize_pose, KeypointSet, PoseLabelImage};
use crate::scene::PartMap;
use crate::skeleton::{Skeleton, MAX_PARTS};
use crate::texture::HybridTexture;
use crate::uvgen::{argmax_labels, UvGenConfig, UvGenerator};
use crate::Image;

/// Everything that determines parameter shapes. Its hash guards checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_parts: usize,
    /// `[height, width]`, both multiples of 4.
    pub image_size: [usize; 2],
    pub texture_resolution: usize,
    pub uvgen: UvGenConfig,
    pub d2g: D2gConfig,
    /// When false the foreground is the static colour component (no detail network).
    pub detail_network: bool,
    pub discriminator: DiscriminatorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_parts: 8,
            image_size: [64, 64],
            texture_resolution: 64,
            uvgen: UvGenConfig::default(),
            d2g: D2gConfig::default(),
            detail_network: true,
            discriminator: DiscriminatorConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_parts == 0 || self.n_parts > MAX_PARTS {
            return Err(Error::config("model.n_parts", format!("must be in 1..={MAX_PARTS}")));
        }
        let [h, w] = self.image_size;
        if h == 0 || w == 0 || h % 4 != 0 || w % 4 != 0 {
            return Err(Error::config("model.image_size", "height and width must be positive multiples of 4"));
        }
        if self.texture_resolution < 2 {
            return Err(Error::config("model.texture_resolution", "must be at least 2"));
        }
        for (field, v) in [
            ("model.uvgen.width", self.uvgen.width),
            ("model.d2g.width", self.d2g.width),
            ("model.d2g.pose_width", self.d2g.pose_width),
            ("model.discriminator.width", self.discriminator.width),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }
}

/// Identity of a UV generator's parameter layout.
pub fn uvgen_hash(n_parts: usize, config: &UvGenConfig) -> Result<String> {
    config_hash(&(n_parts, config))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub skeleton: Skeleton,
    pub uvgen: UvGenerator<f32>,
    pub d2g: Option<DetailRenderer<f32>>,
    pub texture: HybridTexture<f32>,
    pub background: BackgroundImage<f32>,
}

/// Model parameters placed on a graph.
pub struct ModelVars<'g> {
    pub uvgen: Bound<'g, f32>,
    pub d2g: Option<Bound<'g, f32>>,
    pub texture: Var<'g, f32>,
    pub background: Var<'g, f32>,
}

/// Per-frame intermediate results of the forward pass.
#[derive(Clone, Copy)]
pub struct FrameOutputs<'g> {
    /// `B x (N+1) x H x W`, channel 0 is the background.
    pub probs: Var<'g, f32>,
    pub coords: Var<'g, f32>,
    /// Mapped 18-channel screen feature.
    pub feature: Var<'g, f32>,
    pub foreground: Var<'g, f32>,
    pub synthesized: Var<'g, f32>,
    pub static_synthesized: Var<'g, f32>,
}

impl Model {
    /// Freshly initialized networks with the given texture and background.
    pub fn new(
        config: &ModelConfig,
        skeleton: Skeleton,
        texture: HybridTexture<f32>,
        background: BackgroundImage<f32>,
        uvgen: Option<UvGenerator<f32>>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if skeleton.n_parts() != config.n_parts {
            return Err(Error::config("model.n_parts", format!("skeleton has {} bones", skeleton.n_parts())));
        }
        if texture.n_parts() != config.n_parts || texture.resolution() != config.texture_resolution {
            return Err(Error::shape("model", format!("texture is {}", texture.values().shape())));
        }
        let bs = background.values().shape();
        if [bs.h, bs.w] != config.image_size {
            return Err(Error::shape("model", format!("background is {bs}")));
        }
        let uvgen = match uvgen {
            Some(u) => {
                if u.n_parts() != config.n_parts || u.config != config.uvgen {
                    return Err(Error::Version("pretrained UV generator does not match the model configuration".into()));
                }
                u
            }
            None => UvGenerator::new(&config.uvgen, config.n_parts, rng),
        };
        let d2g = config.detail_network.then(|| DetailRenderer::new(&config.d2g, rng));
        Ok(Model { config: config.clone(), skeleton, uvgen, d2g, texture, background })
    }

    pub fn bind<'g>(&self, g: &'g Graph<f32>, trainable: bool) -> ModelVars<'g> {
        let var = |t: &Tensor<f32>| if trainable { g.leaf(t.clone()) } else { g.constant(t.clone()) };
        ModelVars {
            uvgen: self.uvgen.params.bind(g, trainable),
            d2g: self.d2g.as_ref().map(|d| d.params.bind(g, trainable)),
            texture: var(self.texture.values()),
            background: var(self.background.values()),
        }
    }

    /// Render a pose batch over `background` (batch 1 or matching).
    pub fn forward<'g>(&self, vars: &ModelVars<'g>, pose: Var<'g, f32>, background: Var<'g, f32>) -> Result<FrameOutputs<'g>> {
        let g = pose.graph();
        let uv = self.uvgen.forward(&vars.uvgen, pose)?;
        let feature = map_texture(g, vars.texture, uv.probs, uv.coords)?;
        let static_fg = static_component(feature)?;
        let foreground = match (&self.d2g, &vars.d2g) {
            (Some(d), Some(b)) => d.forward(b, feature, pose)?,
            _ => static_fg,
        };
        let p0 = uv.probs.narrow_channels(0, 1);
        Ok(FrameOutputs {
            probs: uv.probs,
            coords: uv.coords,
            feature,
            foreground,
            synthesized: composite(foreground, background, p0)?,
            static_synthesized: composite_static(static_fg, background, p0)?,
        })
    }

    pub fn rasterize(&self, keypoints: &KeypointSet) -> Result<PoseLabelImage> {
        rasterize_pose(keypoints, &self.skeleton, self.config.image_size)
    }

    /// Synthesize one frame; `background` replaces the learned one when given.
    pub fn render(&self, pose: &PoseLabelImage, background: Option<&Image>) -> Result<Image> {
        Ok(self.render_with_parts(pose, background)?.0)
    }

    /// Synthesized frame and the part probabilities behind it.
    pub fn render_with_parts(&self, pose: &PoseLabelImage, background: Option<&Image>) -> Result<(Image, Tensor<f32>)> {
        let g = Graph::new();
        let vars = self.bind(&g, false);
        let bg = match background {
            Some(img) => {
                let s = img.shape();
                if s.n != 1 || s.c != 3 || [s.h, s.w] != self.config.image_size {
                    return Err(Error::shape(
                        "replace_background",
                        format!("background is {s}, expected a {}x{} RGB image", self.config.image_size[0], self.config.image_size[1]),
                    ));
                }
                g.constant(img.clone())
            }
            None => vars.background,
        };
        let out = self.forward(&vars, g.constant(pose.0.clone()), bg)?;
        Ok(((*out.synthesized.value()).clone(), (*out.probs.value()).clone()))
    }

    /// Argmax part labels for one pose.
    pub fn predict_parts(&self, pose: &PoseLabelImage) -> Result<PartMap> {
        let pred = self.uvgen.predict_uv(pose)?;
        Ok(argmax_labels(&pred.part_probs, 0))
    }

    /// Store the model under `uvgen/`, `d2g/`, `texture/` and `background/`.
    pub fn write_tensors(&self, ckpt: &mut Checkpoint) {
        ckpt.insert_store("uvgen", &self.uvgen.params);
        if let Some(d) = &self.d2g {
            ckpt.insert_store("d2g", &d.params);
        }
        ckpt.insert_store("texture", self.texture.params());
        ckpt.insert_store("background", self.background.params());
    }

    /// Rebuild a model from a training checkpoint. `expected` (when given)
    /// must describe the same model as the checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint, expected: Option<&ModelConfig>) -> Result<Self> {
        let stored: StoredModel = serde_json::from_value(
            ckpt.config.get("model").cloned().ok_or_else(|| Error::Version("checkpoint has no model description".into()))?,
        )
        .map_err(|e| Error::Version(format!("checkpoint model description: {e}")))?;
        let config = stored.config;
        ckpt.check_hash(&config.hash()?)?;
        if let Some(exp) = expected {
            ckpt.check_hash(&exp.hash()?)?;
        }
        config.validate()?;
        let [h, w] = config.image_size;
        let texture = HybridTexture::zeros(config.n_parts, config.texture_resolution);
        let background = BackgroundImage::from_image(Tensor::zeros(hytex_tensor::Shape::new(1, 3, h, w)))?;
        let mut model = Model::new(&config, stored.skeleton, texture, background, None, &mut ChaCha8Rng::seed_from_u64(0))?;
        ckpt.load_store("uvgen", &mut model.uvgen.params)?;
        if let Some(d) = &mut model.d2g {
            ckpt.load_store("d2g", &mut d.params)?;
        }
        ckpt.load_store("texture", model.texture.params_mut())?;
        ckpt.load_store("background", model.background.params_mut())?;
        Ok(model)
    }

    /// JSON stored in checkpoints to describe this model.
    pub fn description(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(StoredModel { config: self.config.clone(), skeleton: self.skeleton.clone() })?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredModel {
    config: ModelConfig,
    skeleton: Skeleton,
}

/// Frames and video written by [`infer`].
#[derive(Debug, Clone)]
pub struct InferOutput {
    pub frames: Vec<Image>,
    pub frame_paths: Vec<PathBuf>,
    pub video_path: PathBuf,
}

/// Frames per second of the written video.
pub const VIDEO_FPS: u16 = 25;

/// Render a keypoint sequence to `out/frames/%06d.png` and `out/video.apng`.
pub fn infer(model: &Model, keypoints: &[KeypointSet], background: Option<&Image>, out: &Path) -> Result<InferOutput> {
    if keypoints.is_empty() {
        return Err(Error::Data("no poses to render".into()));
    }
    let mut frames = Vec::with_capacity(keypoints.len());
    let mut frame_paths = Vec::with_capacity(keypoints.len());
    for (t, kp) in keypoints.iter().enumerate() {
        let img = model.render(&model.rasterize(kp)?, background)?;
        let path = out.join("frames").join(format!("{t:06}.png"));
        io::save_png(&path, &img)?;
        frames.push(img);
        frame_paths.push(path);
    }
    let video_path = out.join("video.apng");
    io::save_apng(&video_path, &frames, VIDEO_FPS)?;
    Ok(InferOutput { frames, frame_paths, video_path })
}
