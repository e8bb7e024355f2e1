//! Procedural articulated-puppet videos with analytic ground truth.
//!
//! A puppet is a kinematic tree of capsules drawn with painter's ordering
//! over a static procedural background. Because every foreground pixel maps
//! to a known point in a rigid capsule frame, part ids, UV coordinates,
//! backward flow and flow confidence are all closed-form.

use std::f64::consts::{PI, TAU};

use hytex_tensor::{Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::KeypointSet;
use crate::skeleton::{PosedPuppet, Skeleton};
use crate::warp::{ConfidenceMask, FlowField};
use crate::Image;

/// Joint angles (radians, relative to each bone's rest angle) and root
/// offset (pixels, relative to the canvas anchor) for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseFrame {
    pub angles: Vec<f64>,
    pub root: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartTexture {
    /// 0 solid, 1 stripes, 2 checker, 3 gradient.
    pub pattern: u32,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    /// 0 solid, 1 gradient, 2 smooth waves, 3 soft checker.
    pub pattern: u32,
    pub colors: [[f64; 3]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// `[H, W]` in pixels.
    pub image_size: [usize; 2],
    pub n_parts: usize,
    pub n_joints: usize,
    pub motion_script: Vec<PoseFrame>,
    pub texture_spec: Vec<PartTexture>,
    /// Strength of the pose-dependent shading, in `[0, 1]`.
    pub detail_amplitude: f64,
    pub background_spec: BackgroundSpec,
    pub seed: u64,
    pub n_frames: usize,
}

/// Per-pixel part ids, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartMap {
    pub height: usize,
    pub width: usize,
    pub ids: Vec<u8>,
}

impl PartMap {
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    pub fn foreground_mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&i| i > 0).collect()
    }
}

/// One generated video plus ground truth. `flow_gt[k]` and
/// `confidence_gt[k]` relate frame `k + 1` to frame `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub config: SceneConfig,
    pub skeleton: Skeleton,
    pub frames: Vec<Image>,
    pub keypoints: Vec<KeypointSet>,
    pub part_id_gt: Vec<PartMap>,
    /// `1 x 2 x H x W`, channel 0 = u, channel 1 = v; zero on background.
    pub uv_gt: Vec<Tensor<f32>>,
    pub flow_gt: Vec<FlowField>,
    pub confidence_gt: Vec<ConfidenceMask>,
    pub background_gt: Image,
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.config.image_size[0]
    }

    pub fn width(&self) -> usize {
        self.config.image_size[1]
    }

    pub fn n_parts(&self) -> usize {
        self.config.n_parts
    }
}

impl SceneConfig {
    /// A dancing puppet with random textures, drawn from `seed`.
    pub fn desk(seed: u64, n_parts: usize, n_frames: usize, size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_CAFE);
        let texture_spec = (0..n_parts)
            .map(|_| PartTexture {
                pattern: rng.gen_range(0..4),
                color: [rng.gen_range(0.15..0.95), rng.gen_range(0.15..0.95), rng.gen_range(0.15..0.95)],
            })
            .collect();
        let background_spec = BackgroundSpec {
            pattern: rng.gen_range(1..4),
            colors: [
                [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)],
                [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)],
            ],
        };
        SceneConfig {
            image_size: [size, size],
            n_parts,
            n_joints: n_parts + 1,
            motion_script: dance(&mut rng, n_parts, n_frames, size),
            texture_spec,
            detail_amplitude: 0.3,
            background_spec,
            seed,
            n_frames,
        }
    }

    /// Replace the motion with a motionless rest pose.
    pub fn with_still_motion(mut self) -> Self {
        self.motion_script = (0..self.n_frames)
            .map(|_| PoseFrame { angles: vec![0.0; self.n_parts], root: [0.0, 0.0] })
            .collect();
        self
    }

    /// Replace the motion with a rigid root translation of `step` pixels per frame.
    pub fn with_translation(mut self, step: [f64; 2]) -> Self {
        self.motion_script = (0..self.n_frames)
            .map(|t| PoseFrame {
                angles: vec![0.0; self.n_parts],
                root: [step[0] * t as f64, step[1] * t as f64],
            })
            .collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.image_size;
        if h < 16 || w < 16 {
            return Err(Error::config("image_size", format!("H and W must be >= 16, got {h}x{w}")));
        }
        if self.n_parts < 1 {
            return Err(Error::config("n_parts", "must be >= 1"));
        }
        if self.n_parts > crate::skeleton::MAX_PARTS {
            return Err(Error::config("n_parts", format!("at most {} parts supported", crate::skeleton::MAX_PARTS)));
        }
        if self.n_joints != self.n_parts + 1 {
            return Err(Error::config("n_joints", format!("expected n_parts + 1 = {}, got {}", self.n_parts + 1, self.n_joints)));
        }
        if self.n_frames < 2 {
            return Err(Error::config("n_frames", format!("must be >= 2, got {}", self.n_frames)));
        }
        if self.motion_script.len() != self.n_frames {
            return Err(Error::config(
                "motion_script",
                format!("has {} frames, n_frames is {}", self.motion_script.len(), self.n_frames),
            ));
        }
        if let Some(t) = self.motion_script.iter().position(|f| f.angles.len() != self.n_parts) {
            return Err(Error::config("motion_script", format!("frame {t} does not have {} angles", self.n_parts)));
        }
        if self.motion_script.iter().any(|f| f.angles.iter().chain(&f.root).any(|v| !v.is_finite())) {
            return Err(Error::config("motion_script", "non-finite angle or root offset"));
        }
        if self.texture_spec.len() != self.n_parts {
            return Err(Error::config("texture_spec", format!("needs {} entries, got {}", self.n_parts, self.texture_spec.len())));
        }
        if !(0.0..=1.0).contains(&self.detail_amplitude) {
            return Err(Error::config("detail_amplitude", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn dance(rng: &mut ChaCha8Rng, n_parts: usize, n_frames: usize, size: usize) -> Vec<PoseFrame> {
    let amps: Vec<f64> = (0..n_parts).map(|i| if i < 3 { rng.gen_range(0.05..0.2) } else { rng.gen_range(0.25..0.7) }).collect();
    let periods: Vec<f64> = (0..n_parts).map(|_| rng.gen_range(28.0..60.0)).collect();
    let phases: Vec<f64> = (0..n_parts).map(|_| rng.gen_range(0.0..TAU)).collect();
    let sway = 0.2 * size as f64;
    let sway_period = rng.gen_range(70.0..110.0);
    let bob = 0.03 * size as f64;
    (0..n_frames)
        .map(|t| {
            let tf = t as f64;
            PoseFrame {
                angles: (0..n_parts).map(|i| amps[i] * (TAU * tf / periods[i] + phases[i]).sin()).collect(),
                root: [sway * (TAU * tf / sway_period).sin(), bob * (TAU * tf / 23.0).sin()],
            }
        })
        .collect()
}

/// Forward kinematics: joint positions for one frame.
pub fn joint_positions(skeleton: &Skeleton, frame: &PoseFrame, size: [usize; 2]) -> Vec<[f64; 2]> {
    let [h, w] = size;
    let hf = h as f64;
    let root = [0.5 * w as f64 + frame.root[0], 0.58 * hf + frame.root[1]];
    let mut joints = vec![root];
    let mut abs = Vec::with_capacity(skeleton.n_parts());
    for (i, b) in skeleton.bones.iter().enumerate() {
        let parent_angle = match skeleton.bone_ending_at(b.parent_joint) {
            Some(p) => abs[p],
            None => 0.0,
        };
        let a = parent_angle + b.rest_angle + frame.angles[i];
        abs.push(a);
        let s = joints[b.parent_joint];
        joints.push([s[0] + b.length * hf * a.cos(), s[1] + b.length * hf * a.sin()]);
    }
    joints
}

/// Unshaded colour of a part at surface coordinate `(u, v)`.
pub fn part_albedo(tex: &PartTexture, u: f64, v: f64) -> [f64; 3] {
    let k = match tex.pattern {
        1 => 0.65 + 0.35 * (0.5 + 0.5 * (TAU * 3.0 * u).sin()),
        2 => 0.75 + 0.25 * (TAU * 2.0 * u).sin() * (TAU * 2.0 * v).sin(),
        3 => 0.6 + 0.4 * v,
        _ => 1.0,
    };
    tex.color.map(|c| c * k)
}

/// Multiplicative pose-dependent shading in `[1 - amplitude, 1]`.
///
/// The phase follows the bone's absolute orientation, so one static texture
/// cannot reproduce the puppet across poses when `amplitude > 0`.
pub fn pose_shading(amplitude: f64, bone_angle: f64, u: f64, v: f64) -> f64 {
    1.0 - amplitude * 0.5 * (1.0 + (TAU * (1.5 * u + v) + 3.0 * bone_angle).sin())
}

pub fn background_color(spec: &BackgroundSpec, x: f64, y: f64) -> [f64; 3] {
    // x, y normalized to [0, 1]
    let t = match spec.pattern {
        1 => 0.5 * x + 0.5 * y,
        2 => 0.5 + 0.25 * (TAU * 1.3 * x + 0.7).sin() + 0.25 * (TAU * 0.9 * y + 2.1 * x).cos(),
        3 => 0.5 + 0.5 * (PI * 4.0 * x).sin() * (PI * 4.0 * y).sin(),
        _ => 0.0,
    };
    let [a, b] = spec.colors;
    [0, 1, 2].map(|c| a[c] * (1.0 - t) + b[c] * t)
}

fn render_background(spec: &BackgroundSpec, h: usize, w: usize) -> Image {
    Tensor::from_fn(Shape::new(1, 3, h, w), |_, c, y, x| {
        background_color(spec, (x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64)[c] as f32
    })
}

struct RenderedFrame {
    image: Image,
    parts: PartMap,
    uv: Tensor<f32>,
    hits: Vec<Option<crate::skeleton::SurfaceHit>>,
    posed: PosedPuppet,
}

fn render(config: &SceneConfig, posed: &PosedPuppet, background: &Image) -> RenderedFrame {
    let [h, w] = config.image_size;
    let mut image = background.clone();
    let mut ids = vec![0u8; h * w];
    let mut uv = Tensor::zeros(Shape::new(1, 2, h, w));
    let mut hits = vec![None; h * w];
    for y in 0..h {
        for x in 0..w {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let Some(hit) = posed.hit(p) else { continue };
            let albedo = part_albedo(&config.texture_spec[hit.bone], hit.u, hit.v);
            let shade = pose_shading(config.detail_amplitude, posed.bones[hit.bone].angle, hit.u, hit.v);
            for (c, a) in albedo.iter().enumerate() {
                image.set(0, c, y, x, (a * shade) as f32);
            }
            ids[y * w + x] = (hit.bone + 1) as u8;
            uv.set(0, 0, y, x, hit.u as f32);
            uv.set(0, 1, y, x, hit.v as f32);
            hits[y * w + x] = Some(hit);
        }
    }
    RenderedFrame { image, parts: PartMap { height: h, width: w, ids }, uv, hits, posed: posed.clone() }
}

/// Backward flow from `cur` to `prev` and its binary confidence.
fn analytic_flow(
    size: [usize; 2],
    cur: &RenderedFrame,
    prev_posed: &PosedPuppet,
    prev_parts: &PartMap,
) -> (FlowField, ConfidenceMask) {
    let [h, w] = size;
    let mut flow = Tensor::zeros(Shape::new(1, 2, h, w));
    let mut conf = Tensor::zeros(Shape::new(1, 1, h, w));
    for y in 0..h {
        for x in 0..w {
            let (dx, dy, ok) = match cur.hits[y * w + x] {
                None => (0.0, 0.0, prev_parts.at(x, y) == 0),
                Some(hit) => {
                    let src = prev_posed.world(hit.bone, hit.along, hit.across);
                    // pixel-index coordinates of the source point
                    let (sx, sy) = (src[0] - 0.5, src[1] - 0.5);
                    let inside = sx >= 0.0 && sy >= 0.0 && sx <= (w - 1) as f64 && sy <= (h - 1) as f64;
                    let visible = prev_posed.hit(src).map(|s| s.bone) == Some(hit.bone);
                    // displacement of the surface point, written so unchanged bones give exactly zero
                    let (a, b) = (&prev_posed.bones[hit.bone], &cur.posed.bones[hit.bone]);
                    let d = [0, 1].map(|k| {
                        (a.start[k] - b.start[k]) + hit.along * (a.dir[k] - b.dir[k]) + hit.across * (a.normal[k] - b.normal[k])
                    });
                    (d[0], d[1], inside && visible)
                }
            };
            flow.set(0, 0, y, x, dx as f32);
            flow.set(0, 1, y, x, dy as f32);
            conf.set(0, 0, y, x, if ok { 1.0 } else { 0.0 });
        }
    }
    (FlowField(flow), ConfidenceMask(conf))
}

/// Render every frame of `config` together with its ground truth.
pub fn generate_sequence(config: &SceneConfig) -> Result<SyntheticSequence> {
    config.validate()?;
    let skeleton = Skeleton::puppet(config.n_parts)?;
    let [h, w] = config.image_size;
    let background = render_background(&config.background_spec, h, w);

    let mut frames = Vec::with_capacity(config.n_frames);
    let mut keypoints = Vec::with_capacity(config.n_frames);
    let mut part_id_gt = Vec::with_capacity(config.n_frames);
    let mut uv_gt = Vec::with_capacity(config.n_frames);
    let mut flow_gt = Vec::with_capacity(config.n_frames - 1);
    let mut confidence_gt = Vec::with_capacity(config.n_frames - 1);
    let mut prev: Option<(PosedPuppet, PartMap)> = None;

    for frame in &config.motion_script {
        let joints = joint_positions(&skeleton, frame, config.image_size);
        let posed = PosedPuppet::from_joints(&skeleton, &joints, h);
        let rendered = render(config, &posed, &background);
        if let Some((prev_posed, prev_parts)) = &prev {
            let (f, c) = analytic_flow(config.image_size, &rendered, prev_posed, prev_parts);
            flow_gt.push(f);
            confidence_gt.push(c);
        }
        keypoints.push(KeypointSet::all_visible(joints));
        frames.push(rendered.image);
        uv_gt.push(rendered.uv);
        prev = Some((posed, rendered.parts.clone()));
        part_id_gt.push(rendered.parts);
    }

    Ok(SyntheticSequence {
        config: config.clone(),
        skeleton,
        frames,
        keypoints,
        part_id_gt,
        uv_gt,
        flow_gt,
        confidence_gt,
        background_gt: background,
    })
}

/// Per-part mean colour over every `(t, pixel)` whose ground-truth UV rounds
/// to each texel; the reference unwrap the learnable texture starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwrappedTexture {
    pub resolution: usize,
    /// `colors[part]` is `1 x 3 x R x R`, rows indexed by v, columns by u.
    pub colors: Vec<Tensor<f64>>,
    /// Number of samples that landed in each texel.
    pub coverage: Vec<Vec<u32>>,
}

impl UnwrappedTexture {
    pub fn covered(&self, part: usize, row: usize, col: usize) -> bool {
        self.coverage[part][row * self.resolution + col] > 0
    }

    /// Parts (0-based) that received no samples at all.
    pub fn uncovered_parts(&self) -> Vec<usize> {
        (0..self.coverage.len()).filter(|&p| self.coverage[p].iter().all(|&c| c == 0)).collect()
    }
}

/// Texel index for a coordinate in `[0, 1]` (u = 0 at texel 0, u = 1 at texel R-1).
pub fn texel_index(coord: f32, resolution: usize) -> usize {
    let r = (resolution - 1) as f64;
    ((coord as f64).clamp(0.0, 1.0) * r).round() as usize
}

/// Exhaustive per-texel average; every texel scans every sample.
pub fn brute_force_unwrap(seq: &SyntheticSequence, resolution: usize) -> UnwrappedTexture {
    let n = seq.n_parts();
    let (h, w) = (seq.height(), seq.width());
    let texels = resolution * resolution;
    let mut sums = vec![vec![[0.0f64; 3]; texels]; n];
    let mut coverage = vec![vec![0u32; texels]; n];
    for part in 0..n {
        for row in 0..resolution {
            for col in 0..resolution {
                let mut acc = [0.0f64; 3];
                let mut count = 0u32;
                for t in 0..seq.len() {
                    for y in 0..h {
                        for x in 0..w {
                            if seq.part_id_gt[t].at(x, y) as usize != part + 1 {
                                continue;
                            }
                            let uv = &seq.uv_gt[t];
                            if texel_index(uv.at(0, 0, y, x), resolution) != col
                                || texel_index(uv.at(0, 1, y, x), resolution) != row
                            {
                                continue;
                            }
                            for (c, a) in acc.iter_mut().enumerate() {
                                *a += seq.frames[t].at(0, c, y, x) as f64;
                            }
                            count += 1;
                        }
                    }
                }
                sums[part][row * resolution + col] = acc;
                coverage[part][row * resolution + col] = count;
            }
        }
    }
    let colors = (0..n)
        .map(|p| {
            Tensor::from_fn(Shape::new(1, 3, resolution, resolution), |_, c, row, col| {
                let k = coverage[p][row * resolution + col];
                if k == 0 {
                    0.0
                } else {
                    sums[p][row * resolution + col][c] / k as f64
                }
            })
        })
        .collect();
    UnwrappedTexture { resolution, colors, coverage }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n_frames: usize) -> SceneConfig {
        SceneConfig::desk(7, 6, n_frames, 32)
    }

    #[test]
    fn still_scene_frames_identical_and_flow_zero() {
        let seq = generate_sequence(&small(3).with_still_motion()).unwrap();
        assert_eq!(seq.frames[0], seq.frames[1]);
        assert_eq!(seq.frames[1], seq.frames[2]);
        for f in &seq.flow_gt {
            assert_eq!(f.0.max_abs(), 0.0);
        }
        for c in &seq.confidence_gt {
            assert_eq!(c.0.min(), 1.0);
        }
    }

    #[test]
    fn rigid_translation_gives_constant_backward_flow() {
        let seq = generate_sequence(&small(4).with_translation([2.0, 0.0])).unwrap();
        for t in 1..seq.len() {
            let parts = &seq.part_id_gt[t];
            for y in 0..32 {
                for x in 0..32 {
                    if parts.at(x, y) == 0 || seq.confidence_gt[t - 1].0.at(0, 0, y, x) == 0.0 {
                        continue;
                    }
                    assert_eq!(seq.flow_gt[t - 1].0.at(0, 0, y, x), -2.0);
                    assert_eq!(seq.flow_gt[t - 1].0.at(0, 1, y, x), 0.0);
                }
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(5);
        assert_eq!(generate_sequence(&cfg).unwrap(), generate_sequence(&cfg).unwrap());
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let mut cfg = small(3);
        cfg.image_size = [8, 32];
        assert!(matches!(generate_sequence(&cfg), Err(Error::Config { field, .. }) if field == "image_size"));
        let mut cfg = small(3);
        cfg.n_frames = 1;
        cfg.motion_script.truncate(1);
        assert!(matches!(generate_sequence(&cfg), Err(Error::Config { field, .. }) if field == "n_frames"));
        let mut cfg = small(3);
        cfg.texture_spec.pop();
        assert!(matches!(generate_sequence(&cfg), Err(Error::Config { field, .. }) if field == "texture_spec"));
        let mut cfg = small(3);
        cfg.motion_script.pop();
        assert!(matches!(generate_sequence(&cfg), Err(Error::Config { field, .. }) if field == "motion_script"));
    }

    #[test]
    fn uv_in_unit_square_on_foreground_and_zero_elsewhere() {
        let seq = generate_sequence(&small(4)).unwrap();
        for t in 0..seq.len() {
            for y in 0..32 {
                for x in 0..32 {
                    let (u, v) = (seq.uv_gt[t].at(0, 0, y, x), seq.uv_gt[t].at(0, 1, y, x));
                    if seq.part_id_gt[t].at(x, y) > 0 {
                        assert!((0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v));
                    } else {
                        assert_eq!((u, v), (0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn background_pixels_equal_background_gt() {
        let seq = generate_sequence(&small(6)).unwrap();
        for t in 0..seq.len() {
            for y in 0..32 {
                for x in 0..32 {
                    if seq.part_id_gt[t].at(x, y) == 0 {
                        for c in 0..3 {
                            assert_eq!(seq.frames[t].at(0, c, y, x), seq.background_gt.at(0, c, y, x));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn confidence_zero_when_source_out_of_bounds() {
        // puppet enters from the left edge, so early sources fall off-canvas
        let mut cfg = small(4);
        for (t, f) in cfg.motion_script.iter_mut().enumerate() {
            f.angles.iter_mut().for_each(|a| *a = 0.0);
            f.root = [-16.0 + 6.0 * t as f64, 0.0];
        }
        let seq = generate_sequence(&cfg).unwrap();
        let mut saw_oob = false;
        for t in 1..seq.len() {
            for y in 0..32 {
                for x in 0..32 {
                    let sx = x as f32 + seq.flow_gt[t - 1].0.at(0, 0, y, x);
                    if sx < 0.0 {
                        saw_oob = true;
                        assert_eq!(seq.confidence_gt[t - 1].0.at(0, 0, y, x), 0.0);
                    }
                }
            }
        }
        assert!(saw_oob);
    }

    #[test]
    fn unwrap_single_sample_and_two_sample_mean() {
        let cfg = small(2).with_still_motion();
        let mut seq = generate_sequence(&cfg).unwrap();
        // keep one foreground pixel in frame 0 only
        let (x0, y0) = (0..32 * 32)
            .map(|i| (i % 32, i / 32))
            .find(|&(x, y)| seq.part_id_gt[0].at(x, y) > 0)
            .unwrap();
        let part = seq.part_id_gt[0].at(x0, y0);
        for t in 0..2 {
            for id in seq.part_id_gt[t].ids.iter_mut() {
                *id = 0;
            }
        }
        seq.part_id_gt[0].ids[y0 * 32 + x0] = part;
        let r = 8;
        let un = brute_force_unwrap(&seq, r);
        let col = texel_index(seq.uv_gt[0].at(0, 0, y0, x0), r);
        let row = texel_index(seq.uv_gt[0].at(0, 1, y0, x0), r);
        for c in 0..3 {
            assert_eq!(un.colors[part as usize - 1].at(0, c, row, col), seq.frames[0].at(0, c, y0, x0) as f64);
        }
        // same pixel in frame 1 with a different colour: average of both
        seq.part_id_gt[1].ids[y0 * 32 + x0] = part;
        seq.frames[1].set(0, 0, y0, x0, 0.25);
        seq.frames[0].set(0, 0, y0, x0, 0.75);
        let un = brute_force_unwrap(&seq, r);
        assert_eq!(un.colors[part as usize - 1].at(0, 0, row, col), 0.5);
        assert_eq!(un.coverage[part as usize - 1][row * r + col], 2);
    }

    #[test]
    fn unwrap_of_constant_part_is_exact() {
        let mut cfg = small(4);
        cfg.detail_amplitude = 0.0;
        for t in cfg.texture_spec.iter_mut() {
            t.pattern = 0;
        }
        let seq = generate_sequence(&cfg).unwrap();
        let un = brute_force_unwrap(&seq, 8);
        for p in 0..cfg.n_parts {
            for row in 0..8 {
                for col in 0..8 {
                    if un.covered(p, row, col) {
                        for c in 0..3 {
                            let expect = cfg.texture_spec[p].color[c] as f32 as f64;
                            assert!((un.colors[p].at(0, c, row, col) - expect).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }
}
