//! Pose conditioning rasters and keypoint distances.
//!
//! A [`PoseLabelImage`] has six channels: three for the skeleton drawn as
//! anti-aliased coloured bones, and three geometry channels holding the owning
//! part's orientation `((cos a + 1) / 2, (sin a + 1) / 2)` and its depth order.

use hytex_tensor::{Shape, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{PosedPuppet, Skeleton};

/// 2D keypoints in continuous pixel coordinates (pixel centres at `+0.5`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSet {
    pub points: Vec<[f64; 2]>,
    pub visibility: Vec<bool>,
}

impl KeypointSet {
    pub fn all_visible(points: Vec<[f64; 2]>) -> Self {
        let visibility = vec![true; points.len()];
        KeypointSet { points, visibility }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.visibility.len() {
            return Err(Error::Schema(format!(
                "{} keypoints but {} visibility flags",
                self.points.len(),
                self.visibility.len()
            )));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite keypoint coordinate".into()));
        }
        Ok(())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        KeypointSet {
            points: self.points.iter().map(|p| [p[0] + dx, p[1] + dy]).collect(),
            visibility: self.visibility.clone(),
        }
    }
}

/// Six-channel pose raster, `1 x 6 x H x W`, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLabelImage(pub Tensor<f32>);

pub const POSE_CHANNELS: usize = 6;

/// Bone stroke half-width in pixels for a canvas of height `h`.
fn stroke_radius(h: usize) -> f64 {
    (0.012 * h as f64).max(1.0)
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

/// Rasterize `kps` on an `H x W` canvas.
///
/// Geometry channels are derived from the skeleton's capsules placed at the
/// keypoints; bones with an invisible endpoint are skipped in all channels.
pub fn rasterize_pose(kps: &KeypointSet, skeleton: &Skeleton, size: [usize; 2]) -> Result<PoseLabelImage> {
    kps.validate()?;
    if kps.len() != skeleton.n_joints() {
        return Err(Error::Schema(format!(
            "keypoint set has {} joints, skeleton defines {}",
            kps.len(),
            skeleton.n_joints()
        )));
    }
    let [h, w] = size;
    let margin = 0.5 * h.max(w) as f64;
    for (p, _) in kps.points.iter().zip(&kps.visibility).filter(|(_, &v)| v) {
        if p[0] < -margin || p[1] < -margin || p[0] > w as f64 + margin || p[1] > h as f64 + margin {
            return Err(Error::Argument(format!("keypoint ({}, {}) far outside the {h}x{w} canvas", p[0], p[1])));
        }
    }

    let n = skeleton.n_parts();
    let drawn: Vec<usize> = (0..n)
        .filter(|&i| kps.visibility[skeleton.bones[i].parent_joint] && kps.visibility[i + 1])
        .collect();
    let posed = PosedPuppet::from_joints(skeleton, &kps.points, h);
    let order: Vec<usize> = skeleton.front_to_back().into_iter().filter(|i| drawn.contains(i)).collect();
    let rank = skeleton.depth_rank();
    let stroke = stroke_radius(h);

    let mut out = Tensor::zeros(Shape::new(1, POSE_CHANNELS, h, w));
    for y in 0..h {
        for x in 0..w {
            let p = [x as f64 + 0.5, y as f64 + 0.5];
            let mut rgb = [0.0f64; 3];
            for &i in &drawn {
                let a = kps.points[skeleton.bones[i].parent_joint];
                let b = kps.points[i + 1];
                let cover = (stroke + 0.5 - segment_distance(p, a, b)).clamp(0.0, 1.0);
                if cover > 0.0 {
                    for (c, v) in rgb.iter_mut().enumerate() {
                        *v = v.max(skeleton.palette[i][c] * cover);
                    }
                }
            }
            for (c, v) in rgb.iter().enumerate() {
                out.set(0, c, y, x, *v as f32);
            }
            if let Some(hit) = order.iter().find_map(|&i| posed.local(i, p)) {
                let angle = posed.bones[hit.bone].angle;
                out.set(0, 3, y, x, (0.5 * (angle.cos() + 1.0)) as f32);
                out.set(0, 4, y, x, (0.5 * (angle.sin() + 1.0)) as f32);
                // keep the back-most part distinguishable from background
                out.set(0, 5, y, x, (0.5 + 0.5 * rank[hit.bone]) as f32);
            }
        }
    }
    Ok(PoseLabelImage(out))
}

/// Euclidean norm of the stacked coordinate differences over joints visible
/// in both sets, in pixels (no normalization).
pub fn pose_distance(a: &KeypointSet, b: &KeypointSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Schema(format!("pose distance between {} and {} joints", a.len(), b.len())));
    }
    let mut sum = 0.0;
    let mut any = false;
    for j in 0..a.len() {
        if a.visibility[j] && b.visibility[j] {
            let (dx, dy) = (a.points[j][0] - b.points[j][0], a.points[j][1] - b.points[j][1]);
            sum += dx * dx + dy * dy;
            any = true;
        }
    }
    if !any {
        return Err(Error::UndefinedDistance);
    }
    Ok(sum.sqrt())
}

/// Distance from each validation pose to its nearest training pose.
pub fn nearest_distances(validation: &[KeypointSet], training: &[KeypointSet]) -> Result<Vec<f64>> {
    if training.is_empty() {
        return Err(Error::Argument("training pose list is empty".into()));
    }
    validation
        .iter()
        .map(|v| {
            let mut best = f64::INFINITY;
            for t in training {
                best = best.min(pose_distance(v, t)?);
            }
            Ok(best)
        })
        .collect()
}

/// Indices of the `m` validation poses farthest from any training pose,
/// largest distance first, ties broken by lower index.
pub fn select_challenging(validation: &[KeypointSet], training: &[KeypointSet], m: usize) -> Result<Vec<usize>> {
    if m > validation.len() {
        return Err(Error::Argument(format!("asked for {m} challenging poses out of {}", validation.len())));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if validation.is_empty() {
        return Err(Error::Argument("validation pose list is empty".into()));
    }
    let d = nearest_distances(validation, training)?;
    let mut idx: Vec<usize> = (0..validation.len()).collect();
    idx.sort_by(|&i, &j| d[j].total_cmp(&d[i]).then(i.cmp(&j)));
    idx.truncate(m);
    Ok(idx)
}
