//! Bone topology shared by the puppet renderer and the pose rasterizer.
//!
//! Joint 0 is the root (pelvis). Bone `i` runs from joint `parent_joint` to
//! joint `i + 1`, so a skeleton with `N` bones has `N + 1` joints. Every bone
//! is a capsule whose radius and painter's depth are part of the skeleton,
//! which lets part ownership be recomputed from keypoints alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bone {
    pub name: String,
    /// Joint the bone starts at; its end joint is `index + 1`.
    pub parent_joint: usize,
    /// Rest angle in radians, relative to the parent bone (absolute for root bones).
    pub rest_angle: f64,
    /// Length as a fraction of image height.
    pub length: f64,
    /// Capsule radius as a fraction of image height.
    pub radius: f64,
    /// Painter's order; larger values are drawn on top.
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SkeletonFile", into = "SkeletonFile")]
pub struct Skeleton {
    pub bones: Vec<Bone>,
    /// Per-bone RGB colour used for skeleton channels, components in `[0, 1]`.
    pub palette: Vec<[f64; 3]>,
}

/// `skeleton.json` layout: bones as `[start joint, end joint]` pairs plus the palette.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    bones: Vec<BoneRecord>,
    palette: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoneRecord {
    name: String,
    joints: [usize; 2],
    rest_angle: f64,
    length: f64,
    radius: f64,
    depth: u32,
}

impl From<Skeleton> for SkeletonFile {
    fn from(s: Skeleton) -> Self {
        let bones = s
            .bones
            .into_iter()
            .enumerate()
            .map(|(i, b)| BoneRecord {
                name: b.name,
                joints: [b.parent_joint, i + 1],
                rest_angle: b.rest_angle,
                length: b.length,
                radius: b.radius,
                depth: b.depth,
            })
            .collect();
        SkeletonFile { bones, palette: s.palette }
    }
}

impl TryFrom<SkeletonFile> for Skeleton {
    type Error = Error;

    fn try_from(f: SkeletonFile) -> Result<Self> {
        let bones = f
            .bones
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                if r.joints[1] != i + 1 {
                    return Err(Error::Schema(format!("bone {i} ({}) must end at joint {}, not {}", r.name, i + 1, r.joints[1])));
                }
                Ok(Bone { name: r.name, parent_joint: r.joints[0], rest_angle: r.rest_angle, length: r.length, radius: r.radius, depth: r.depth })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Skeleton { bones, palette: f.palette };
        s.validate()?;
        Ok(s)
    }
}

/// `(name, parent bone or None for the root joint, absolute rest angle, length, radius, depth)`
const CANONICAL: [(&str, Option<usize>, f64, f64, f64, u32); 24] = {
    use std::f64::consts::{FRAC_PI_2 as D, PI};
    [
        ("lower_torso", None, -D, 0.10, 0.075, 12),
        ("upper_torso", Some(0), -D, 0.12, 0.085, 13),
        ("head", Some(1), -D, 0.09, 0.06, 16),
        ("l_thigh", None, D + 0.15, 0.15, 0.045, 9),
        ("r_thigh", None, D - 0.15, 0.15, 0.045, 17),
        ("l_upper_arm", Some(1), D + 0.55, 0.13, 0.035, 7),
        ("r_upper_arm", Some(1), D - 0.55, 0.13, 0.035, 20),
        ("l_shin", Some(3), D + 0.05, 0.15, 0.038, 8),
        ("r_shin", Some(4), D - 0.05, 0.15, 0.038, 18),
        ("l_forearm", Some(5), D + 0.2, 0.12, 0.03, 6),
        ("r_forearm", Some(6), D - 0.2, 0.12, 0.03, 21),
        ("l_hand", Some(9), D + 0.1, 0.05, 0.028, 5),
        ("r_hand", Some(10), D - 0.1, 0.05, 0.028, 22),
        ("l_foot", Some(7), PI, 0.06, 0.025, 10),
        ("r_foot", Some(8), 0.0, 0.06, 0.025, 19),
        ("l_toe", Some(13), PI + 0.3, 0.03, 0.018, 11),
        ("r_toe", Some(14), -0.3, 0.03, 0.018, 23),
        ("l_finger", Some(11), D + 0.3, 0.03, 0.015, 4),
        ("r_finger", Some(12), D - 0.3, 0.03, 0.015, 24),
        ("hat", Some(2), -D, 0.04, 0.05, 15),
        ("l_plume", Some(19), -D - 0.6, 0.05, 0.015, 14),
        ("r_plume", Some(19), -D + 0.6, 0.05, 0.015, 3),
        ("tail", None, D + 0.9, 0.08, 0.02, 2),
        ("tail_tip", Some(22), D + 1.4, 0.05, 0.015, 1),
    ]
};

/// Largest skeleton [`Skeleton::puppet`] can build.
pub const MAX_PARTS: usize = CANONICAL.len();

impl Skeleton {
    /// The first `n_parts` bones of the canonical 24-bone puppet.
    pub fn puppet(n_parts: usize) -> Result<Self> {
        if n_parts == 0 || n_parts > MAX_PARTS {
            return Err(Error::config("n_parts", format!("must be in 1..={MAX_PARTS}, got {n_parts}")));
        }
        let mut bones = Vec::with_capacity(n_parts);
        for (name, parent, abs_angle, length, radius, depth) in CANONICAL.iter().take(n_parts).copied() {
            let (parent_joint, rest_angle) = match parent {
                None => (0, abs_angle),
                Some(p) => (p + 1, abs_angle - CANONICAL[p].2),
            };
            bones.push(Bone { name: name.to_string(), parent_joint, rest_angle, length, radius, depth });
        }
        let palette = (0..n_parts).map(bone_color).collect();
        Ok(Skeleton { bones, palette })
    }

    pub fn n_parts(&self) -> usize {
        self.bones.len()
    }

    pub fn n_joints(&self) -> usize {
        self.bones.len() + 1
    }

    /// Bone whose end joint is `joint`, i.e. the bone a child attached at `joint` hangs from.
    pub fn bone_ending_at(&self, joint: usize) -> Option<usize> {
        joint.checked_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bones.is_empty() {
            return Err(Error::config("bones", "skeleton has no bones"));
        }
        if self.palette.len() != self.bones.len() {
            return Err(Error::Schema(format!(
                "palette has {} colours for {} bones",
                self.palette.len(),
                self.bones.len()
            )));
        }
        for (i, b) in self.bones.iter().enumerate() {
            if b.parent_joint > i {
                return Err(Error::Schema(format!("bone {i} ({}) starts at joint {} which is not yet placed", b.name, b.parent_joint)));
            }
            if !(b.length > 0.0 && b.radius > 0.0) {
                return Err(Error::Schema(format!("bone {i} ({}) needs positive length and radius", b.name)));
            }
        }
        let mut depths: Vec<u32> = self.bones.iter().map(|b| b.depth).collect();
        depths.sort_unstable();
        depths.dedup();
        if depths.len() != self.bones.len() {
            return Err(Error::Schema("bone depths must be distinct".into()));
        }
        Ok(())
    }

    /// Bone indices sorted front-most first.
    pub fn front_to_back(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.bones.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(self.bones[i].depth));
        order
    }

    /// Depth rank of each bone in `[0, 1]`, 1 = front-most.
    pub fn depth_rank(&self) -> Vec<f64> {
        let n = self.bones.len();
        let order = self.front_to_back();
        let mut rank = vec![0.0; n];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = if n == 1 { 1.0 } else { 1.0 - pos as f64 / (n - 1) as f64 };
        }
        rank
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s: Skeleton = serde_json::from_slice(&std::fs::read(path)?)?;
        s.validate()?;
        Ok(s)
    }
}

/// Deterministic, well-separated palette (golden-ratio hue walk).
fn bone_color(i: usize) -> [f64; 3] {
    let h = (i as f64 * 0.618_033_988_75).fract();
    hsv_to_rgb(h, 0.85, 1.0)
}

pub(crate) fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = h * 6.0;
    let sector = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// One bone placed in image space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedBone {
    pub start: [f64; 2],
    /// Unit vector from start to end joint.
    pub dir: [f64; 2],
    /// `dir` rotated by +90 degrees.
    pub normal: [f64; 2],
    pub length: f64,
    pub radius: f64,
    /// Absolute orientation `atan2(dir.y, dir.x)`.
    pub angle: f64,
}

/// Surface point hit by a pixel: owning bone and its capsule-local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub bone: usize,
    /// Distance along the bone axis from the start joint.
    pub along: f64,
    /// Signed distance from the axis along `normal`.
    pub across: f64,
    pub u: f64,
    pub v: f64,
}

/// Skeleton posed at concrete joint positions (continuous image coordinates,
/// pixel `(x, y)` covering `[x, x+1) x [y, y+1)`).
#[derive(Debug, Clone)]
pub struct PosedPuppet {
    pub bones: Vec<PlacedBone>,
    order: Vec<usize>,
}

impl PosedPuppet {
    /// Capsules spanned by consecutive joints; radii scale with `image_height`.
    pub fn from_joints(skeleton: &Skeleton, joints: &[[f64; 2]], image_height: usize) -> Self {
        assert_eq!(joints.len(), skeleton.n_joints(), "joint count");
        let bones = skeleton
            .bones
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let a = joints[b.parent_joint];
                let e = joints[i + 1];
                let (dx, dy) = (e[0] - a[0], e[1] - a[1]);
                let length = (dx * dx + dy * dy).sqrt();
                let (dir, angle) = if length > 0.0 {
                    ([dx / length, dy / length], dy.atan2(dx))
                } else {
                    ([1.0, 0.0], 0.0)
                };
                PlacedBone {
                    start: a,
                    dir,
                    normal: [-dir[1], dir[0]],
                    length,
                    radius: b.radius * image_height as f64,
                    angle,
                }
            })
            .collect();
        PosedPuppet { bones, order: skeleton.front_to_back() }
    }

    /// Local frame of `p` on bone `i`, or `None` when `p` lies outside that capsule.
    pub fn local(&self, i: usize, p: [f64; 2]) -> Option<SurfaceHit> {
        let b = &self.bones[i];
        let rel = [p[0] - b.start[0], p[1] - b.start[1]];
        let along = rel[0] * b.dir[0] + rel[1] * b.dir[1];
        let across = rel[0] * b.normal[0] + rel[1] * b.normal[1];
        let clamped = along.clamp(0.0, b.length);
        let da = along - clamped;
        if da * da + across * across > b.radius * b.radius {
            return None;
        }
        let u = (along + b.radius) / (b.length + 2.0 * b.radius);
        let v = (across + b.radius) / (2.0 * b.radius);
        Some(SurfaceHit { bone: i, along, across, u, v })
    }

    /// Front-most capsule containing `p`.
    pub fn hit(&self, p: [f64; 2]) -> Option<SurfaceHit> {
        self.order.iter().find_map(|&i| self.local(i, p))
    }

    /// Image position of the capsule-local point `(along, across)` on bone `i`.
    pub fn world(&self, i: usize, along: f64, across: f64) -> [f64; 2] {
        let b = &self.bones[i];
        [
            b.start[0] + along * b.dir[0] + across * b.normal[0],
            b.start[1] + along * b.dir[1] + across * b.normal[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_prefix_is_valid() {
        for n in 1..=MAX_PARTS {
            let s = Skeleton::puppet(n).unwrap();
            s.validate().unwrap();
            assert_eq!(s.n_joints(), n + 1);
        }
    }

    #[test]
    fn rejects_bad_part_counts() {
        assert!(Skeleton::puppet(0).is_err());
        assert!(Skeleton::puppet(MAX_PARTS + 1).is_err());
    }

    #[test]
    fn depth_rank_is_a_permutation_of_levels() {
        let s = Skeleton::puppet(8).unwrap();
        let mut r = s.depth_rank();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(r.first(), Some(&0.0));
        assert_eq!(r.last(), Some(&1.0));
    }

    #[test]
    fn palette_components_in_unit_range() {
        for c in Skeleton::puppet(24).unwrap().palette {
            assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
