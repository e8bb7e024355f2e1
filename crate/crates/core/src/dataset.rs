//! On-disk dataset layout.
//!
//! ```text
//! scene.json         scene configuration
//! skeleton.json      bone list and palette
//! keypoints.json     T arrays of J [x, y] pairs
//! background.png     clean background
//! frames/%06d.png    RGB frames
//! partid/%06d.png    part id per pixel (0 = background)
//! uv/%06d.bin        UVW1 grid, 2 channels
//! flow/%06d.bin      FLW1 grid, backward flow from frame t to t-1 (t >= 1)
//! conf/%06d.bin      CNF1 grid, flow confidence for frame t (t >= 1)
//! ```
//! Frames and the background are stored with 8 bits per channel.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::{self, CONF_MAGIC, FLOW_MAGIC, UV_MAGIC};
use crate::pose::KeypointSet;
use crate::scene::{PartMap, SceneConfig, SyntheticSequence};
use crate::skeleton::Skeleton;
use crate::warp::{ConfidenceMask, FlowField};

fn frame_file(dir: &Path, sub: &str, t: usize, ext: &str) -> PathBuf {
    dir.join(sub).join(format!("{t:06}.{ext}"))
}

/// Write every file of the layout.
pub fn save_dataset(seq: &SyntheticSequence, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("scene.json"), serde_json::to_vec_pretty(&seq.config)?)?;
    seq.skeleton.save_json(&dir.join("skeleton.json"))?;
    let kps: Vec<&Vec<[f64; 2]>> = seq.keypoints.iter().map(|k| &k.points).collect();
    std::fs::write(dir.join("keypoints.json"), serde_json::to_vec(&kps)?)?;
    io::save_png(&dir.join("background.png"), &seq.background_gt)?;
    let (h, w) = (seq.height(), seq.width());
    for t in 0..seq.len() {
        io::save_png(&frame_file(dir, "frames", t, "png"), &seq.frames[t])?;
        io::save_gray_png(&frame_file(dir, "partid", t, "png"), &seq.part_id_gt[t].ids, h, w)?;
        io::write_grid(&frame_file(dir, "uv", t, "bin"), UV_MAGIC, &seq.uv_gt[t])?;
        if t > 0 {
            io::write_grid(&frame_file(dir, "flow", t, "bin"), FLOW_MAGIC, &seq.flow_gt[t - 1].0)?;
            io::write_grid(&frame_file(dir, "conf", t, "bin"), CONF_MAGIC, &seq.confidence_gt[t - 1].0)?;
        }
    }
    Ok(())
}

fn require(path: &Path) -> Result<&Path> {
    if !path.exists() {
        return Err(Error::Data(format!("dataset file {} is missing", path.display())));
    }
    Ok(path)
}

/// Read a keypoint sequence (`T` arrays of `J` `[x, y]` pairs).
pub fn load_keypoints(path: &Path) -> Result<Vec<KeypointSet>> {
    let raw: Vec<Vec<[f64; 2]>> =
        serde_json::from_slice(&std::fs::read(require(path)?)?).map_err(|e| Error::format(path, e.to_string()))?;
    let kps: Vec<KeypointSet> = raw.into_iter().map(KeypointSet::all_visible).collect();
    if let Some(first) = kps.first() {
        if kps.iter().any(|k| k.len() != first.len()) {
            return Err(Error::Schema(format!("{}: frames have differing joint counts", path.display())));
        }
    }
    for k in &kps {
        k.validate()?;
    }
    Ok(kps)
}

pub fn save_keypoints(path: &Path, kps: &[KeypointSet]) -> Result<()> {
    let raw: Vec<&Vec<[f64; 2]>> = kps.iter().map(|k| &k.points).collect();
    std::fs::write(path, serde_json::to_vec(&raw)?)?;
    Ok(())
}

pub fn load_scene_config(path: &Path) -> Result<SceneConfig> {
    let cfg: SceneConfig = serde_json::from_slice(&std::fs::read(require(path)?)?)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Load a dataset written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<SyntheticSequence> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("dataset directory {} does not exist", dir.display())));
    }
    let config = load_scene_config(&dir.join("scene.json"))?;
    let skeleton = if dir.join("skeleton.json").exists() {
        Skeleton::load_json(&dir.join("skeleton.json"))?
    } else {
        Skeleton::puppet(config.n_parts)?
    };
    if skeleton.n_parts() != config.n_parts {
        return Err(Error::Schema(format!("skeleton has {} bones, scene has {} parts", skeleton.n_parts(), config.n_parts)));
    }
    let keypoints = load_keypoints(&dir.join("keypoints.json"))?;
    let t_count = config.n_frames;
    if keypoints.len() != t_count {
        return Err(Error::Data(format!("{} keypoint frames for {t_count} frames", keypoints.len())));
    }
    if keypoints.iter().any(|k| k.len() != skeleton.n_joints()) {
        return Err(Error::Schema(format!("keypoints do not have {} joints", skeleton.n_joints())));
    }
    let [h, w] = config.image_size;
    let background_gt = io::load_png(require(&dir.join("background.png"))?)?;
    let mut frames = Vec::with_capacity(t_count);
    let mut part_id_gt = Vec::with_capacity(t_count);
    let mut uv_gt = Vec::with_capacity(t_count);
    let mut flow_gt = Vec::with_capacity(t_count.saturating_sub(1));
    let mut confidence_gt = Vec::with_capacity(t_count.saturating_sub(1));
    for t in 0..t_count {
        let frame = io::load_png(require(&frame_file(dir, "frames", t, "png"))?)?;
        let (ids, ph, pw) = io::load_gray_png(require(&frame_file(dir, "partid", t, "png"))?)?;
        let uv = io::read_grid(require(&frame_file(dir, "uv", t, "bin"))?, UV_MAGIC)?;
        if frame.shape().h != h || frame.shape().w != w || ph != h || pw != w || uv.shape().c != 2 {
            return Err(Error::Data(format!("frame {t} does not match the {h}x{w} scene")));
        }
        if ids.iter().any(|&id| id as usize > config.n_parts) {
            return Err(Error::Data(format!("frame {t} has a part id above {}", config.n_parts)));
        }
        frames.push(frame);
        part_id_gt.push(PartMap { height: h, width: w, ids });
        uv_gt.push(uv);
        if t > 0 {
            let flow = FlowField(io::read_grid(require(&frame_file(dir, "flow", t, "bin"))?, FLOW_MAGIC)?);
            let conf = ConfidenceMask(io::read_grid(require(&frame_file(dir, "conf", t, "bin"))?, CONF_MAGIC)?);
            flow.validate()?;
            conf.validate()?;
            flow_gt.push(flow);
            confidence_gt.push(conf);
        }
    }
    Ok(SyntheticSequence { config, skeleton, frames, keypoints, part_id_gt, uv_gt, flow_gt, confidence_gt, background_gt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::generate_sequence;

    #[test]
    fn round_trip_preserves_ground_truth() {
        let seq = generate_sequence(&SceneConfig::desk(4, 5, 3, 16)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&seq, dir.path()).unwrap();
        for f in ["frames/000002.png", "partid/000000.png", "uv/000001.bin", "flow/000001.bin", "conf/000002.bin", "scene.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("flow/000000.bin").exists());
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.config, seq.config);
        assert_eq!(back.part_id_gt, seq.part_id_gt);
        assert_eq!(back.uv_gt, seq.uv_gt);
        assert_eq!(back.flow_gt, seq.flow_gt);
        assert_eq!(back.confidence_gt, seq.confidence_gt);
        assert_eq!(back.keypoints, seq.keypoints);
        for (a, b) in back.frames.iter().zip(&seq.frames) {
            assert!(a.zip_map(b, |x, y| (x - y).abs()).max() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn missing_files_are_data_errors() {
        let seq = generate_sequence(&SceneConfig::desk(4, 5, 3, 16)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&seq, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("uv/000001.bin")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Data(_))));
        assert!(matches!(load_dataset(&dir.path().join("nope")), Err(Error::Data(_))));
    }
}
