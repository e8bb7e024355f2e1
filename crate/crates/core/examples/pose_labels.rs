//! Rasterize keypoints into the 6-channel pose label and pick challenging poses.
//!
//! `cargo run --release --example pose_labels -- [out_dir]`

use std::path::PathBuf;

use hytex::io::save_png;
use hytex::pose::{nearest_distances, rasterize_pose, select_challenging};
use hytex::scene::{generate_sequence, SceneConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hytex_pose"));
    let seq = generate_sequence(&SceneConfig::desk(2, 8, 100, 64))?;
    let label = rasterize_pose(&seq.keypoints[0], &seq.skeleton, [64, 64])?;
    save_png(&out.join("skeleton_channels.png"), &label.0.narrow_channels(0, 3))?;
    save_png(&out.join("geometry_channels.png"), &label.0.narrow_channels(3, 3))?;
    println!("pose label channels written to {}", out.display());

    let (train, val) = seq.keypoints.split_at(90);
    let dists = nearest_distances(val, train)?;
    let picked = select_challenging(val, train, 3)?;
    for &i in &picked {
        println!("validation frame {} is {:.2} px from its nearest training pose", 90 + i, dists[i]);
    }
    Ok(())
}
