//! Generate a synthetic puppet video with full ground truth and write it to disk.
//!
//! `cargo run --release --example synthesize_scene -- [out_dir]`

use std::path::PathBuf;

use hytex::dataset::{load_dataset, save_dataset};
use hytex::scene::{generate_sequence, SceneConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hytex_scene"));
    let config = SceneConfig::desk(1, 8, 60, 64);
    let seq = generate_sequence(&config)?;
    save_dataset(&seq, &out)?;

    let fg: usize = seq.part_id_gt.iter().map(|m| m.foreground_mask().iter().filter(|&&f| f).count()).sum();
    let confident: f64 = seq.confidence_gt.iter().map(|c| c.0.mean() as f64).sum::<f64>() / seq.confidence_gt.len() as f64;
    println!("{} frames of {}x{} with {} parts in {}", seq.len(), seq.height(), seq.width(), seq.n_parts(), out.display());
    println!("mean foreground coverage {:.1}%", 100.0 * fg as f64 / (seq.len() * seq.height() * seq.width()) as f64);
    println!("mean flow confidence {:.3}", confident);

    let back = load_dataset(&out)?;
    assert_eq!(back.part_id_gt, seq.part_id_gt);
    println!("reloaded dataset matches");
    Ok(())
}
