//! Initialize the per-part hybrid texture from a video and export previews.
//!
//! `cargo run --release --example hybrid_texture -- [out_dir]`

use std::path::PathBuf;

use hytex::scene::{brute_force_unwrap, generate_sequence, SceneConfig};
use hytex::texture::{initialize_from_video, HybridTexture};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hytex_texture"));
    let seq = generate_sequence(&SceneConfig::desk(3, 8, 60, 64))?;
    let init = initialize_from_video(&seq, 32)?;
    let unwrap = brute_force_unwrap(&seq, 32);

    // covered texels agree with the brute-force unwrap
    let mut worst = 0.0f64;
    for p in 0..seq.n_parts() {
        for i in 0..32 * 32 {
            if init.covered[p][i] {
                for c in 0..3 {
                    let a = init.texture.values().at(p, c, i / 32, i % 32) as f64;
                    worst = worst.max((a - unwrap.colors[p].at(0, c, i / 32, i % 32)).abs());
                }
            }
        }
    }
    let covered: usize = init.covered.iter().flatten().filter(|&&c| c).count();
    println!("{covered} of {} texels observed; max deviation from unwrap {worst:.2e}", seq.n_parts() * 32 * 32);
    println!("implicit channels start at {}", init.texture.implicit_max_abs());

    let paths = init.texture.export_previews(&out)?;
    init.texture.save(&out.join("texture.htx"))?;
    assert_eq!(HybridTexture::load(&out.join("texture.htx"))?, init.texture);
    println!("wrote {} previews and texture.htx to {}", paths.len(), out.display());
    Ok(())
}
