//! SSIM and PSNR under increasing noise.
//!
//! `cargo run --release --example image_metrics`

use hytex::metrics::{psnr, ssim};
use hytex_tensor::Tensor;
use hytex::scene::{generate_sequence, SceneConfig};
use rand::{Rng, SeedableRng};

fn main() -> anyhow::Result<()> {
    let seq = generate_sequence(&SceneConfig::desk(5, 8, 2, 64))?;
    let clean = &seq.frames[0];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for sigma in [0.0f32, 0.01, 0.03, 0.1] {
        let noisy = Tensor::from_fn(clean.shape(), |n, c, y, x| {
            (clean.at(n, c, y, x) + sigma * (rng.gen::<f32>() * 2.0 - 1.0)).clamp(0.0, 1.0)
        });
        println!("noise ±{sigma:<5} ssim {:.4} psnr {:.2} dB", ssim(&noisy, clean)?, psnr(&noisy, clean)?);
    }
    Ok(())
}
