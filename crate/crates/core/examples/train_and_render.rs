//! Train a small model end to end, evaluate self-transfer, render a video,
//! swap the background and export the learned texture.
//!
//! `cargo run --release --example train_and_render -- [out_dir]`

use std::path::PathBuf;

use hytex::evaluate::evaluate;
use hytex::metrics::psnr;
use hytex::model::{infer, ModelConfig};
use hytex::scene::{generate_sequence, SceneConfig};
use hytex::train::{train, TrainConfig};
use hytex_tensor::{Shape, Tensor};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hytex_train"));
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let seq = generate_sequence(&SceneConfig::desk(7, 4, 80, 32))?;
    let mut model = ModelConfig { n_parts: 4, image_size: [32, 32], texture_resolution: 32, ..Default::default() };
    model.d2g.width = 16;
    model.d2g.residual_blocks = 2;
    let config = TrainConfig { model, epochs: 3, validation_fraction: 0.125, robust_m: 5, ..Default::default() };

    let run = train(&config, &seq, None, Some(&out))?;
    let first = run.losses[..10].iter().map(|t| t.g_total).sum::<f64>() / 10.0;
    let last = run.losses.iter().rev().take(10).map(|t| t.g_total).sum::<f64>() / 10.0;
    println!("g_total {first:.3} -> {last:.3} over {} steps", run.losses.len());

    let report = evaluate(&run.model, &seq, &run.split, config.robust_m)?;
    report.save_json(&out.join("eval.json"))?;
    println!(
        "validation ssim {:.4} psnr {:.2} dB, challenging subset psnr {:.2} dB, temporal error {:.5}",
        report.ssim, report.psnr, report.robust_psnr, report.temporal_error
    );
    println!("background psnr {:.2} dB", psnr(&run.model.background.to_image(), &seq.background_gt)?);

    let poses = &seq.keypoints[..20];
    let video = infer(&run.model, poses, None, &out.join("render"))?;
    println!("rendered {} frames to {}", video.frames.len(), video.video_path.display());

    let green = Tensor::from_fn(Shape::new(1, 3, 32, 32), |_, c, _, _| if c == 1 { 1.0 } else { 0.0 });
    let swapped = infer(&run.model, poses, Some(&green), &out.join("green"))?;
    println!("background replaced: {}", swapped.video_path.display());

    let previews = run.model.texture.export_previews(&out.join("texture"))?;
    println!("texture previews: {}", previews.len());
    Ok(())
}
