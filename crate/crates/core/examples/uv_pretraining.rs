//! Pretrain the UV generator on two synthetic puppets, checkpoint, and resume.
//!
//! `cargo run --release --example uv_pretraining -- [out_dir]`

use std::path::PathBuf;

use hytex::checkpoint::Checkpoint;
use hytex::pretrain::{load_pretrained_uvgen, pretrain_uv, resume_pretraining, PretrainConfig};
use hytex::scene::{generate_sequence, SceneConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("hytex_pretrain"));
    let scenes = vec![
        generate_sequence(&SceneConfig::desk(100, 8, 100, 64))?,
        generate_sequence(&SceneConfig::desk(101, 8, 100, 64))?,
    ];
    let config = PretrainConfig { epochs: 3, ..Default::default() };

    let first = pretrain_uv(&PretrainConfig { epochs: 2, ..config.clone() }, &scenes, Some(&out))?;
    println!("after 2 epochs: held-out part accuracy {:.3}", first.holdout_accuracy);

    let ckpt = Checkpoint::load(&out.join("pretrain_epoch_002.ckpt"))?;
    let resumed = resume_pretraining(&config, &scenes, &ckpt, Some(&out))?;
    println!("epoch 3 mean loss {:.4}", resumed.epoch_losses[0]);
    println!("held-out part accuracy {:.3}, UV L1 {:.4}", resumed.holdout_accuracy, resumed.holdout_uv_l1);

    let uvgen = load_pretrained_uvgen(&Checkpoint::load(&out.join("uvgen.ckpt"))?, 8, &config.uvgen)?;
    println!("uvgen.ckpt holds {} parameters", uvgen.params.numel());
    Ok(())
}
