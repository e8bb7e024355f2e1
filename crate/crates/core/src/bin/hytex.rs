use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use hytex::checkpoint::Checkpoint;
use hytex::dataset::{load_dataset, load_keypoints, load_scene_config, save_dataset};
use hytex::evaluate::evaluate;
use hytex::model::{infer, Model};
use hytex::pretrain::{load_pretrained_uvgen, pretrain_uv, resume_pretraining, PretrainConfig};
use hytex::scene::{generate_sequence, SceneConfig};
use hytex::split::split_frames;
use hytex::train::{train, TrainConfig, Trainer};
use hytex::{io, Error};

#[derive(Parser)]
#[command(name = "hytex", version, about = "Pose-driven video rendering with learnable hybrid textures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset from a scene configuration.
    Synth(Common),
    /// Pretrain the UV generator on several datasets; `--checkpoint` resumes.
    PretrainUv {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train on one dataset; `--checkpoint` is a pretrained UV generator or a
    /// training checkpoint to resume.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Render a keypoint sequence with a trained model.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Keypoint JSON: one array of [x, y] joints per frame.
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replacement background image.
        #[arg(long)]
        background: Option<PathBuf>,
        /// Training configuration the checkpoint must match.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score self-transfer on the validation split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training configuration naming the dataset; defaults to the one stored in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write the hybrid texture, per-part previews and the background.
    ExportTexture {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-render a keypoint sequence over a new background.
    ReplaceBg {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))
}

fn stored_train_config(ckpt: &Checkpoint) -> Result<TrainConfig, Error> {
    let v = ckpt.config.get("train").cloned().ok_or_else(|| Error::Version("not a training checkpoint".into()))?;
    serde_json::from_value(v).map_err(|e| Error::Version(e.to_string()))
}

fn load_model(path: &Path, expected: Option<&TrainConfig>) -> Result<Model> {
    let ckpt = Checkpoint::load(path)?;
    if ckpt.kind != "train" {
        return Err(Error::Version(format!("{} is not a training checkpoint", path.display())).into());
    }
    Ok(Model::from_checkpoint(&ckpt, expected.map(|c| &c.model))?)
}

fn synth(c: &Common) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => load_scene_config(p).map_err(|e| match e {
            Error::Data(m) => Error::config("--config", m),
            other => other,
        })?,
        None => SceneConfig::desk(c.seed.unwrap_or(0), 8, 300, 64),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let seq = generate_sequence(&cfg)?;
    save_dataset(&seq, &c.out)?;
    log::info!("wrote {} frames to {}", seq.len(), c.out.display());
    Ok(())
}

fn pretrain(c: &Common, resume: Option<&Path>) -> Result<()> {
    let path = c.config.as_deref().ok_or_else(|| Error::config("--config", "pretrain-uv needs a file listing the scene datasets"))?;
    let mut cfg: PretrainConfig = read_json(path)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if cfg.scenes.len() < 2 {
        bail!(Error::config("scenes", format!("pretraining needs at least 2 scene datasets, got {}", cfg.scenes.len())));
    }
    let scenes = cfg.scenes.iter().map(|d| load_dataset(d)).collect::<Result<Vec<_>, _>>()?;
    let out = match resume {
        Some(p) => resume_pretraining(&cfg, &scenes, &Checkpoint::load(p)?, Some(&c.out))?,
        None => pretrain_uv(&cfg, &scenes, Some(&c.out))?,
    };
    println!("held-out part accuracy {:.4}, UV L1 {:.4}", out.holdout_accuracy, out.holdout_uv_l1);
    Ok(())
}

fn train_cmd(c: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => TrainConfig::load_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let dataset = cfg.dataset.clone().ok_or_else(|| Error::config("dataset", "no dataset directory given"))?;
    let seq = load_dataset(&dataset)?;
    let ckpt = checkpoint.map(Checkpoint::load).transpose()?;
    match ckpt {
        Some(ck) if ck.kind == "train" => {
            let mut t = Trainer::resume(&seq, &ck)?;
            t.dump_dir = Some(c.out.clone());
            std::fs::create_dir_all(&c.out)?;
            let mut log = hytex::losses::LossLog::create(&c.out.join("losses.csv"))?;
            while (t.epoch as usize) < t.config.epochs {
                t.run_epoch(Some(&mut log))?;
            }
            t.checkpoint()?.save(&c.out.join("model.ckpt"))?;
        }
        ck => {
            let pretrained = ck.map(|ck| load_pretrained_uvgen(&ck, cfg.model.n_parts, &cfg.model.uvgen)).transpose()?;
            std::fs::create_dir_all(&c.out)?;
            train(&cfg, &seq, pretrained.as_ref(), Some(&c.out))?;
        }
    }
    println!("wrote {}", c.out.join("model.ckpt").display());
    Ok(())
}

fn load_background(path: Option<&Path>) -> Result<Option<hytex::Image>> {
    Ok(path.map(|p| io::load_png(p).map_err(|e| Error::Data(format!("background {}: {e}", p.display())))).transpose()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(c) => synth(&c),
        Command::PretrainUv { common, checkpoint } => pretrain(&common, checkpoint.as_deref()),
        Command::Train { common, checkpoint } => train_cmd(&common, checkpoint.as_deref()),
        Command::Infer { checkpoint, frames, out, background, config } => {
            let expected = config.as_deref().map(TrainConfig::load_json).transpose()?;
            let model = load_model(&checkpoint, expected.as_ref())?;
            let bg = load_background(background.as_deref())?;
            let res = infer(&model, &load_keypoints(&frames)?, bg.as_ref(), &out)?;
            println!("wrote {} frames and {}", res.frames.len(), res.video_path.display());
            Ok(())
        }
        Command::ReplaceBg { checkpoint, frames, background, out } => {
            let model = load_model(&checkpoint, None)?;
            let bg = load_background(Some(&background))?;
            let res = infer(&model, &load_keypoints(&frames)?, bg.as_ref(), &out)?;
            println!("wrote {} frames and {}", res.frames.len(), res.video_path.display());
            Ok(())
        }
        Command::Eval { checkpoint, out, config } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let cfg = match &config {
                Some(p) => TrainConfig::load_json(p)?,
                None => stored_train_config(&ckpt)?,
            };
            let model = Model::from_checkpoint(&ckpt, Some(&cfg.model))?;
            let Some(dataset) = &cfg.dataset else { bail!(Error::config("dataset", "no dataset directory given")) };
            let seq = load_dataset(dataset)?;
            let split = split_frames(seq.len(), cfg.validation_block, cfg.validation_fraction, cfg.seed)?;
            let m = cfg.robust_m.min(split.validation.len());
            let report = evaluate(&model, &seq, &split, m)?;
            std::fs::create_dir_all(&out)?;
            report.save_json(&out.join("eval.json"))?;
            report.save_csv(&out.join("eval.csv"))?;
            println!(
                "ssim {:.4} psnr {:.2} robust ssim {:.4} robust psnr {:.2} temporal error {:.5}",
                report.ssim, report.psnr, report.robust_ssim, report.robust_psnr, report.temporal_error
            );
            Ok(())
        }
        Command::ExportTexture { checkpoint, out } => {
            let model = load_model(&checkpoint, None)?;
            model.texture.save(&out.join("texture.htx"))?;
            let previews = model.texture.export_previews(&out)?;
            model.background.save_png(&out.join("background.png"))?;
            println!("wrote texture.htx, {} part previews and background.png", previews.len());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain().find_map(|e| e.downcast_ref::<Error>()).map_or(3, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
