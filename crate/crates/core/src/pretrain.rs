//! Supervised UV generator pretraining on several synthetic scenes.

use std::path::{Path, PathBuf};

use hytex_tensor::{Adam, AdamConfig, Graph, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::model::uvgen_hash;
use crate::pose::{rasterize_pose, PoseLabelImage};
use crate::scene::SyntheticSequence;
use crate::split::split_frames;
use crate::uvgen::{uv_accuracy, uv_pretrain_loss, UvGenConfig, UvGenerator, UvTargets};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    /// Dataset directories; used by the command-line tool.
    pub scenes: Vec<PathBuf>,
    pub n_parts: usize,
    pub uvgen: UvGenConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub seed: u64,
    /// Fraction of each scene held out (in blocks of 10 frames) for accuracy.
    pub holdout_fraction: f64,
    /// Truncate each epoch to this many batches.
    pub steps_per_epoch: Option<usize>,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            scenes: Vec::new(),
            n_parts: 8,
            uvgen: UvGenConfig::default(),
            epochs: 5,
            batch_size: 4,
            learning_rate: 0.002,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            seed: 0,
            holdout_fraction: 0.1,
            steps_per_epoch: None,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        for (f, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(f, "must be in [0, 1)"));
            }
        }
        if self.uvgen.width == 0 {
            return Err(Error::config("uvgen.width", "must be positive"));
        }
        Ok(())
    }
}

/// Per-epoch shuffling seed; independent of earlier epochs so resumed runs
/// see the same order.
fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub struct UvPretrainer<'a> {
    pub config: PretrainConfig,
    pub uvgen: UvGenerator<f32>,
    scenes: &'a [SyntheticSequence],
    poses: Vec<Vec<PoseLabelImage>>,
    train_items: Vec<(usize, usize)>,
    holdout: Vec<(usize, usize)>,
    optimizer: Adam<f32>,
    /// Completed epochs.
    pub epoch: usize,
    pub step: u64,
}

impl<'a> UvPretrainer<'a> {
    pub fn new(config: &PretrainConfig, scenes: &'a [SyntheticSequence]) -> Result<Self> {
        config.validate()?;
        if scenes.len() < 2 {
            return Err(Error::config("scenes", format!("pretraining needs at least 2 scenes, got {}", scenes.len())));
        }
        for i in 0..scenes.len() {
            for j in 0..i {
                if scenes[i].config == scenes[j].config {
                    return Err(Error::config("scenes", format!("scenes {j} and {i} are identical")));
                }
            }
        }
        let size = scenes[0].config.image_size;
        let mut poses = Vec::with_capacity(scenes.len());
        let mut train_items = Vec::new();
        let mut holdout = Vec::new();
        for (s, seq) in scenes.iter().enumerate() {
            if seq.n_parts() != config.n_parts {
                return Err(Error::config("n_parts", format!("scene {s} has {} parts, expected {}", seq.n_parts(), config.n_parts)));
            }
            if seq.config.image_size != size {
                return Err(Error::Data(format!("scene {s} image size differs from scene 0")));
            }
            if seq.part_id_gt.len() != seq.len() || seq.uv_gt.len() != seq.len() {
                return Err(Error::Data(format!("scene {s} lacks part or UV ground truth")));
            }
            poses.push(seq.keypoints.iter().map(|k| rasterize_pose(k, &seq.skeleton, size)).collect::<Result<Vec<_>>>()?);
            let split = split_frames(seq.len(), 10, config.holdout_fraction, config.seed.wrapping_add(s as u64))?;
            train_items.extend(split.train.iter().map(|&t| (s, t)));
            holdout.extend(split.validation.iter().map(|&t| (s, t)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let uvgen = UvGenerator::new(&config.uvgen, config.n_parts, &mut rng);
        let mut optimizer =
            Adam::new(AdamConfig { lr: config.learning_rate, beta1: config.adam_beta1, beta2: config.adam_beta2, eps: 1e-8 });
        optimizer.add_group("uvgen", &uvgen.params);
        Ok(UvPretrainer { config: config.clone(), uvgen, scenes, poses, train_items, holdout, optimizer, epoch: 0, step: 0 })
    }

    /// Continue from a checkpoint written by [`UvPretrainer::checkpoint`].
    pub fn resume(config: &PretrainConfig, scenes: &'a [SyntheticSequence], ckpt: &Checkpoint) -> Result<Self> {
        let mut p = Self::new(config, scenes)?;
        if ckpt.kind != "pretrain" {
            return Err(Error::Version(format!("expected a pretraining checkpoint, got {:?}", ckpt.kind)));
        }
        ckpt.check_hash(&uvgen_hash(config.n_parts, &config.uvgen)?)?;
        ckpt.load_store("uvgen", &mut p.uvgen.params)?;
        ckpt.load_optimizer("optim", &mut p.optimizer)?;
        p.epoch = ckpt.epoch as usize;
        p.step = ckpt.step;
        Ok(p)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new(
            "pretrain",
            serde_json::to_value(&self.config)?,
            uvgen_hash(self.config.n_parts, &self.config.uvgen)?,
            self.step,
            self.epoch as u64,
        );
        c.insert_store("uvgen", &self.uvgen.params);
        c.insert_optimizer("optim", &self.optimizer);
        Ok(c)
    }

    fn batch_loss(&mut self, items: &[(usize, usize)], update: bool) -> Result<f64> {
        let poses: Vec<&Tensor<f32>> = items.iter().map(|&(s, t)| &self.poses[s][t].0).collect();
        let parts: Vec<_> = items.iter().map(|&(s, t)| &self.scenes[s].part_id_gt[t]).collect();
        let uvs: Vec<_> = items.iter().map(|&(s, t)| &self.scenes[s].uv_gt[t]).collect();
        let targets = UvTargets::new(&parts, &uvs, self.config.n_parts)?;
        let g = Graph::new();
        let p = self.uvgen.params.bind(&g, update);
        let pose = Tensor::cat_batch(&poses).map_err(|e| Error::shape("pretrain batch", e.to_string()))?;
        let out = self.uvgen.forward(&p, g.constant(pose))?;
        let loss = uv_pretrain_loss(&out, &targets)?.total;
        let value = loss.item() as f64;
        if !value.is_finite() {
            return Err(Error::Numerical(format!("pretraining loss is {value} at step {}", self.step)));
        }
        if update {
            let grads = p.grads(&g.backward(loss));
            self.optimizer.step(&mut [(&mut self.uvgen.params, &grads)]);
            self.step += 1;
        }
        Ok(value)
    }

    /// One pass over the shuffled training frames; returns the per-batch losses.
    pub fn run_epoch(&mut self) -> Result<Vec<f64>> {
        let mut order = self.train_items.clone();
        order.shuffle(&mut epoch_rng(self.config.seed, self.epoch));
        let mut losses = Vec::new();
        for (k, chunk) in order.chunks(self.config.batch_size).enumerate() {
            if self.config.steps_per_epoch.is_some_and(|s| k >= s) {
                break;
            }
            losses.push(self.batch_loss(chunk, true)?);
        }
        self.epoch += 1;
        let mean = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        log::info!("pretrain epoch {} mean loss {mean:.5}", self.epoch);
        Ok(losses)
    }

    /// Loss on a fixed set of frames without updating.
    pub fn evaluate_loss(&mut self, items: &[(usize, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for chunk in items.chunks(self.config.batch_size) {
            total += self.batch_loss(chunk, false)? * chunk.len() as f64;
        }
        Ok(total / items.len().max(1) as f64)
    }

    pub fn holdout_items(&self) -> &[(usize, usize)] {
        &self.holdout
    }

    pub fn train_items(&self) -> &[(usize, usize)] {
        &self.train_items
    }

    /// Foreground part accuracy and mean UV L1 over held-out frames.
    pub fn holdout_accuracy(&self) -> Result<(f64, f64)> {
        let (mut acc, mut l1) = (0.0, 0.0);
        for &(s, t) in &self.holdout {
            let pred = self.uvgen.predict_uv(&self.poses[s][t])?;
            let (a, e) = uv_accuracy(&pred, &self.scenes[s].part_id_gt[t], &self.scenes[s].uv_gt[t]);
            acc += a;
            l1 += e;
        }
        let n = self.holdout.len().max(1) as f64;
        Ok((acc / n, l1 / n))
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub uvgen: UvGenerator<f32>,
    pub step_losses: Vec<f64>,
    pub epoch_losses: Vec<f64>,
    pub holdout_accuracy: f64,
    pub holdout_uv_l1: f64,
    pub checkpoint: Checkpoint,
}

/// Train for the configured epochs, writing `pretrain_epoch_%03d.ckpt` after
/// every epoch and `uvgen.ckpt` at the end when `out` is given.
pub fn pretrain_uv(config: &PretrainConfig, scenes: &[SyntheticSequence], out: Option<&Path>) -> Result<PretrainOutcome> {
    run_pretraining(UvPretrainer::new(config, scenes)?, out)
}

/// Continue a pretraining run from `ckpt` up to the configured epoch count.
pub fn resume_pretraining(
    config: &PretrainConfig,
    scenes: &[SyntheticSequence],
    ckpt: &Checkpoint,
    out: Option<&Path>,
) -> Result<PretrainOutcome> {
    run_pretraining(UvPretrainer::resume(config, scenes, ckpt)?, out)
}

fn run_pretraining(mut p: UvPretrainer<'_>, out: Option<&Path>) -> Result<PretrainOutcome> {
    let mut step_losses = Vec::new();
    let mut epoch_losses = Vec::new();
    while p.epoch < p.config.epochs {
        let losses = p.run_epoch()?;
        epoch_losses.push(losses.iter().sum::<f64>() / losses.len().max(1) as f64);
        step_losses.extend(losses);
        if let Some(dir) = out {
            p.checkpoint()?.save(&dir.join(format!("pretrain_epoch_{:03}.ckpt", p.epoch)))?;
        }
    }
    let (holdout_accuracy, holdout_uv_l1) = p.holdout_accuracy()?;
    log::info!("pretraining held-out part accuracy {holdout_accuracy:.4}, UV L1 {holdout_uv_l1:.4}");
    let checkpoint = p.checkpoint()?;
    if let Some(dir) = out {
        checkpoint.save(&dir.join("uvgen.ckpt"))?;
    }
    Ok(PretrainOutcome { uvgen: p.uvgen, step_losses, epoch_losses, holdout_accuracy, holdout_uv_l1, checkpoint })
}

/// Load the UV generator from a pretraining checkpoint, checking that it
/// matches the requested layout.
pub fn load_pretrained_uvgen(ckpt: &Checkpoint, n_parts: usize, config: &UvGenConfig) -> Result<UvGenerator<f32>> {
    if ckpt.kind != "pretrain" {
        return Err(Error::Version(format!("expected a pretraining checkpoint, got {:?}", ckpt.kind)));
    }
    ckpt.check_hash(&uvgen_hash(n_parts, config)?)?;
    let mut u = UvGenerator::new(config, n_parts, &mut ChaCha8Rng::seed_from_u64(0));
    ckpt.load_store("uvgen", &mut u.params)?;
    Ok(u)
}
