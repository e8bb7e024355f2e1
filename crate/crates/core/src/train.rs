//! Joint training on consecutive frame pairs.

use std::path::{Path, PathBuf};

use hytex_tensor::{Adam, AdamConfig, Graph, ParamStore, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::background::{init_background, BackgroundImage};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::losses::{
    gan_loss, total_objective, Discriminator, FeatureExtractor, LossLog, LossTerms, LossWeights, ObjectiveOptions,
    PairOutputs, FEATURE_SEED,
};
use crate::model::{Model, ModelConfig};
use crate::pose::PoseLabelImage;
use crate::scene::SyntheticSequence;
use crate::split::{split_frames, Split};
use crate::texture::initialize_from_frames;
use crate::uvgen::UvGenerator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Dataset directory; used by the command-line tool.
    pub dataset: Option<PathBuf>,
    pub model: ModelConfig,
    pub epochs: usize,
    /// Truncate each epoch to this many pair steps.
    pub steps_per_epoch: Option<usize>,
    pub loss_weights: LossWeights,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub seed: u64,
    /// Write a checkpoint every this many epochs (0: only the final one).
    pub checkpoint_every: usize,
    pub disc_steps_per_gen_step: usize,
    pub adversarial: bool,
    /// Supervise the static-colour composite as well.
    pub regular_loss: bool,
    pub validation_fraction: f64,
    pub validation_block: usize,
    /// Size of the challenging-pose subset in evaluation.
    pub robust_m: usize,
    /// Initialize the background from only the first this-many training frames.
    pub bg_init_frames: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: None,
            model: ModelConfig::default(),
            epochs: 30,
            steps_per_epoch: None,
            loss_weights: LossWeights::default(),
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            seed: 0,
            checkpoint_every: 0,
            disc_steps_per_gen_step: 1,
            adversarial: true,
            regular_loss: true,
            validation_fraction: 0.1,
            validation_block: 10,
            robust_m: 10,
            bg_init_frames: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.loss_weights.validate()?;
        for (f, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(f, "must be in [0, 1)"));
            }
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction", "must be in [0, 1)"));
        }
        if self.validation_block == 0 {
            return Err(Error::config("validation_block", "must be positive"));
        }
        if self.bg_init_frames == Some(0) {
            return Err(Error::config("bg_init_frames", "must be positive"));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        let cfg: TrainConfig =
            serde_json::from_slice(&bytes).map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.loss_weights.learning_rate, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: 1e-8 }
    }

    fn options(&self) -> ObjectiveOptions {
        ObjectiveOptions { adversarial: self.adversarial, regular: self.regular_loss }
    }
}

/// Per-epoch pair order, independent of earlier epochs.
fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (epoch + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[derive(Serialize)]
struct NanDump<'a> {
    step: u64,
    epoch: u64,
    frame_pair: [usize; 2],
    terms: &'a LossTerms,
    non_finite_parameters: Vec<String>,
}

pub struct Trainer<'a> {
    pub config: TrainConfig,
    pub model: Model,
    pub discriminator: Discriminator<f32>,
    /// Background before any training step.
    pub initial_background: BackgroundImage<f32>,
    pub split: Split,
    /// Completed epochs and generator steps.
    pub epoch: u64,
    pub step: u64,
    seq: &'a SyntheticSequence,
    poses: Vec<PoseLabelImage>,
    features: FeatureExtractor<f32>,
    gen_opt: Adam<f32>,
    disc_opt: Adam<f32>,
    /// Where `nan_dump.json` goes on numerical failure.
    pub dump_dir: Option<PathBuf>,
}

impl<'a> Trainer<'a> {
    /// Initialize texture and background from the training frames and the
    /// networks from `seed` (or `pretrained` for the UV generator).
    pub fn new(config: &TrainConfig, seq: &'a SyntheticSequence, pretrained: Option<&UvGenerator<f32>>) -> Result<Self> {
        config.validate()?;
        let mc = &config.model;
        if seq.n_parts() != mc.n_parts {
            return Err(Error::config("model.n_parts", format!("dataset has {} parts", seq.n_parts())));
        }
        if [seq.height(), seq.width()] != mc.image_size {
            return Err(Error::config("model.image_size", format!("dataset frames are {}x{}", seq.height(), seq.width())));
        }
        if seq.flow_gt.len() + 1 != seq.len() || seq.confidence_gt.len() + 1 != seq.len() {
            return Err(Error::Data("dataset lacks flow or confidence for consecutive frames".into()));
        }
        let split = split_frames(seq.len(), config.validation_block, config.validation_fraction, config.seed)?;
        if split.train_pairs().is_empty() {
            return Err(Error::Data("no consecutive training frame pairs".into()));
        }
        let texture = initialize_from_frames(seq, &split.train, mc.texture_resolution)?.texture;
        let bg_frames: Vec<usize> = split.train.iter().copied().take(config.bg_init_frames.unwrap_or(usize::MAX)).collect();
        let frames: Vec<_> = bg_frames.iter().map(|&t| &seq.frames[t]).collect();
        let masks: Vec<_> = bg_frames.iter().map(|&t| seq.part_id_gt[t].foreground_mask()).collect();
        let background = init_background(&frames, &masks)?.background;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Model::new(mc, seq.skeleton.clone(), texture, background.clone(), pretrained.cloned(), &mut rng)?;
        let discriminator = Discriminator::new(&mc.discriminator, &mut rng);
        let mut gen_opt = Adam::new(config.adam());
        gen_opt.add_group("uvgen", &model.uvgen.params);
        if let Some(d) = &model.d2g {
            gen_opt.add_group("d2g", &d.params);
        }
        gen_opt.add_group("texture", model.texture.params());
        gen_opt.add_group("background", model.background.params());
        let mut disc_opt = Adam::new(config.adam());
        disc_opt.add_group("disc", &discriminator.params);
        let poses = seq.keypoints.iter().map(|k| model.rasterize(k)).collect::<Result<Vec<_>>>()?;
        Ok(Trainer {
            config: config.clone(),
            model,
            discriminator,
            initial_background: background,
            split,
            epoch: 0,
            step: 0,
            seq,
            poses,
            features: FeatureExtractor::new(FEATURE_SEED),
            gen_opt,
            disc_opt,
            dump_dir: None,
        })
    }

    /// Restore a trainer from a checkpoint written by [`Trainer::checkpoint`].
    pub fn resume(seq: &'a SyntheticSequence, ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != "train" {
            return Err(Error::Version(format!("expected a training checkpoint, got {:?}", ckpt.kind)));
        }
        let config: TrainConfig = serde_json::from_value(
            ckpt.config.get("train").cloned().ok_or_else(|| Error::Version("checkpoint has no training configuration".into()))?,
        )
        .map_err(|e| Error::Version(format!("checkpoint training configuration: {e}")))?;
        let mut t = Trainer::new(&config, seq, None)?;
        t.model = Model::from_checkpoint(ckpt, Some(&config.model))?;
        ckpt.load_store("disc", &mut t.discriminator.params)?;
        ckpt.load_optimizer("optim/gen", &mut t.gen_opt)?;
        ckpt.load_optimizer("optim/disc", &mut t.disc_opt)?;
        if let Some(bg) = ckpt.get("initial_background/values") {
            t.initial_background = BackgroundImage::from_image(bg.clone())?;
        }
        t.epoch = ckpt.epoch;
        t.step = ckpt.step;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let desc = serde_json::json!({ "train": self.config, "model": self.model.description()? });
        let mut c = Checkpoint::new("train", desc, self.config.model.hash()?, self.step, self.epoch);
        self.model.write_tensors(&mut c);
        c.insert_store("initial_background", self.initial_background.params());
        c.insert_store("disc", &self.discriminator.params);
        c.insert_optimizer("optim/gen", &self.gen_opt);
        c.insert_optimizer("optim/disc", &self.disc_opt);
        Ok(c)
    }

    pub fn poses(&self) -> &[PoseLabelImage] {
        &self.poses
    }

    pub fn sequence(&self) -> &SyntheticSequence {
        self.seq
    }

    fn non_finite_parameters(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let mut scan = |prefix: &str, store: &ParamStore<f32>| {
            for (name, t) in store.iter() {
                if !t.all_finite() {
                    bad.push(format!("{prefix}/{name}"));
                }
            }
        };
        scan("uvgen", &self.model.uvgen.params);
        if let Some(d) = &self.model.d2g {
            scan("d2g", &d.params);
        }
        scan("texture", self.model.texture.params());
        scan("background", self.model.background.params());
        scan("disc", &self.discriminator.params);
        bad
    }

    fn numerical_failure(&self, t: usize, terms: &LossTerms, what: &str) -> Error {
        let dump = NanDump {
            step: self.step,
            epoch: self.epoch,
            frame_pair: [t - 1, t],
            terms,
            non_finite_parameters: self.non_finite_parameters(),
        };
        let mut msg = format!("{what} at step {} (frames {} and {t}): {terms:?}", self.step, t - 1);
        if let Some(dir) = &self.dump_dir {
            let path = dir.join("nan_dump.json");
            let written = std::fs::create_dir_all(dir)
                .map_err(Error::from)
                .and_then(|_| Ok(std::fs::write(&path, serde_json::to_vec_pretty(&dump)?)?));
            if written.is_ok() {
                msg.push_str(&format!("; diagnostics in {}", path.display()));
            }
        }
        Error::Numerical(msg)
    }

    /// One optimizer step on the frame pair `(t - 1, t)`.
    pub fn train_pair(&mut self, t: usize) -> Result<LossTerms> {
        if t == 0 || t >= self.seq.len() {
            return Err(Error::Argument(format!("frame pair ending at {t} is outside the sequence")));
        }
        let g = Graph::new();
        let vars = self.model.bind(&g, true);
        let pose = g.constant(Tensor::cat_batch(&[&self.poses[t - 1].0, &self.poses[t].0]).expect("pose labels share a shape"));
        let real = g.constant(Tensor::cat_batch(&[&self.seq.frames[t - 1], &self.seq.frames[t]]).expect("frames share a shape"));
        let out = self.model.forward(&vars, pose, vars.background)?;
        let disc_train = self.discriminator.params.bind(&g, true);
        let disc_frozen = self.discriminator.params.bind(&g, false);
        let pair = PairOutputs { pose, synthesized: out.synthesized, static_synthesized: out.static_synthesized, real };
        let obj = total_objective(
            &pair,
            self.seq.flow_gt.get(t - 1),
            self.seq.confidence_gt.get(t - 1),
            &self.discriminator,
            &disc_train,
            &disc_frozen,
            &self.features,
            &self.config.loss_weights,
            self.config.options(),
        )?;
        let terms = obj.terms;
        if !(terms.g_total.is_finite() && terms.d_total.is_finite()) {
            return Err(self.numerical_failure(t, &terms, "non-finite loss"));
        }
        // The generator total never reaches the trainable discriminator
        // leaves and the discriminator total only sees detached fakes, so one
        // backward pass yields both sets of gradients.
        let update_disc = self.config.adversarial && self.config.disc_steps_per_gen_step > 0;
        let root = if update_disc { obj.g_total + obj.d_total } else { obj.g_total };
        let grads = g.backward(root);
        let uv_g = vars.uvgen.grads(&grads);
        let d2g_g = vars.d2g.as_ref().map(|b| b.grads(&grads));
        let tex_g = vec![grads.get_or_zero(vars.texture)];
        let bg_g = vec![grads.get_or_zero(vars.background)];
        let disc_g = disc_train.grads(&grads);
        let finite = uv_g.iter().chain(d2g_g.iter().flatten()).chain(&tex_g).chain(&bg_g).chain(&disc_g).all(|t| t.all_finite());
        if !finite {
            return Err(self.numerical_failure(t, &terms, "non-finite gradient"));
        }
        let syn = (*out.synthesized.value()).clone();
        drop(grads);
        drop(g);

        let mut updates: Vec<(&mut ParamStore<f32>, &[Tensor<f32>])> = vec![(&mut self.model.uvgen.params, &uv_g)];
        if let (Some(d), Some(gr)) = (self.model.d2g.as_mut(), d2g_g.as_ref()) {
            updates.push((&mut d.params, gr));
        }
        updates.push((self.model.texture.params_mut(), &tex_g));
        updates.push((self.model.background.params_mut(), &bg_g));
        self.gen_opt.step(&mut updates);
        self.model.background.clamp();
        if update_disc {
            self.disc_opt.step(&mut [(&mut self.discriminator.params, &disc_g)]);
            for _ in 1..self.config.disc_steps_per_gen_step {
                self.extra_disc_step(t, &syn)?;
            }
        }
        self.step += 1;
        Ok(terms)
    }

    /// Further discriminator update on the same pair and fakes.
    fn extra_disc_step(&mut self, t: usize, fake: &Tensor<f32>) -> Result<()> {
        let g = Graph::new();
        let d = self.discriminator.params.bind(&g, true);
        let mut loss = g.constant(Tensor::scalar(0.0));
        for (i, frame) in [t - 1, t].into_iter().enumerate() {
            let pose = g.constant(self.poses[frame].0.clone());
            let real = self.discriminator.logits(&d, pose, g.constant(self.seq.frames[frame].clone()));
            let fake = self.discriminator.logits(&d, pose, g.constant(fake.narrow_batch(i, 1)));
            loss = loss + gan_loss(real, fake).0;
        }
        let grads = d.grads(&g.backward(loss));
        self.disc_opt.step(&mut [(&mut self.discriminator.params, &grads)]);
        Ok(())
    }

    /// Shuffled pass over the training pairs.
    pub fn run_epoch(&mut self, mut log: Option<&mut LossLog>) -> Result<Vec<LossTerms>> {
        let mut pairs = self.split.train_pairs();
        pairs.shuffle(&mut epoch_rng(self.config.seed, self.epoch));
        if let Some(s) = self.config.steps_per_epoch {
            pairs.truncate(s);
        }
        let mut terms = Vec::with_capacity(pairs.len());
        for t in pairs {
            let tm = self.train_pair(t)?;
            if let Some(l) = log.as_deref_mut() {
                l.record(self.step, &tm)?;
            }
            terms.push(tm);
        }
        self.epoch += 1;
        let n = terms.len().max(1) as f64;
        log::info!(
            "epoch {} g_total {:.4} d_total {:.4}",
            self.epoch,
            terms.iter().map(|t| t.g_total).sum::<f64>() / n,
            terms.iter().map(|t| t.d_total).sum::<f64>() / n
        );
        Ok(terms)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub discriminator: Discriminator<f32>,
    pub initial_background: BackgroundImage<f32>,
    pub split: Split,
    pub losses: Vec<LossTerms>,
    pub checkpoint: Checkpoint,
}

/// Train for the configured epochs. With `out`, writes `losses.csv`,
/// periodic `checkpoint_epoch_%03d.ckpt` files and the final `model.ckpt`.
pub fn train(
    config: &TrainConfig,
    seq: &SyntheticSequence,
    pretrained: Option<&UvGenerator<f32>>,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config, seq, pretrained)?;
    trainer.dump_dir = out.map(Path::to_path_buf);
    let mut log = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Some(LossLog::create(&dir.join("losses.csv"))?)
        }
        None => None,
    };
    let mut losses = Vec::new();
    while (trainer.epoch as usize) < config.epochs {
        losses.extend(trainer.run_epoch(log.as_mut())?);
        if let Some(dir) = out {
            if config.checkpoint_every > 0 && trainer.epoch as usize % config.checkpoint_every == 0 {
                trainer.checkpoint()?.save(&dir.join(format!("checkpoint_epoch_{:03}.ckpt", trainer.epoch)))?;
            }
        }
    }
    let checkpoint = trainer.checkpoint()?;
    if let Some(dir) = out {
        checkpoint.save(&dir.join("model.ckpt"))?;
    }
    Ok(TrainOutcome {
        model: trainer.model,
        discriminator: trainer.discriminator,
        initial_background: trainer.initial_background,
        split: trainer.split,
        losses,
        checkpoint,
    })
}
