//! Training objectives: adversarial, supervised, temporal and their total.
//!
//! All norms inside the losses reduce by mean. The adversarial terms use
//! binary cross-entropy on a patch score map, with the non-saturating form
//! for the generator.

use std::io::Write;
use std::path::Path;

use hytex_tensor::{Bound, ParamStore, Real, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Conv;
use crate::pose::POSE_CHANNELS;
use crate::warp::{warp_var, ConfidenceMask, FlowField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub temporal: f64,
    pub perceptual: f64,
    pub l2: f64,
    pub learning_rate: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { temporal: 100.0, perceptual: 10.0, l2: 200.0, learning_rate: 0.002 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("loss_weights.temporal", self.temporal),
            ("loss_weights.perceptual", self.perceptual),
            ("loss_weights.l2", self.l2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a finite nonnegative number"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("loss_weights.learning_rate", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub width: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { width: 16 }
    }
}

/// Patch discriminator over `concat(pose label, image)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<F: Real = f32> {
    pub params: ParamStore<F>,
    layers: [Conv; 4],
}

impl<F: Real> Discriminator<F> {
    pub fn new<R: rand::Rng + ?Sized>(config: &DiscriminatorConfig, rng: &mut R) -> Self {
        let w = config.width;
        let mut p = ParamStore::new();
        let layers = [
            Conv::new(&mut p, "conv0", POSE_CHANNELS + 3, w, 3, 2, rng),
            Conv::new(&mut p, "conv1", w, 2 * w, 3, 2, rng),
            Conv::new(&mut p, "conv2", 2 * w, 2 * w, 3, 1, rng),
            Conv::new(&mut p, "score", 2 * w, 1, 1, 1, rng),
        ];
        Discriminator { params: p, layers }
    }

    pub fn cast<G: Real>(&self) -> Discriminator<G> {
        Discriminator { params: self.params.cast(), layers: self.layers }
    }

    /// Real/fake logits, `B x 1 x H/4 x W/4`.
    pub fn logits<'g>(&self, p: &Bound<'g, F>, pose: Var<'g, F>, image: Var<'g, F>) -> Var<'g, F> {
        let g = pose.graph();
        let [c0, c1, c2, score] = &self.layers;
        let x = c2.act(p, c1.act(p, c0.act(p, g.cat_channels(&[pose, image]))));
        score.apply(p, x)
    }
}

/// Discriminator loss `-log D(real) - log(1 - D(fake))` and generator loss
/// `-log D(fake)`, each averaged over score elements, from raw logits.
pub fn gan_loss<'g, F: Real>(real_logits: Var<'g, F>, fake_logits: Var<'g, F>) -> (Var<'g, F>, Var<'g, F>) {
    let d = real_logits.scale(-1.0).softplus().mean() + fake_logits.softplus().mean();
    let g = fake_logits.scale(-1.0).softplus().mean();
    (d, g)
}

/// Frozen random convolutional pyramid used as the perceptual feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor<F: Real = f32> {
    params: ParamStore<F>,
    layers: [Conv; 3],
}

pub const FEATURE_SEED: u64 = 0x5EED_F00D;

impl<F: Real> FeatureExtractor<F> {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let layers = [
            Conv::new(&mut p, "level0", 3, 8, 3, 1, &mut rng),
            Conv::new(&mut p, "level1", 8, 16, 3, 1, &mut rng),
            Conv::new(&mut p, "level2", 16, 32, 3, 1, &mut rng),
        ];
        FeatureExtractor { params: p, layers }
    }

    /// Feature maps at full, half and quarter resolution.
    pub fn features<'g>(&self, image: Var<'g, F>) -> Vec<Var<'g, F>> {
        let p = self.params.bind(image.graph(), false);
        let f0 = self.layers[0].act(&p, image);
        let f1 = self.layers[1].act(&p, f0.avg_pool(2));
        let f2 = self.layers[2].act(&p, f1.avg_pool(2));
        vec![f0, f1, f2]
    }
}

fn same_shape(op: &'static str, a: hytex_tensor::Shape, b: hytex_tensor::Shape) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("{a} vs {b}")));
    }
    Ok(())
}

/// `perceptual * sum_levels mean|F(syn) - F(real)| + l2 * sqrt(mean (syn - real)^2)`.
pub fn supervised_loss<'g, F: Real>(
    features: &FeatureExtractor<F>,
    synthesized: Var<'g, F>,
    real: Var<'g, F>,
    weights: &LossWeights,
) -> Result<Var<'g, F>> {
    same_shape("supervised_loss", synthesized.shape(), real.shape())?;
    let rms = (synthesized - real).square().mean().sqrt().scale(weights.l2);
    if weights.perceptual == 0.0 {
        return Ok(rms);
    }
    let fs = features.features(synthesized);
    let fr = features.features(real);
    let mut total = rms;
    for (a, b) in fs.into_iter().zip(fr) {
        total = total + (a - b).abs().mean().scale(weights.perceptual);
    }
    Ok(total)
}

/// `(1 / (H W)) * sum_pixels conf * sum_channels |cur - warp(prev)|` for one image pair.
pub fn temporal_loss<'g, F: Real>(
    current: Var<'g, F>,
    previous: Var<'g, F>,
    flow: &FlowField,
    confidence: &ConfidenceMask,
) -> Result<Var<'g, F>> {
    same_shape("temporal_loss", current.shape(), previous.shape())?;
    confidence.validate()?;
    let s = current.shape();
    let cs = confidence.0.shape();
    if s.n != 1 || cs.h != s.h || cs.w != s.w {
        return Err(Error::shape("temporal_loss", format!("image {s} vs confidence {cs}")));
    }
    let g = current.graph();
    let warped = warp_var(g, previous, flow)?;
    let conf = g.constant(confidence.0.cast());
    Ok(((current - warped).abs() * conf).sum().scale(1.0 / (s.h * s.w) as f64))
}

/// Which terms of the total objective are active.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveOptions {
    pub adversarial: bool,
    /// Supervised loss on the static-colour composite.
    pub regular: bool,
}

impl Default for ObjectiveOptions {
    fn default() -> Self {
        ObjectiveOptions { adversarial: true, regular: true }
    }
}

/// Model outputs for a two-frame batch; index 0 is frame `t-1`, index 1 is frame `t`.
#[derive(Clone, Copy)]
pub struct PairOutputs<'g, F: Real> {
    pub pose: Var<'g, F>,
    pub synthesized: Var<'g, F>,
    pub static_synthesized: Var<'g, F>,
    pub real: Var<'g, F>,
}

/// Sub-terms of the objective, summed over both frames (temporal unweighted).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub g_total: f64,
    pub d_total: f64,
    pub gan_g: f64,
    pub gan_d: f64,
    pub supervised: f64,
    pub regular: f64,
    pub temporal: f64,
}

pub struct Objective<'g, F: Real> {
    pub g_total: Var<'g, F>,
    pub d_total: Var<'g, F>,
    pub terms: LossTerms,
}

/// Generator and discriminator totals for one consecutive pair.
///
/// `disc_train` binds the discriminator as trainable leaves (it sees detached
/// fakes); `disc_frozen` binds the same parameters as constants for the
/// generator's adversarial term.
#[allow(clippy::too_many_arguments)]
pub fn total_objective<'g, F: Real>(
    out: &PairOutputs<'g, F>,
    flow: Option<&FlowField>,
    confidence: Option<&ConfidenceMask>,
    discriminator: &Discriminator<F>,
    disc_train: &Bound<'g, F>,
    disc_frozen: &Bound<'g, F>,
    features: &FeatureExtractor<F>,
    weights: &LossWeights,
    options: ObjectiveOptions,
) -> Result<Objective<'g, F>> {
    let (Some(flow), Some(confidence)) = (flow, confidence) else {
        return Err(Error::Data("frame pair is missing its flow or confidence".into()));
    };
    for (name, v) in [("synthesized", out.synthesized), ("static", out.static_synthesized), ("pose", out.pose)] {
        if v.shape().n != 2 {
            return Err(Error::shape("total_objective", format!("{name} batch {} is not a frame pair", v.shape())));
        }
    }
    let g = out.real.graph();
    let zero = || g.constant(hytex_tensor::Tensor::scalar(F::zero()));
    let mut gan_g = zero();
    let mut gan_d = zero();
    let mut supervised = zero();
    let mut regular = zero();
    for i in 0..2 {
        let pose = out.pose.narrow_batch(i, 1);
        let syn = out.synthesized.narrow_batch(i, 1);
        let real = out.real.narrow_batch(i, 1);
        if options.adversarial {
            let real_logits = discriminator.logits(disc_train, pose, real);
            let fake_for_d = discriminator.logits(disc_train, pose, syn.detach());
            let (d, _) = gan_loss(real_logits, fake_for_d);
            let fake_for_g = discriminator.logits(disc_frozen, pose, syn);
            gan_d = gan_d + d;
            gan_g = gan_g + fake_for_g.scale(-1.0).softplus().mean();
        }
        supervised = supervised + supervised_loss(features, syn, real, weights)?;
        if options.regular {
            regular = regular + supervised_loss(features, out.static_synthesized.narrow_batch(i, 1), real, weights)?;
        }
    }
    let temporal = temporal_loss(out.synthesized.narrow_batch(1, 1), out.synthesized.narrow_batch(0, 1), flow, confidence)?;
    let g_total = gan_g + supervised + regular + temporal.scale(weights.temporal);
    let value = |v: Var<'g, F>| v.item().as_f64();
    let terms = LossTerms {
        g_total: value(g_total),
        d_total: value(gan_d),
        gan_g: value(gan_g),
        gan_d: value(gan_d),
        supervised: value(supervised),
        regular: value(regular),
        temporal: value(temporal),
    };
    Ok(Objective { g_total, d_total: gan_d, terms })
}

pub const LOSS_CSV_HEADER: &str = "step,g_total,d_total,gan_g,gan_d,supervised,regular,temporal";

/// Append-only writer for `losses.csv`.
pub struct LossLog {
    file: std::io::BufWriter<std::fs::File>,
}

impl LossLog {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(file, "{LOSS_CSV_HEADER}")?;
        Ok(LossLog { file })
    }

    pub fn record(&mut self, step: u64, t: &LossTerms) -> Result<()> {
        writeln!(
            self.file,
            "{step},{},{},{},{},{},{},{}",
            t.g_total, t.d_total, t.gan_g, t.gan_d, t.supervised, t.regular, t.temporal
        )?;
        self.file.flush()?;
        Ok(())
    }
}
