//! Encoder-decoder mapping a pose label to part probabilities and per-part UVs.

use hytex_tensor::{Bound, Graph, ParamStore, Real, Shape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv, LEAK};
use crate::pose::{PoseLabelImage, POSE_CHANNELS};
use crate::scene::PartMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UvGenConfig {
    /// Channels at full resolution; doubled at each of the two downsamplings.
    pub width: usize,
    pub instance_norm: bool,
}

impl Default for UvGenConfig {
    fn default() -> Self {
        UvGenConfig { width: 16, instance_norm: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layers {
    enc1: Conv,
    enc2: Conv,
    enc3: Conv,
    mid: Conv,
    dec2: Conv,
    dec1: Conv,
    head: Conv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UvGenerator<F: Real = f32> {
    pub params: ParamStore<F>,
    pub config: UvGenConfig,
    n_parts: usize,
    layers: Layers,
}

/// Graph outputs of one forward pass.
#[derive(Clone, Copy)]
pub struct UvOutput<'g, F: Real> {
    /// `B x (N+1) x H x W`, channel 0 = background.
    pub probs: Var<'g, F>,
    pub log_probs: Var<'g, F>,
    /// `B x 2N x H x W`; part `i` (1-based) owns channels `2(i-1)` (u) and `2(i-1)+1` (v).
    pub coords: Var<'g, F>,
}

/// Per-pixel part probabilities and UV coordinates for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct UvPrediction {
    /// `1 x (N+1) x H x W`
    pub part_probs: Tensor<f32>,
    /// `1 x 2N x H x W`
    pub coords: Tensor<f32>,
}

impl UvPrediction {
    pub fn n_parts(&self) -> usize {
        self.part_probs.shape().c - 1
    }

    /// Most probable label per pixel (0 = background), lowest index on ties.
    pub fn argmax_parts(&self) -> PartMap {
        argmax_labels(&self.part_probs, 0)
    }
}

pub(crate) fn argmax_labels<F: Real>(probs: &Tensor<F>, batch: usize) -> PartMap {
    let s = probs.shape();
    let mut ids = vec![0u8; s.h * s.w];
    for (i, id) in ids.iter_mut().enumerate() {
        let mut best = (probs.plane(batch, 0)[i], 0);
        for c in 1..s.c {
            let v = probs.plane(batch, c)[i];
            if v > best.0 {
                best = (v, c);
            }
        }
        *id = best.1 as u8;
    }
    PartMap { height: s.h, width: s.w, ids }
}

impl<F: Real> UvGenerator<F> {
    pub fn new<R: Rng + ?Sized>(config: &UvGenConfig, n_parts: usize, rng: &mut R) -> Self {
        let w = config.width;
        let mut p = ParamStore::new();
        let layers = Layers {
            enc1: Conv::new(&mut p, "enc1", POSE_CHANNELS, w, 3, 1, rng),
            enc2: Conv::new(&mut p, "enc2", w, 2 * w, 3, 2, rng),
            enc3: Conv::new(&mut p, "enc3", 2 * w, 4 * w, 3, 2, rng),
            mid: Conv::new(&mut p, "mid", 4 * w, 4 * w, 3, 1, rng),
            dec2: Conv::new(&mut p, "dec2", 6 * w, 2 * w, 3, 1, rng),
            dec1: Conv::new(&mut p, "dec1", 3 * w, w, 3, 1, rng),
            head: Conv::new(&mut p, "head", w, 3 * n_parts + 1, 1, 1, rng),
        };
        UvGenerator { params: p, config: config.clone(), n_parts, layers }
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn cast<G: Real>(&self) -> UvGenerator<G> {
        UvGenerator { params: self.params.cast(), config: self.config.clone(), n_parts: self.n_parts, layers: self.layers.clone() }
    }

    fn block<'g>(&self, p: &Bound<'g, F>, conv: &Conv, x: Var<'g, F>) -> Var<'g, F> {
        let y = conv.apply(p, x);
        let y = if self.config.instance_norm { y.instance_norm(1e-5) } else { y };
        y.leaky_relu(LEAK)
    }

    /// Forward pass on a `B x 6 x H x W` pose batch; `H` and `W` must be multiples of 4.
    pub fn forward<'g>(&self, p: &Bound<'g, F>, pose: Var<'g, F>) -> Result<UvOutput<'g, F>> {
        let s = pose.shape();
        if s.c != POSE_CHANNELS || s.h % 4 != 0 || s.w % 4 != 0 || s.h == 0 || s.w == 0 {
            return Err(Error::shape("predict_uv", format!("expected Bx6xHxW with H, W multiples of 4, got {s}")));
        }
        let g = pose.graph();
        let l = &self.layers;
        let e1 = self.block(p, &l.enc1, pose);
        let e2 = self.block(p, &l.enc2, e1);
        let e3 = self.block(p, &l.enc3, e2);
        let m = self.block(p, &l.mid, e3);
        let d2 = self.block(p, &l.dec2, g.cat_channels(&[m.upsample_nearest(2), e2]));
        let d1 = self.block(p, &l.dec1, g.cat_channels(&[d2.upsample_nearest(2), e1]));
        let head = l.head.apply(p, d1);
        let n = self.n_parts;
        let logits = head.narrow_channels(0, n + 1);
        Ok(UvOutput {
            probs: logits.softmax_channels(),
            log_probs: logits.log_softmax_channels(),
            coords: head.narrow_channels(n + 1, 2 * n).sigmoid(),
        })
    }

    /// Inference on one pose label.
    pub fn predict_uv(&self, pose: &PoseLabelImage) -> Result<UvPrediction> {
        let g = Graph::<F>::new();
        let p = self.params.bind(&g, false);
        let out = self.forward(&p, g.constant(pose.0.cast()))?;
        let part_probs = out.probs.value().cast();
        let coords = out.coords.value().cast();
        Ok(UvPrediction { part_probs, coords })
    }
}

/// Ground truth for the pretraining objective, batched like the pose input.
#[derive(Debug, Clone)]
pub struct UvTargets<F> {
    /// `B x (N+1) x H x W` one-hot labels.
    pub one_hot: Tensor<F>,
    /// `B x 2N x H x W`; ground-truth UV in the owning part's channels, zero elsewhere.
    pub coords: Tensor<F>,
    /// 1 where `coords` is defined.
    pub coord_mask: Tensor<F>,
    pub foreground_pixels: usize,
}

impl<F: Real> UvTargets<F> {
    /// Build from per-frame part maps and `1 x 2 x H x W` UV maps.
    pub fn new(parts: &[&PartMap], uvs: &[&Tensor<f32>], n_parts: usize) -> Result<Self> {
        if parts.len() != uvs.len() || parts.is_empty() {
            return Err(Error::shape("uv targets", format!("{} part maps vs {} uv maps", parts.len(), uvs.len())));
        }
        let (h, w) = (parts[0].height, parts[0].width);
        let b = parts.len();
        let mut one_hot = Tensor::zeros(Shape::new(b, n_parts + 1, h, w));
        let mut coords = Tensor::zeros(Shape::new(b, 2 * n_parts, h, w));
        let mut coord_mask = Tensor::zeros(Shape::new(b, 2 * n_parts, h, w));
        let mut fg = 0;
        for (k, (pm, uv)) in parts.iter().zip(uvs).enumerate() {
            if pm.height != h || pm.width != w || uv.shape() != Shape::new(1, 2, h, w) {
                return Err(Error::shape("uv targets", format!("frame {k} does not match {h}x{w}")));
            }
            for y in 0..h {
                for x in 0..w {
                    let id = pm.at(x, y) as usize;
                    if id > n_parts {
                        return Err(Error::Data(format!("part id {id} exceeds {n_parts} parts")));
                    }
                    one_hot.set(k, id, y, x, F::one());
                    if id > 0 {
                        fg += 1;
                        for a in 0..2 {
                            coords.set(k, 2 * (id - 1) + a, y, x, F::lit(uv.at(0, a, y, x) as f64));
                            coord_mask.set(k, 2 * (id - 1) + a, y, x, F::one());
                        }
                    }
                }
            }
        }
        Ok(UvTargets { one_hot, coords, coord_mask, foreground_pixels: fg })
    }
}

pub struct UvLoss<'g, F: Real> {
    pub total: Var<'g, F>,
    pub cross_entropy: Var<'g, F>,
    pub coord_l1: Var<'g, F>,
}

/// Mean per-pixel cross entropy against the one-hot labels plus the mean over
/// foreground pixels of `|u - u_gt| + |v - v_gt|` for each pixel's own part.
pub fn uv_pretrain_loss<'g, F: Real>(out: &UvOutput<'g, F>, targets: &UvTargets<F>) -> Result<UvLoss<'g, F>> {
    let g = out.probs.graph();
    if out.log_probs.shape() != targets.one_hot.shape() || out.coords.shape() != targets.coords.shape() {
        return Err(Error::shape(
            "uv_pretrain_loss",
            format!("prediction {} / {} vs targets {} / {}", out.log_probs.shape(), out.coords.shape(), targets.one_hot.shape(), targets.coords.shape()),
        ));
    }
    let s = out.log_probs.shape();
    let pixels = (s.n * s.h * s.w) as f64;
    let cross_entropy = (out.log_probs * g.constant(targets.one_hot.clone())).sum().scale(-1.0 / pixels);
    let diff = ((out.coords - g.constant(targets.coords.clone())) * g.constant(targets.coord_mask.clone())).abs().sum();
    let coord_l1 = diff.scale(1.0 / targets.foreground_pixels.max(1) as f64);
    Ok(UvLoss { total: cross_entropy + coord_l1, cross_entropy, coord_l1 })
}

/// Foreground part accuracy and mean UV L1 of a prediction against ground truth.
pub fn uv_accuracy(pred: &UvPrediction, parts: &PartMap, uv: &Tensor<f32>) -> (f64, f64) {
    let labels = pred.argmax_parts();
    let (mut correct, mut fg, mut l1) = (0usize, 0usize, 0.0f64);
    for y in 0..parts.height {
        for x in 0..parts.width {
            let id = parts.at(x, y) as usize;
            if id == 0 {
                continue;
            }
            fg += 1;
            if labels.at(x, y) as usize == id {
                correct += 1;
            }
            for a in 0..2 {
                l1 += (pred.coords.at(0, 2 * (id - 1) + a, y, x) as f64 - uv.at(0, a, y, x) as f64).abs();
            }
        }
    }
    if fg == 0 {
        return (1.0, 0.0);
    }
    (correct as f64 / fg as f64, l1 / fg as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hytex_tensor::check_gradients;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pose(h: usize, w: usize, seed: u64) -> PoseLabelImage {
        PoseLabelImage(Tensor::uniform(Shape::new(1, 6, h, w), 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)))
    }

    fn small() -> UvGenerator<f64> {
        UvGenerator::new(&UvGenConfig { width: 4, instance_norm: false }, 3, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn outputs_are_normalized_and_bounded() {
        let net = small();
        let pred = net.predict_uv(&random_pose(8, 12, 2)).unwrap();
        assert_eq!(pred.part_probs.shape(), Shape::new(1, 4, 8, 12));
        assert_eq!(pred.coords.shape(), Shape::new(1, 6, 8, 12));
        for i in 0..96 {
            let s: f32 = (0..4).map(|c| pred.part_probs.plane(0, c)[i]).sum();
            assert!((s - 1.0).abs() < 1e-5);
        }
        assert!(pred.coords.min() >= 0.0 && pred.coords.max() <= 1.0);
        assert_eq!(pred, net.predict_uv(&random_pose(8, 12, 2)).unwrap());
    }

    #[test]
    fn rejects_wrong_channels_or_sizes() {
        let net = small();
        assert!(matches!(net.predict_uv(&PoseLabelImage(Tensor::zeros(Shape::new(1, 5, 8, 8)))), Err(Error::Shape { .. })));
        assert!(matches!(net.predict_uv(&PoseLabelImage(Tensor::zeros(Shape::new(1, 6, 6, 8)))), Err(Error::Shape { .. })));
    }

    #[test]
    fn uniform_prediction_costs_ln_classes() {
        let g = Graph::<f64>::new();
        let logits = g.constant(Tensor::zeros(Shape::new(1, 25, 4, 4)));
        let out = UvOutput {
            probs: logits.softmax_channels(),
            log_probs: logits.log_softmax_channels(),
            coords: g.constant(Tensor::full(Shape::new(1, 48, 4, 4), 0.5)),
        };
        let parts = PartMap { height: 4, width: 4, ids: (0..16).map(|i| (i % 25) as u8).collect() };
        let uv = Tensor::full(Shape::new(1, 2, 4, 4), 0.5);
        let t = UvTargets::new(&[&parts], &[&uv], 24).unwrap();
        let loss = uv_pretrain_loss(&out, &t).unwrap();
        assert!((loss.cross_entropy.item() - 25f64.ln()).abs() < 1e-12);
        assert_eq!(loss.coord_l1.item(), 0.0);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let net = small();
        let parts = PartMap { height: 4, width: 4, ids: (0..16).map(|i| (i % 4) as u8).collect() };
        let uv = Tensor::uniform(Shape::new(1, 2, 4, 4), 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let t = UvTargets::<f64>::new(&[&parts], &[&uv], 3).unwrap();
        let pose = random_pose(4, 4, 4).0.cast::<f64>();
        let reports = check_gradients(net.params.values(), 1e-6, Some(24), |g, vars| {
            let bound = Bound::from_vars(vars.to_vec());
            let out = net.forward(&bound, g.constant(pose.clone())).unwrap();
            uv_pretrain_loss(&out, &t).unwrap().total
        });
        for r in reports {
            assert!(r.relative_error < 1e-3, "{r:?}");
        }
    }
}
