//! Image quality and temporal stability metrics.

use std::io::Write;
use std::path::Path;

use hytex_tensor::{Shape, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::{select_challenging, KeypointSet};
use crate::scene::PartMap;
use crate::warp::{warp, ConfidenceMask, FlowField};
use crate::Image;

/// SSIM constants with a unit dynamic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        SsimConfig { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

fn check_same(op: &'static str, a: &Image, b: &Image) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{} vs {}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `10 log10(1 / MSE)` with a peak of 1; identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    check_same("psnr", a, b)?;
    let mse = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Luma with BT.601 weights.
pub fn grayscale(img: &Image) -> Vec<f64> {
    let s = img.shape();
    (0..s.plane())
        .map(|i| 0.299 * img.plane(0, 0)[i] as f64 + 0.587 * img.plane(0, 1)[i] as f64 + 0.114 * img.plane(0, 2)[i] as f64)
        .collect()
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    let mut w = Vec::with_capacity(size * size);
    for a in &g {
        for b in &g {
            w.push(a * b / (s * s));
        }
    }
    w
}

/// Mean local SSIM of the luma channels over all fully contained windows.
pub fn ssim_with(a: &Image, b: &Image, cfg: &SsimConfig) -> Result<f64> {
    check_same("ssim", a, b)?;
    let s = a.shape();
    let k = cfg.window;
    if s.h < k || s.w < k {
        return Err(Error::Argument(format!("image {}x{} smaller than the {k}x{k} SSIM window", s.h, s.w)));
    }
    let (ga, gb) = (grayscale(a), grayscale(b));
    let win = gaussian_window(k, cfg.sigma);
    let c1 = (cfg.k1).powi(2);
    let c2 = (cfg.k2).powi(2);
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=s.h - k {
        for x in 0..=s.w - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for dy in 0..k {
                for dx in 0..k {
                    let i = (y + dy) * s.w + x + dx;
                    let wt = win[dy * k + dx];
                    ma += wt * ga[i];
                    mb += wt * gb[i];
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for dy in 0..k {
                for dx in 0..k {
                    let i = (y + dy) * s.w + x + dx;
                    let wt = win[dy * k + dx];
                    let (da, db) = (ga[i] - ma, gb[i] - mb);
                    va += wt * da * da;
                    vb += wt * db * db;
                    cov += wt * da * db;
                }
            }
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, &SsimConfig::default())
}

/// Confidence-weighted L1 between each frame and its flow-warped predecessor,
/// channels summed, averaged over pixels and pairs.
pub fn temporal_error(frames: &[&Image], flows: &[&FlowField], confidences: &[&ConfidenceMask]) -> Result<f64> {
    if frames.len() < 2 {
        return Err(Error::Data(format!("temporal error needs at least 2 frames, got {}", frames.len())));
    }
    if flows.len() != frames.len() - 1 || confidences.len() != frames.len() - 1 {
        return Err(Error::Data(format!(
            "{} frames need {} flows and confidences, got {} and {}",
            frames.len(),
            frames.len() - 1,
            flows.len(),
            confidences.len()
        )));
    }
    let s = frames[0].shape();
    let plane = s.plane();
    let mut total = 0.0;
    for t in 1..frames.len() {
        check_same("temporal_error", frames[t], frames[0])?;
        let prev: Tensor<f64> = frames[t - 1].cast();
        let warped = warp(&prev, flows[t - 1])?;
        let conf = &confidences[t - 1].0;
        if conf.shape() != Shape::new(1, 1, s.h, s.w) {
            return Err(Error::shape("temporal_error", format!("confidence {} vs frame {s}", conf.shape())));
        }
        let mut pair = 0.0;
        for i in 0..plane {
            let c = conf.data()[i] as f64;
            if c == 0.0 {
                continue;
            }
            let d: f64 = (0..s.c).map(|ch| (frames[t].plane(0, ch)[i] as f64 - warped.plane(0, ch)[i]).abs()).sum();
            pair += c * d;
        }
        total += pair / plane as f64;
    }
    Ok(total / (frames.len() - 1) as f64)
}

/// Mean intersection-over-union of the foreground part labels, accumulated
/// over all frames; parts absent from both maps are skipped.
pub fn part_iou(predicted: &[PartMap], ground_truth: &[PartMap], n_parts: usize) -> Result<f64> {
    if predicted.len() != ground_truth.len() || predicted.is_empty() {
        return Err(Error::shape("part_iou", format!("{} predictions for {} label maps", predicted.len(), ground_truth.len())));
    }
    let mut inter = vec![0usize; n_parts + 1];
    let mut union = vec![0usize; n_parts + 1];
    for (p, g) in predicted.iter().zip(ground_truth) {
        if p.ids.len() != g.ids.len() {
            return Err(Error::shape("part_iou", format!("{} vs {} pixels", p.ids.len(), g.ids.len())));
        }
        for (&a, &b) in p.ids.iter().zip(&g.ids) {
            let (a, b) = (a as usize, b as usize);
            if a > n_parts || b > n_parts {
                return Err(Error::Data(format!("part id above {n_parts}")));
            }
            if a == b {
                inter[a] += 1;
                union[a] += 1;
            } else {
                union[a] += 1;
                union[b] += 1;
            }
        }
    }
    let ious: Vec<f64> = (1..=n_parts).filter(|&i| union[i] > 0).map(|i| inter[i] as f64 / union[i] as f64).collect();
    Ok(if ious.is_empty() { 1.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustMetrics {
    pub indices: Vec<usize>,
    pub ssim: f64,
    pub psnr: f64,
}

/// SSIM and PSNR averaged over the `m` validation frames whose poses are
/// farthest from the training poses.
pub fn robust_subset_metrics(
    results: &[&Image],
    ground_truth: &[&Image],
    validation_poses: &[KeypointSet],
    training_poses: &[KeypointSet],
    m: usize,
) -> Result<RobustMetrics> {
    if results.len() != ground_truth.len() || results.len() != validation_poses.len() {
        return Err(Error::shape(
            "robust_subset_metrics",
            format!("{} results, {} ground-truth frames, {} poses", results.len(), ground_truth.len(), validation_poses.len()),
        ));
    }
    let indices = select_challenging(validation_poses, training_poses, m)?;
    let (mut s, mut p) = (0.0, 0.0);
    for &i in &indices {
        s += ssim(results[i], ground_truth[i])?;
        p += psnr(results[i], ground_truth[i])?;
    }
    let k = indices.len().max(1) as f64;
    Ok(RobustMetrics { indices, ssim: s / k, psnr: p / k })
}

/// Serialize `f64` with infinities as the strings `"inf"` / `"-inf"`.
pub mod inf_sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Text("inf".into())
        } else if v == f64::NEG_INFINITY {
            Repr::Text("-inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(s) => Err(E::custom(format!("unexpected number string {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|&x| to_repr(x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub ssim: f64,
    #[serde(with = "inf_sentinel")]
    pub psnr: f64,
    pub robust_ssim: f64,
    #[serde(with = "inf_sentinel")]
    pub robust_psnr: f64,
    pub temporal_error: f64,
    /// Dataset frame index of each evaluated frame.
    pub frames: Vec<usize>,
    pub per_frame_ssim: Vec<f64>,
    #[serde(with = "inf_sentinel::vec")]
    pub per_frame_psnr: Vec<f64>,
    /// Positions (into `frames`) of the challenging-pose subset.
    pub challenging_indices: Vec<usize>,
    pub m: usize,
}

impl EvalReport {
    /// Assemble a report from per-frame results.
    pub fn compute(
        frame_ids: Vec<usize>,
        results: &[&Image],
        ground_truth: &[&Image],
        validation_poses: &[KeypointSet],
        training_poses: &[KeypointSet],
        m: usize,
        temporal_error: f64,
    ) -> Result<Self> {
        let per_frame_ssim = results.iter().zip(ground_truth).map(|(a, b)| ssim(a, b)).collect::<Result<Vec<_>>>()?;
        let per_frame_psnr = results.iter().zip(ground_truth).map(|(a, b)| psnr(a, b)).collect::<Result<Vec<_>>>()?;
        let robust = robust_subset_metrics(results, ground_truth, validation_poses, training_poses, m)?;
        let n = results.len().max(1) as f64;
        Ok(EvalReport {
            ssim: per_frame_ssim.iter().sum::<f64>() / n,
            psnr: per_frame_psnr.iter().sum::<f64>() / n,
            robust_ssim: robust.ssim,
            robust_psnr: robust.psnr,
            temporal_error,
            frames: frame_ids,
            per_frame_ssim,
            per_frame_psnr,
            challenging_indices: robust.indices,
            m,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Per-frame CSV: `frame,ssim,psnr,challenging`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "frame,ssim,psnr,challenging")?;
        for (k, &frame) in self.frames.iter().enumerate() {
            let p = self.per_frame_psnr[k];
            let p = if p.is_infinite() { "inf".to_string() } else { p.to_string() };
            writeln!(f, "{frame},{},{p},{}", self.per_frame_ssim[k], self.challenging_indices.contains(&k) as u8)?;
        }
        f.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, seed: u64) -> Image {
        Tensor::uniform(Shape::new(1, 3, h, w), 0.0, 0.9, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn psnr_examples() {
        let a = random(8, 8, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = Tensor::full(Shape::new(1, 3, 4, 4), 0.25f32);
        let c = Tensor::full(Shape::new(1, 3, 4, 4), 0.5f32);
        assert!((psnr(&b, &c).unwrap() - 10.0 * (16.0f64).log10()).abs() < 1e-9);
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let a = random(16, 16, 2);
        let b = random(16, 16, 3);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!(matches!(ssim(&random(8, 16, 1), &random(8, 16, 2)), Err(Error::Argument(_))));
    }

    #[test]
    fn static_video_has_zero_temporal_error() {
        let a = random(6, 6, 4);
        let f = FlowField::zeros(6, 6);
        let c = ConfidenceMask::ones(6, 6);
        assert_eq!(temporal_error(&[&a, &a, &a], &[&f, &f], &[&c, &c]).unwrap(), 0.0);
        assert!(matches!(temporal_error(&[&a, &a], &[], &[]), Err(Error::Data(_))));
    }

    #[test]
    fn report_round_trips_with_infinite_psnr() {
        let a = random(12, 12, 5);
        let kp = vec![KeypointSet::all_visible(vec![[0.0, 0.0]])];
        let r = EvalReport::compute(vec![7], &[&a], &[&a], &kp, &kp, 1, 0.0).unwrap();
        assert_eq!(r.psnr, f64::INFINITY);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    }

    #[test]
    fn part_iou_counts_per_part_overlap() {
        let map = |ids: Vec<u8>| PartMap { height: 1, width: ids.len(), ids };
        let gt = map(vec![0, 1, 1, 2, 2]);
        assert_eq!(part_iou(&[gt.clone()], &[gt.clone()], 3).unwrap(), 1.0);
        // part 1: 1/3, part 2: 2/3
        let pred = map(vec![1, 1, 2, 2, 2]);
        let iou = part_iou(&[pred], &[gt], 3).unwrap();
        assert!((iou - 0.5).abs() < 1e-12);
    }
}
