//! Self-transfer evaluation on the validation split.

use crate::error::{Error, Result};
use crate::metrics::{part_iou, temporal_error, EvalReport};
use crate::model::Model;
use crate::pose::KeypointSet;
use crate::scene::{PartMap, SyntheticSequence};
use crate::split::Split;
use crate::Image;

/// Mean temporal error over every consecutive pair inside the validation
/// blocks. `results[k]` is the rendering of frame `split.validation[k]`.
pub fn block_temporal_error(results: &[Image], seq: &SyntheticSequence, split: &Split) -> Result<f64> {
    let (mut total, mut pairs) = (0.0, 0usize);
    for block in &split.validation_blocks {
        if block.len() < 2 {
            continue;
        }
        let frames: Vec<&Image> = block.clone().map(|t| position(split, t).map(|k| &results[k])).collect::<Result<_>>()?;
        let flows: Vec<_> = block.clone().skip(1).map(|t| &seq.flow_gt[t - 1]).collect();
        let confs: Vec<_> = block.clone().skip(1).map(|t| &seq.confidence_gt[t - 1]).collect();
        total += temporal_error(&frames, &flows, &confs)? * (block.len() - 1) as f64;
        pairs += block.len() - 1;
    }
    if pairs == 0 {
        return Err(Error::Data("validation blocks contain no consecutive frames".into()));
    }
    Ok(total / pairs as f64)
}

fn position(split: &Split, t: usize) -> Result<usize> {
    split.validation.iter().position(|&v| v == t).ok_or_else(|| Error::Data(format!("frame {t} is not in the validation split")))
}

/// Report for externally produced validation renderings.
pub fn evaluate_frames(results: &[Image], seq: &SyntheticSequence, split: &Split, m: usize) -> Result<EvalReport> {
    if results.len() != split.validation.len() {
        return Err(Error::shape("evaluate", format!("{} results for {} validation frames", results.len(), split.validation.len())));
    }
    let gts: Vec<&Image> = split.validation.iter().map(|&t| &seq.frames[t]).collect();
    let refs: Vec<&Image> = results.iter().collect();
    let val_poses: Vec<KeypointSet> = split.validation.iter().map(|&t| seq.keypoints[t].clone()).collect();
    let train_poses: Vec<KeypointSet> = split.train.iter().map(|&t| seq.keypoints[t].clone()).collect();
    let te = block_temporal_error(results, seq, split)?;
    EvalReport::compute(split.validation.clone(), &refs, &gts, &val_poses, &train_poses, m, te)
}

/// Render every validation pose.
pub fn render_validation(model: &Model, seq: &SyntheticSequence, split: &Split) -> Result<Vec<Image>> {
    split.validation.iter().map(|&t| model.render(&model.rasterize(&seq.keypoints[t])?, None)).collect()
}

/// Render the validation poses and score them against the ground truth.
pub fn evaluate(model: &Model, seq: &SyntheticSequence, split: &Split, m: usize) -> Result<EvalReport> {
    evaluate_frames(&render_validation(model, seq, split)?, seq, split, m)
}

/// Foreground part IoU of the model's argmax labels on `frames`.
pub fn part_label_iou(model: &Model, seq: &SyntheticSequence, frames: &[usize]) -> Result<f64> {
    let pred: Vec<PartMap> =
        frames.iter().map(|&t| model.predict_parts(&model.rasterize(&seq.keypoints[t])?)).collect::<Result<_>>()?;
    let gt: Vec<PartMap> = frames.iter().map(|&t| seq.part_id_gt[t].clone()).collect();
    part_iou(&pred, &gt, model.config.n_parts)
}
