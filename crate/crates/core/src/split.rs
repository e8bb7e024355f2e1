//! Train/validation split by contiguous frame blocks.
//!
//! Frames are grouped into blocks of `block` consecutive frames; a seeded
//! random subset of whole blocks is held out, so validation frames keep their
//! neighbours for temporal metrics and training pairs never straddle a
//! held-out frame.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub validation_blocks: Vec<Range<usize>>,
}

pub fn split_frames(n_frames: usize, block: usize, fraction: f64, seed: u64) -> Result<Split> {
    if block == 0 {
        return Err(Error::config("validation_block", "must be positive"));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::config("validation_fraction", "must be in [0, 1)"));
    }
    let n_blocks = n_frames.div_ceil(block);
    let n_val = if fraction == 0.0 { 0 } else { ((n_blocks as f64 * fraction).round() as usize).max(1) };
    if n_val >= n_blocks {
        return Err(Error::Data(format!(
            "{n_frames} frames in blocks of {block} leave no training frames at validation fraction {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5011_7000);
    let mut chosen = rand::seq::index::sample(&mut rng, n_blocks, n_val).into_vec();
    chosen.sort_unstable();
    let validation_blocks: Vec<Range<usize>> = chosen.iter().map(|&b| b * block..((b + 1) * block).min(n_frames)).collect();
    let is_val = |t: usize| validation_blocks.iter().any(|r| r.contains(&t));
    Ok(Split {
        train: (0..n_frames).filter(|&t| !is_val(t)).collect(),
        validation: (0..n_frames).filter(|&t| is_val(t)).collect(),
        validation_blocks,
    })
}

impl Split {
    /// Later frame index `t` of every training pair `(t - 1, t)`.
    pub fn train_pairs(&self) -> Vec<usize> {
        self.train.windows(2).filter(|w| w[1] == w[0] + 1).map(|w| w[1]).collect()
    }
}
