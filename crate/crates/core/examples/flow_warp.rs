//! Backward-warp frames with the ground-truth flow and measure temporal error.
//!
//! `cargo run --release --example flow_warp`

use hytex::metrics::temporal_error;
use hytex::scene::{generate_sequence, SceneConfig};
use hytex::warp::{warp, FlowField};

fn main() -> anyhow::Result<()> {
    let seq = generate_sequence(&SceneConfig::desk(4, 8, 20, 64))?;
    for t in [1, 10, 19] {
        let warped = warp(&seq.frames[t - 1], &seq.flow_gt[t - 1])?;
        let conf = &seq.confidence_gt[t - 1].0;
        let (mut err, mut n) = (0.0f64, 0usize);
        for y in 0..seq.height() {
            for x in 0..seq.width() {
                if conf.at(0, 0, y, x) > 0.0 {
                    for c in 0..3 {
                        err += (warped.at(0, c, y, x) - seq.frames[t].at(0, c, y, x)).abs() as f64;
                    }
                    n += 1;
                }
            }
        }
        println!("frame {t}: mean |warp(prev) - cur| over {n} confident pixels = {:.4}", err / (3 * n.max(1)) as f64);
    }

    let frames: Vec<_> = seq.frames.iter().collect();
    let flows: Vec<_> = seq.flow_gt.iter().collect();
    let confs: Vec<_> = seq.confidence_gt.iter().collect();
    println!("temporal error of the ground-truth video: {:.5}", temporal_error(&frames, &flows, &confs)?);

    let identity = warp(&seq.frames[0], &FlowField::zeros(seq.height(), seq.width()))?;
    assert_eq!(identity, seq.frames[0]);
    println!("zero flow reproduces the frame exactly");
    Ok(())
}
