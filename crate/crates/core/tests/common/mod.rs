//! Direct recomputations shared by the oracle tests and the acceptance run.
#![allow(dead_code)]

use hytex::losses::{total_objective, Discriminator, DiscriminatorConfig, FeatureExtractor, LossWeights, ObjectiveOptions, PairOutputs};
use hytex::metrics::temporal_error;
use hytex::pose::KeypointSet;
use hytex::scene::{brute_force_unwrap, SyntheticSequence};
use hytex::texture::initialize_from_video;
use hytex::warp::{warp, ConfidenceMask, FlowField};
use hytex_tensor::{Graph, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bilinear backward warp written out pixel by pixel, zero outside the image.
pub fn warp_oracle(img: &Tensor<f64>, flow: &FlowField) -> Tensor<f64> {
    let s = img.shape();
    Tensor::from_fn(s, |n, c, y, x| {
        let sx = x as f64 + flow.0.at(0, 0, y, x) as f64;
        let sy = y as f64 + flow.0.at(0, 1, y, x) as f64;
        let (x0, y0) = (sx.floor(), sy.floor());
        let mut acc = 0.0;
        for (dx, dy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let (cx, cy) = (x0 + dx, y0 + dy);
            let wt = (1.0 - (sx - cx).abs()) * (1.0 - (sy - cy).abs());
            if cx >= 0.0 && cy >= 0.0 && cx < s.w as f64 && cy < s.h as f64 {
                acc += wt * img.at(n, c, cy as usize, cx as usize);
            }
        }
        acc
    })
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn mean_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mean(v: &Tensor<f64>, f: impl Fn(f64) -> f64) -> f64 {
    v.data().iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64
}

/// Largest texel difference between the fast initialization and the
/// exhaustive unwrap over covered texels, and whether coverage agrees.
pub fn texture_init_gap(seq: &SyntheticSequence, r: usize) -> (f64, bool, usize) {
    let init = initialize_from_video(seq, r).unwrap();
    let oracle = brute_force_unwrap(seq, r);
    let (mut worst, mut agree, mut compared) = (0.0f64, init.uncovered_parts == oracle.uncovered_parts(), 0);
    for p in 0..seq.n_parts() {
        for row in 0..r {
            for col in 0..r {
                agree &= init.covered[p][row * r + col] == oracle.covered(p, row, col);
                if !oracle.covered(p, row, col) {
                    continue;
                }
                compared += 1;
                for c in 0..3 {
                    let got = init.texture.values().at(p, c, row, col) as f64;
                    worst = worst.max((got - oracle.colors[p].at(0, c, row, col)).abs());
                }
            }
        }
    }
    (worst, agree, compared)
}

pub fn random_poses(n: usize, joints: usize, rng: &mut ChaCha8Rng) -> Vec<KeypointSet> {
    (0..n)
        .map(|_| {
            let mut k = KeypointSet::all_visible((0..joints).map(|_| [rng.gen_range(0.0..64.0), rng.gen_range(0.0..64.0)]).collect());
            for v in k.visibility.iter_mut().skip(1) {
                *v = rng.gen_bool(0.8);
            }
            k
        })
        .collect()
}

/// Repeatedly take the farthest remaining pose; first index wins ties.
pub fn challenging_oracle(val: &[KeypointSet], train: &[KeypointSet], m: usize) -> Vec<usize> {
    let nearest: Vec<f64> = val
        .iter()
        .map(|v| {
            train
                .iter()
                .map(|t| {
                    let mut s = 0.0;
                    for j in 0..v.points.len() {
                        if v.visibility[j] && t.visibility[j] {
                            s += (v.points[j][0] - t.points[j][0]).powi(2) + (v.points[j][1] - t.points[j][1]).powi(2);
                        }
                    }
                    s.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; val.len()];
    let mut out = Vec::new();
    for _ in 0..m {
        let mut best: Option<usize> = None;
        for i in 0..val.len() {
            if !taken[i] && best.map_or(true, |b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

/// `(library, recomputed)` temporal error of a random clip of `n` frames.
pub fn temporal_error_pair(seed: u64, n: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (7, 9);
    let frames: Vec<Tensor<f32>> = (0..n).map(|_| Tensor::uniform(Shape::new(1, 3, h, w), 0.0, 1.0, &mut rng)).collect();
    let flows: Vec<FlowField> = (1..n).map(|_| FlowField(Tensor::uniform(Shape::new(1, 2, h, w), -3.0, 3.0, &mut rng))).collect();
    let confs: Vec<ConfidenceMask> = (1..n)
        .map(|_| ConfidenceMask(Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, _, _| if rng.gen_bool(0.7) { 1.0 } else { 0.0 })))
        .collect();
    let mut total = 0.0;
    for t in 1..n {
        let warped = warp_oracle(&frames[t - 1].cast(), &flows[t - 1]);
        let mut pair = 0.0;
        for y in 0..h {
            for x in 0..w {
                let c = confs[t - 1].0.at(0, 0, y, x) as f64;
                for ch in 0..3 {
                    pair += c * (frames[t].at(0, ch, y, x) as f64 - warped.at(0, ch, y, x)).abs();
                }
            }
        }
        total += pair / (h * w) as f64;
    }
    let got = temporal_error(&frames.iter().collect::<Vec<_>>(), &flows.iter().collect::<Vec<_>>(), &confs.iter().collect::<Vec<_>>()).unwrap();
    (got, total / (n - 1) as f64)
}

/// `(term, library value, recomputed value)` for every term of the pair objective.
pub fn objective_terms(seed: u64, options: ObjectiveOptions) -> Vec<(&'static str, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (16, 16);
    let pose = Tensor::<f64>::uniform(Shape::new(2, 6, h, w), 0.0, 1.0, &mut rng);
    let syn = Tensor::<f64>::uniform(Shape::new(2, 3, h, w), 0.0, 1.0, &mut rng);
    let stat = Tensor::<f64>::uniform(Shape::new(2, 3, h, w), 0.0, 1.0, &mut rng);
    let real = Tensor::<f64>::uniform(Shape::new(2, 3, h, w), 0.0, 1.0, &mut rng);
    let flow = FlowField(Tensor::uniform(Shape::new(1, 2, h, w), -2.0, 2.0, &mut rng));
    let conf = ConfidenceMask(Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, _, _| if rng.gen_bool(0.8) { 1.0 } else { 0.0 }));
    let disc = Discriminator::<f64>::new(&DiscriminatorConfig { width: 4 }, &mut rng);
    let features = FeatureExtractor::<f64>::new(seed);
    let weights = LossWeights::default();

    let g = Graph::new();
    let out = PairOutputs {
        pose: g.constant(pose.clone()),
        synthesized: g.leaf(syn.clone()),
        static_synthesized: g.leaf(stat.clone()),
        real: g.constant(real.clone()),
    };
    let (dt, df) = (disc.params.bind(&g, true), disc.params.bind(&g, false));
    let obj = total_objective(&out, Some(&flow), Some(&conf), &disc, &dt, &df, &features, &weights, options).unwrap();

    // every term from plain arithmetic on values computed in separate graphs
    let frame = |t: &Tensor<f64>, i: usize| t.narrow_batch(i, 1);
    let logits = |p: &Tensor<f64>, img: &Tensor<f64>| -> Tensor<f64> {
        let g = Graph::new();
        let b = disc.params.bind(&g, false);
        (*disc.logits(&b, g.constant(p.clone()), g.constant(img.clone())).value()).clone()
    };
    let feats = |img: &Tensor<f64>| -> Vec<Tensor<f64>> {
        let g = Graph::new();
        features.features(g.constant(img.clone())).iter().map(|v| (*v.value()).clone()).collect()
    };
    let sup = |a: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
        let mse = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
        let perc: f64 = feats(a).iter().zip(feats(b)).map(|(fa, fb)| mean_abs_diff(fa, &fb)).sum();
        weights.l2 * mse.sqrt() + weights.perceptual * perc
    };
    let (mut gan_g, mut gan_d, mut supervised, mut regular) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..2 {
        let (p, s, r) = (frame(&pose, i), frame(&syn, i), frame(&real, i));
        if options.adversarial {
            let lr = logits(&p, &r);
            let lf = logits(&p, &s);
            gan_d += mean(&lr, |x| softplus(-x)) + mean(&lf, softplus);
            gan_g += mean(&lf, |x| softplus(-x));
        }
        supervised += sup(&s, &r);
        if options.regular {
            regular += sup(&frame(&stat, i), &r);
        }
    }
    let warped = warp_oracle(&frame(&syn, 0), &flow);
    let cur = frame(&syn, 1);
    let mut temporal = 0.0;
    for y in 0..h {
        for x in 0..w {
            let c = conf.0.at(0, 0, y, x) as f64;
            temporal += c * (0..3).map(|ch| (cur.at(0, ch, y, x) - warped.at(0, ch, y, x)).abs()).sum::<f64>();
        }
    }
    temporal /= (h * w) as f64;
    let g_total = gan_g + supervised + regular + weights.temporal * temporal;

    let t = obj.terms;
    vec![
        ("gan_g", t.gan_g, gan_g),
        ("gan_d", t.gan_d, gan_d),
        ("supervised", t.supervised, supervised),
        ("regular", t.regular, regular),
        ("temporal", t.temporal, temporal),
        ("g_total", t.g_total, g_total),
        ("d_total", t.d_total, gan_d),
        ("g_total graph", obj.g_total.item(), g_total),
        ("d_total graph", obj.d_total.item(), gan_d),
    ]
}

/// Relative difference, measured against `max(|want|, 1)`.
pub fn rel_gap(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

/// Largest `|warp(frames[t-1]) - frames[t]|` over confidence-1 pixels, and how
/// many pixels were compared.
pub fn rigid_warp_gap(seq: &SyntheticSequence) -> (f64, usize) {
    let (mut worst, mut checked) = (0.0f64, 0);
    for t in 1..seq.len() {
        let warped = warp(&seq.frames[t - 1].cast::<f64>(), &seq.flow_gt[t - 1]).unwrap();
        for y in 0..seq.height() {
            for x in 0..seq.width() {
                if seq.confidence_gt[t - 1].0.at(0, 0, y, x) != 1.0 {
                    continue;
                }
                checked += 1;
                for c in 0..3 {
                    worst = worst.max((warped.at(0, c, y, x) - seq.frames[t].at(0, c, y, x) as f64).abs());
                }
            }
        }
    }
    (worst, checked)
}
