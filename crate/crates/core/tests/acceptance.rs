//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! The training criteria share five runs on one 300-frame 64x64 scene with
//! eight parts, all from the same seed and budget.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use hytex::background::{composite, composite_values};
use hytex::checkpoint::Checkpoint;
use hytex::d2g::{D2gConfig, DetailRenderer};
use hytex::evaluate::{evaluate, part_label_iou};
use hytex::losses::ObjectiveOptions;
use hytex::mapping::{blend_parts, sample_part};
use hytex::metrics::{psnr, EvalReport};
use hytex::model::{infer, Model};
use hytex::pose::{rasterize_pose, select_challenging, PoseLabelImage, POSE_CHANNELS};
use hytex::pretrain::{pretrain_uv, PretrainConfig};
use hytex::scene::{generate_sequence, PartMap, SceneConfig, SyntheticSequence};
use hytex::train::{TrainConfig, Trainer};
use hytex::uvgen::{uv_pretrain_loss, UvGenConfig, UvGenerator, UvTargets};
use hytex::warp::{reset_warp_invocations, warp, warp_invocations, FlowField};
use hytex_tensor::{check_gradients, Bound, Graph, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPOCHS: usize = 4;
const ROBUST_M: usize = 10;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn run(results: &mut Vec<bool>, n: usize, title: &str, f: impl FnOnce() -> Verdict) {
    let start = Instant::now();
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
    });
    println!(
        "{} criterion {n:>2} {title}: {} [{:.1} s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        start.elapsed().as_secs_f64()
    );
    results.push(v.pass);
}

fn worst(reports: &[hytex_tensor::GradCheckReport]) -> f64 {
    reports.iter().map(|r| r.relative_error).fold(0.0, f64::max)
}

fn differentiability() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let (mut sample, mut blend, mut warp_e, mut details, mut uvloss) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..3 {
        let tex = Tensor::<f64>::uniform(Shape::new(1, 5, 4, 4), -1.0, 1.0, &mut r);
        let coords = Tensor::<f64>::uniform(Shape::new(2, 2, 3, 5), 0.02, 0.98, &mut r);
        let w = Tensor::<f64>::uniform(Shape::new(2, 5, 3, 5), -1.0, 1.0, &mut r);
        sample = sample.max(worst(&check_gradients(&[tex, coords], 1e-6, None, |g, v| {
            (sample_part(g, v[0], v[1]).unwrap() * g.constant(w.clone())).square().sum()
        })));

        let probs = Tensor::<f64>::uniform(Shape::new(2, 4, 3, 3), 0.0, 1.0, &mut r);
        let samples: Vec<_> = (0..3).map(|_| Tensor::<f64>::uniform(Shape::new(2, 5, 3, 3), -1.0, 1.0, &mut r)).collect();
        let w = Tensor::<f64>::uniform(Shape::new(2, 5, 3, 3), -1.0, 1.0, &mut r);
        let mut inputs = vec![probs];
        inputs.extend(samples);
        blend = blend.max(worst(&check_gradients(&inputs, 1e-6, None, |g, v| {
            (blend_parts(v[0], &v[1..]).unwrap() * g.constant(w.clone())).square().sum()
        })));

        let img = Tensor::<f64>::uniform(Shape::new(1, 3, 6, 7), -1.0, 1.0, &mut r);
        let flow = FlowField(Tensor::uniform(Shape::new(1, 2, 6, 7), -2.5, 2.5, &mut r));
        let w = Tensor::<f64>::uniform(Shape::new(1, 3, 6, 7), -1.0, 1.0, &mut r);
        warp_e = warp_e.max(worst(&check_gradients(&[img], 1e-6, None, |g, v| {
            (hytex::warp::warp_var(g, v[0], &flow).unwrap() * g.constant(w.clone())).square().sum()
        })));
    }
    for seed in 0..2 {
        let cfg = D2gConfig { width: 4, pose_width: 3, residual_blocks: 1, pose_conditioning: true };
        let net = DetailRenderer::<f64>::new(&cfg, &mut rng(200 + seed));
        let feature = Tensor::<f64>::uniform(Shape::new(1, 18, 8, 8), -1.0, 1.0, &mut r);
        let pose = Tensor::<f64>::uniform(Shape::new(1, POSE_CHANNELS, 8, 8), 0.0, 1.0, &mut r);
        let w = Tensor::<f64>::uniform(Shape::new(1, 3, 8, 8), -1.0, 1.0, &mut r);
        details = details.max(worst(&check_gradients(&[feature.clone(), pose.clone()], 1e-6, Some(48), |g, v| {
            let p = net.params.bind(g, false);
            (net.forward(&p, v[0], v[1]).unwrap() * g.constant(w.clone())).sum()
        })));
        details = details.max(worst(&check_gradients(net.params.values(), 1e-6, Some(16), |g, v| {
            let p = Bound::from_vars(v.to_vec());
            (net.forward(&p, g.constant(feature.clone()), g.constant(pose.clone())).unwrap() * g.constant(w.clone())).sum()
        })));

        let uv = UvGenerator::<f64>::new(&UvGenConfig { width: 4, instance_norm: false }, 3, &mut rng(300 + seed));
        let parts = PartMap { height: 8, width: 8, ids: (0..64).map(|_| r.gen_range(0..4u8)).collect() };
        let gt = Tensor::<f32>::uniform(Shape::new(1, 2, 8, 8), 0.0, 1.0, &mut r);
        let targets = UvTargets::<f64>::new(&[&parts], &[&gt], 3).unwrap();
        let pose = Tensor::<f64>::uniform(Shape::new(1, POSE_CHANNELS, 8, 8), 0.0, 1.0, &mut r);
        uvloss = uvloss.max(worst(&check_gradients(uv.params.values(), 1e-6, Some(16), |g, v| {
            let p = Bound::from_vars(v.to_vec());
            uv_pretrain_loss(&uv.forward(&p, g.constant(pose.clone())).unwrap(), &targets).unwrap().total
        })));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = sample < 1e-4 && blend < 1e-4 && warp_e < 1e-4 && details < 1e-3 && uvloss < 1e-3 && secs < 60.0;
    verdict(
        pass,
        format!(
            "max relative error sample_part {sample:.1e}, blend_parts {blend:.1e}, warp {warp_e:.1e} (< 1e-4); \
             render_details {details:.1e}, uv_pretrain_loss {uvloss:.1e} (< 1e-3); {secs:.1} s of 60"
        ),
    )
}

fn normalization(scene: &SyntheticSequence) -> Verdict {
    let start = Instant::now();
    let mut r = rng(102);
    let mut worst_sum = 0.0f64;
    let mut negative = false;
    for k in 0..100u64 {
        let net = UvGenerator::<f32>::new(&UvGenConfig::default(), 8, &mut rng(400 + k / 10));
        let pose = if k % 2 == 0 {
            rasterize_pose(&scene.keypoints[(k as usize * 7) % scene.len()], &scene.skeleton, [64, 64]).unwrap()
        } else {
            PoseLabelImage(Tensor::uniform(Shape::new(1, POSE_CHANNELS, 64, 64), 0.0, 1.0, &mut r))
        };
        let pred = net.predict_uv(&pose).unwrap();
        for i in 0..64 * 64 {
            let s: f64 = (0..9).map(|c| pred.part_probs.plane(0, c)[i] as f64).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
        }
        negative |= pred.part_probs.min() < 0.0;
    }

    // compositing stays between foreground and background
    let mut range_ok = true;
    let mut extremes_ok = true;
    for _ in 0..20 {
        let s = Shape::new(1, 3, 9, 11);
        let fg = Tensor::<f64>::uniform(s, 0.0, 1.0, &mut r);
        let bg = Tensor::<f64>::uniform(s, 0.0, 1.0, &mut r);
        let p0 = Tensor::<f64>::uniform(Shape::new(1, 1, 9, 11), 0.0, 1.0, &mut r);
        let out = composite_values(&fg, &bg, &p0).unwrap();
        for i in 0..out.len() {
            let (a, b, o) = (fg.data()[i], bg.data()[i], out.data()[i]);
            range_ok &= o >= a.min(b) - 1e-15 && o <= a.max(b) + 1e-15 && (0.0..=1.0).contains(&o);
        }
        let g = Graph::new();
        let via_graph = composite(g.constant(fg.clone()), g.constant(bg.clone()), g.constant(p0.clone())).unwrap();
        range_ok &= *via_graph.value() == out;
        extremes_ok &= composite_values(&fg, &bg, &Tensor::zeros(p0.shape())).unwrap() == fg;
        extremes_ok &= composite_values(&fg, &bg, &Tensor::ones(p0.shape())).unwrap() == bg;
    }

    // the part blend is linear in the samples and a one-hot P selects one part
    let mut linear_gap = 0.0f64;
    let mut one_hot_ok = true;
    for _ in 0..20 {
        let (a, b) = (r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0));
        let s = Shape::new(1, 4, 5, 6);
        let probs = Tensor::<f64>::uniform(Shape::new(1, 4, 5, 6), 0.0, 1.0, &mut r);
        let xs: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(s, -1.0, 1.0, &mut r)).collect();
        let ys: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(s, -1.0, 1.0, &mut r)).collect();
        let g = Graph::new();
        let blend = |ts: &[Tensor<f64>]| -> Tensor<f64> {
            let vars: Vec<_> = ts.iter().map(|t| g.constant(t.clone())).collect();
            (*blend_parts(g.constant(probs.clone()), &vars).unwrap().value()).clone()
        };
        let mixed: Vec<Tensor<f64>> = xs.iter().zip(&ys).map(|(x, y)| x.zip_map(y, |p, q| a * p + b * q)).collect();
        let lhs = blend(&mixed);
        let (bx, by) = (blend(&xs), blend(&ys));
        for i in 0..lhs.len() {
            linear_gap = linear_gap.max((lhs.data()[i] - (a * bx.data()[i] + b * by.data()[i])).abs());
        }
        for k in 0..4 {
            let hot = Tensor::from_fn(Shape::new(1, 4, 5, 6), |_, c, _, _| if c == k { 1.0 } else { 0.0 });
            let vars: Vec<_> = xs.iter().map(|t| g.constant(t.clone())).collect();
            let out = blend_parts(g.constant(hot), &vars).unwrap().value();
            one_hot_ok &= if k == 0 { out.max_abs() == 0.0 } else { *out == xs[k - 1] };
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_sum <= 1e-5 && !negative && range_ok && extremes_ok && linear_gap < 1e-12 && one_hot_ok && secs < 30.0;
    verdict(
        pass,
        format!(
            "max |sum P - 1| {worst_sum:.1e} over 100 passes, P >= 0: {}; composite within [fg, bg]: {range_ok}, \
             P0 extremes exact: {extremes_ok}; blend linearity gap {linear_gap:.1e}, one-hot reduction: {one_hot_ok}; {secs:.1} s of 30",
            !negative
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let seq = generate_sequence(&SceneConfig::desk(21, 8, 20, 32)).unwrap();
    let mut tex_gap = 0.0f64;
    let mut coverage_ok = true;
    for res in [16, 32] {
        let (w, agree, compared) = texture_init_gap(&seq, res);
        tex_gap = tex_gap.max(w);
        coverage_ok &= agree && compared > 0;
    }

    let mut r = rng(103);
    let mut selection_ok = true;
    for _ in 0..200 {
        let nv = r.gen_range(1..15);
        let val = random_poses(nv, 9, &mut r);
        let train = random_poses(r.gen_range(1..12), 9, &mut r);
        let m = r.gen_range(0..=nv);
        selection_ok &= select_challenging(&val, &train, m).unwrap() == challenging_oracle(&val, &train, m);
    }
    let desk = generate_sequence(&SceneConfig::desk(5, 8, 120, 64)).unwrap();
    let split = hytex::split::split_frames(desk.len(), 10, 0.1, 5).unwrap();
    let val: Vec<_> = split.validation.iter().map(|&t| desk.keypoints[t].clone()).collect();
    let train: Vec<_> = split.train.iter().map(|&t| desk.keypoints[t].clone()).collect();
    selection_ok &= select_challenging(&val, &train, ROBUST_M).unwrap() == challenging_oracle(&val, &train, ROBUST_M);

    let mut te_gap = 0.0f64;
    for seed in 0..100 {
        let (got, want) = temporal_error_pair(seed, 2 + seed as usize % 4);
        te_gap = te_gap.max((got - want).abs());
    }

    let mut obj_gap = 0.0f64;
    for seed in 0..2 {
        for options in [
            ObjectiveOptions::default(),
            ObjectiveOptions { adversarial: false, regular: true },
            ObjectiveOptions { adversarial: true, regular: false },
        ] {
            for (_, got, want) in objective_terms(seed, options) {
                obj_gap = obj_gap.max(rel_gap(got, want));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = tex_gap < 1e-6 && coverage_ok && selection_ok && te_gap < 1e-9 && obj_gap < 1e-6 && secs < 60.0;
    verdict(
        pass,
        format!(
            "texture init vs unwrap {tex_gap:.1e} (coverage equal: {coverage_ok}); challenging selection exact: {selection_ok}; \
             temporal error gap {te_gap:.1e}; objective term gap {obj_gap:.1e}; {secs:.1} s of 60"
        ),
    )
}

fn warp_exactness() -> Verdict {
    let start = Instant::now();
    let mut r = rng(104);
    let img = Tensor::<f64>::uniform(Shape::new(2, 3, 20, 24), -1.0, 1.0, &mut r);
    let identity = warp(&img, &FlowField::zeros(20, 24)).unwrap() == img;

    let mut shift_ok = true;
    for (dx, dy) in [(1i64, 0i64), (0, 1), (-2, 3), (5, -4)] {
        let out = warp(&img, &FlowField::constant(20, 24, dx as f32, dy as f32)).unwrap();
        for n in 0..2 {
            for c in 0..3 {
                for y in 0..20i64 {
                    for x in 0..24i64 {
                        let (sx, sy) = (x + dx, y + dy);
                        let want = if (0..24).contains(&sx) && (0..20).contains(&sy) { img.at(n, c, sy as usize, sx as usize) } else { 0.0 };
                        shift_ok &= out.at(n, c, y as usize, x as usize) == want;
                    }
                }
            }
        }
    }

    let mut rigid_gap = 0.0f64;
    let mut checked = 0;
    for (k, step) in [[1.0, 0.0], [0.0, -1.0], [2.0, 1.0], [-1.0, -1.0]].into_iter().enumerate() {
        let seq = generate_sequence(&SceneConfig::desk(30 + k as u64, 8, 8, 64).with_translation(step)).unwrap();
        let (w, c) = rigid_warp_gap(&seq);
        rigid_gap = rigid_gap.max(w);
        checked += c;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = identity && shift_ok && rigid_gap < 1e-6 && checked > 0 && secs < 30.0;
    verdict(
        pass,
        format!(
            "zero flow bit-exact: {identity}; integer shifts exact: {shift_ok}; rigid scenes max |warp - next| {rigid_gap:.1e} \
             over {checked} confident pixels; {secs:.1} s of 30"
        ),
    )
}

struct RunResult {
    name: &'static str,
    g_totals: Vec<f64>,
    report: EvalReport,
    iou: f64,
    bg_init_psnr: f64,
    bg_psnr: f64,
    secs: f64,
    model: Model,
    checkpoint: Checkpoint,
}

fn train_variant(name: &'static str, cfg: &TrainConfig, seq: &SyntheticSequence, pre: &UvGenerator<f32>) -> RunResult {
    let start = Instant::now();
    let mut t = Trainer::new(cfg, seq, Some(pre)).unwrap();
    let bg_init_psnr = psnr(&t.model.background.to_image(), &seq.background_gt).unwrap();
    let mut g_totals = Vec::new();
    for _ in 0..cfg.epochs {
        g_totals.extend(t.run_epoch(None).unwrap().iter().map(|l| l.g_total));
    }
    let report = evaluate(&t.model, seq, &t.split, ROBUST_M).unwrap();
    let iou = part_label_iou(&t.model, seq, &t.split.validation).unwrap();
    let bg_psnr = psnr(&t.model.background.to_image(), &seq.background_gt).unwrap();
    let r = RunResult { name, g_totals, report, iou, bg_init_psnr, bg_psnr, secs: start.elapsed().as_secs_f64(), checkpoint: t.checkpoint().unwrap(), model: t.model };
    println!(
        "  run {:<7} ssim {:.4} psnr {:.2} dB, temporal error {:.5}, part IoU {:.4}, background {:.2} -> {:.2} dB, {:.0} s",
        r.name, r.report.ssim, r.report.psnr, r.report.temporal_error, r.iou, r.bg_init_psnr, r.bg_psnr, r.secs
    );
    r
}

struct Runs {
    full: RunResult,
    no_temporal: RunResult,
    no_detail: RunResult,
    no_condition: RunResult,
    no_regular: RunResult,
    seq: SyntheticSequence,
    validation: Vec<usize>,
}

fn training_runs() -> Runs {
    let start = Instant::now();
    let scenes: Vec<_> = (0..2).map(|s| generate_sequence(&SceneConfig::desk(100 + s, 8, 100, 64)).unwrap()).collect();
    let pre = pretrain_uv(&PretrainConfig::default(), &scenes, None).unwrap();
    println!(
        "  UV pretraining on 2 scenes: held-out part accuracy {:.3}, {:.0} s",
        pre.holdout_accuracy,
        start.elapsed().as_secs_f64()
    );
    let seq = generate_sequence(&SceneConfig::desk(7, 8, 300, 64)).unwrap();
    let mut base = TrainConfig { epochs: EPOCHS, bg_init_frames: Some(5), robust_m: ROBUST_M, ..Default::default() };
    base.model.d2g.width = 16;
    base.model.d2g.residual_blocks = 2;
    let variant = |f: &dyn Fn(&mut TrainConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let full = train_variant("full", &base, &seq, &pre.uvgen);
    let no_temporal = train_variant("temp0", &variant(&|c| c.loss_weights.temporal = 0.0), &seq, &pre.uvgen);
    let no_detail = train_variant("nod2g", &variant(&|c| c.model.detail_network = false), &seq, &pre.uvgen);
    let no_condition = train_variant("nocond", &variant(&|c| c.model.d2g.pose_conditioning = false), &seq, &pre.uvgen);
    let no_regular = train_variant("noreg", &variant(&|c| c.regular_loss = false), &seq, &pre.uvgen);
    let validation = hytex::split::split_frames(seq.len(), base.validation_block, base.validation_fraction, base.seed).unwrap().validation;
    Runs { full, no_temporal, no_detail, no_condition, no_regular, seq, validation }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn training_sanity(runs: &Runs) -> Verdict {
    let g = &runs.full.g_totals;
    let window = (g.len() / 20).max(1);
    let (early, late) = (mean(&g[..window]), mean(&g[g.len() - window..]));
    let drop = 1.0 - late / early;
    let r = &runs.full.report;
    let pass = drop >= 0.5 && r.ssim >= 0.85 && r.psnr >= 25.0 && runs.full.secs < 3.0 * 3600.0;
    verdict(
        pass,
        format!(
            "g_total {early:.2} (first {window} steps) -> {late:.2} (last {window}), drop {:.0}% (>= 50%); \
             validation ssim {:.4} (>= 0.85), psnr {:.2} dB (>= 25); {} steps in {:.0} s",
            100.0 * drop,
            r.ssim,
            r.psnr,
            g.len(),
            runs.full.secs
        ),
    )
}

fn temporal_direction(runs: &Runs) -> Verdict {
    let (with, without) = (runs.full.report.temporal_error, runs.no_temporal.report.temporal_error);
    verdict(with < without, format!("temporal error {with:.5} with temporal weight 100 vs {without:.5} with 0"))
}

fn detail_direction(runs: &Runs) -> Verdict {
    let full = runs.full.report.psnr;
    let (nd, nc) = (runs.no_detail.report.psnr, runs.no_condition.report.psnr);
    verdict(
        full >= nd && full >= nc,
        format!("validation psnr full {full:.2} dB, without detail network {nd:.2} dB, without pose condition {nc:.2} dB"),
    )
}

fn regular_direction(runs: &Runs) -> Verdict {
    let (with, without) = (runs.full.iou, runs.no_regular.iou);
    verdict(with >= without, format!("foreground part IoU {with:.4} with the static-branch loss vs {without:.4} without"))
}

fn background_recovery(runs: &Runs) -> Verdict {
    let (init, refined) = (runs.full.bg_init_psnr, runs.full.bg_psnr);
    verdict(refined >= 25.0 && refined >= init, format!("background psnr {init:.2} dB at initialization -> {refined:.2} dB refined (>= 25)"))
}

fn inference_path(runs: &Runs) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let kps: Vec<_> = runs.validation.iter().map(|&t| runs.seq.keypoints[t].clone()).collect();
    reset_warp_invocations();
    let a = infer(&runs.full.model, &kps, None, &dir.path().join("a")).unwrap();
    let b = infer(&runs.full.model, &kps, None, &dir.path().join("b")).unwrap();

    let path = dir.path().join("model.ckpt");
    runs.full.checkpoint.save(&path).unwrap();
    let reloaded = Model::from_checkpoint(&Checkpoint::load(&path).unwrap(), Some(&runs.full.model.config)).unwrap();
    let c = infer(&reloaded, &kps, None, &dir.path().join("c")).unwrap();
    let calls = warp_invocations();
    let reloaded_frames = c.frames;
    let same_frames = a.frames == b.frames && a.frames == reloaded_frames;
    let same_files = std::fs::read(&a.video_path).unwrap() == std::fs::read(&b.video_path).unwrap()
        && a.frame_paths.iter().zip(&b.frame_paths).all(|(p, q)| std::fs::read(p).unwrap() == std::fs::read(q).unwrap());
    verdict(
        calls == 0 && same_frames && same_files,
        format!(
            "warp invocations during three inference runs of {} frames: {calls}; frames bit-identical: {same_frames}; \
             PNG and video bytes identical: {same_files}",
            kps.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results = Vec::new();
    run(&mut results, 1, "differentiability", differentiability);
    let scene = generate_sequence(&SceneConfig::desk(3, 8, 50, 64)).unwrap();
    run(&mut results, 2, "normalization and partition", || normalization(&scene));
    run(&mut results, 3, "oracle equivalence", oracle_equivalence);
    run(&mut results, 4, "warp exactness", warp_exactness);

    println!(
        "  training budget: 300 frames of 64x64, 8 parts, {EPOCHS} epochs per run, detail network width 16 with 2 residual blocks, \
         pretrained UV generator, background initialized from 5 frames"
    );
    let runs_start = Instant::now();
    match catch_unwind(training_runs) {
        Ok(runs) => {
            println!("  all training runs: {:.0} s", runs_start.elapsed().as_secs_f64());
            run(&mut results, 5, "end-to-end training", || training_sanity(&runs));
            run(&mut results, 6, "temporal loss direction", || temporal_direction(&runs));
            run(&mut results, 7, "detail network direction", || detail_direction(&runs));
            run(&mut results, 8, "static-branch loss direction", || regular_direction(&runs));
            run(&mut results, 9, "background recovery", || background_recovery(&runs));
            run(&mut results, 10, "inference path", || inference_path(&runs));
        }
        Err(_) => {
            for (n, title) in [
                (5, "end-to-end training"),
                (6, "temporal loss direction"),
                (7, "detail network direction"),
                (8, "static-branch loss direction"),
                (9, "background recovery"),
                (10, "inference path"),
            ] {
                run(&mut results, n, title, || verdict(false, "training runs failed".into()));
            }
        }
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed in {:.0} s", results.len(), start.elapsed().as_secs_f64());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
