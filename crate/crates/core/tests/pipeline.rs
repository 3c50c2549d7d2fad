mod common;

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use quadtext::evalkit::{
    evaluate, evaluate_images, format_det_file, format_gt_file, match_and_score, EvalOptions, ImageRecord,
};
use quadtext::postprocess::{pnms, pnms_naive};
use quadtext::quadgeom::iou_quad;
use quadtext::targets::{build_pyramid_targets, build_refine_targets, Label, LevelSpec};
use quadtext::{Detection, GroundTruth, Quad};
use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scratch_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quadtext-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(dir.join("gt")).unwrap();
    fs::create_dir_all(dir.join("det")).unwrap();
    dir
}

fn random_scene(rng: &mut ChaCha8Rng, n_gt: usize, n_det: usize) -> (Vec<GroundTruth<f64>>, Vec<Detection<f64>>) {
    let quad = |rng: &mut ChaCha8Rng| {
        let c = (rng.random_range(0.0..80.0), rng.random_range(0.0..80.0));
        let r = rng.random_range(6.0..30.0);
        common::convex_quad(rng, c, r)
    };
    let gts = (0..n_gt).map(|_| GroundTruth::new(quad(rng), rng.random_bool(0.1))).collect();
    let dets = (0..n_det)
        .map(|_| {
            let q = quad(rng);
            Detection::new(q, rng.random_range(0.0..1.0)).unwrap()
        })
        .collect();
    (gts, dets)
}

#[test]
fn iou_agrees_with_monte_carlo_on_many_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    for _ in 0..1000 {
        let a = common::convex_quad(&mut rng, (0.0, 0.0), 20.0);
        let off = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let b = common::convex_quad(&mut rng, off, 20.0);
        let (x0, x1) = (a.aabb().min_x.min(b.aabb().min_x), a.aabb().max_x.max(b.aabb().max_x));
        let (y0, y1) = (a.aabb().min_y.min(b.aabb().min_y), a.aabb().max_y.max(b.aabb().max_y));
        let (mut both, mut either) = (0u32, 0u32);
        for _ in 0..1_000_000 {
            let p = (rng.random_range(x0..x1), rng.random_range(y0..y1));
            let (ia, ib) = (common::inside_any_order(a.corners(), p), common::inside_any_order(b.corners(), p));
            both += (ia && ib) as u32;
            either += (ia || ib) as u32;
        }
        let exact = iou_quad(&a, &b);
        let mc = both as f64 / either as f64;
        assert!((exact - mc).abs() < 0.01, "exact {exact} vs sampled {mc}");
    }
}

/// Ten images evaluated from files. Dropping `k` ground-truth detections and
/// adding `m` far-away spurious ones must give exactly those counts.
#[test]
fn directory_evaluation_counts_dropped_and_spurious() {
    let dir = scratch_dir("eval");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut dropped, mut spurious, mut normal) = (0, 0, 0);
    for img in 0..10 {
        let gts: Vec<GroundTruth<f64>> = (0..6)
            .map(|k| {
                let x = 10.0 + 60.0 * k as f64;
                GroundTruth::new(Quad::rect(x, 10.0, x + 50.0, 30.0).unwrap(), k == 5)
            })
            .collect();
        normal += 5;
        let mut dets = Vec::new();
        for g in gts.iter().filter(|g| !g.ignore) {
            if rng.random_bool(0.3) {
                dropped += 1;
            } else {
                dets.push(Detection::new(g.quad, rng.random_range(0.5..1.0)).unwrap());
            }
        }
        for s in 0..rng.random_range(0..3) {
            let y = 500.0 + 40.0 * s as f64;
            dets.push(Detection::new(Quad::rect(0.0, y, 30.0, y + 20.0).unwrap(), 0.9).unwrap());
            spurious += 1;
        }
        let labelled: Vec<_> = gts.iter().map(|g| (*g, "word")).collect();
        fs::write(dir.join(format!("gt/gt_img_{img}.txt")), format_gt_file(&labelled)).unwrap();
        fs::write(dir.join(format!("det/img_{img}.txt")), format_det_file(&dets)).unwrap();
    }
    let r = &evaluate(&dir.join("gt"), &dir.join("det"), &[0.5], &EvalOptions::default()).unwrap()[0];
    assert_eq!(r.counts.false_negatives, dropped);
    assert_eq!(r.counts.false_positives, spurious);
    assert_eq!(r.counts.true_positives, normal - dropped);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_detection_file_means_no_detections() {
    let dir = scratch_dir("nodet");
    let gt = GroundTruth::new(Quad::rect(0.0, 0.0, 10.0, 10.0).unwrap(), false);
    fs::write(dir.join("gt/gt_a.txt"), format_gt_file(&[(gt, "x")])).unwrap();
    let r = &evaluate(&dir.join("gt"), &dir.join("det"), &[0.5], &EvalOptions::default()).unwrap()[0];
    assert_eq!((r.counts.false_negatives, r.recall, r.precision), (1, 0.0, 1.0));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn greedy_matching_is_near_optimal_at_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut disagree = 0;
    for _ in 0..3000 {
        let (n_gt, n_det) = (rng.random_range(0..=8), rng.random_range(0..=8));
        let (gts, dets) = random_scene(&mut rng, n_gt, n_det);
        let normal: Vec<_> = gts.iter().map(|g| GroundTruth::new(g.quad, false)).collect();
        let greedy = match_and_score(&dets, &normal, 0.5).true_positives;
        let best = common::optimal_matches(&dets, &normal, 0.5);
        assert!(greedy <= best);
        assert!(best - greedy <= 1);
        disagree += (greedy != best) as usize;
    }
    assert!(disagree <= 150, "{disagree} disagreements");
}

#[test]
fn clustered_pnms_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut dets = Vec::new();
    for _ in 0..50 {
        let c = (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        for _ in 0..20 {
            let jc = (c.0 + rng.random_range(-4.0..4.0), c.1 + rng.random_range(-4.0..4.0));
            let q = common::text_quad(&mut rng, jc, 80.0, 20.0, angle, 0.1);
            dets.push(Detection::new(q, rng.random_range(0.0..1.0)).unwrap());
        }
    }
    for t in [0.1, 0.3, 0.5, 0.8] {
        assert_eq!(pnms(&dets, t), pnms_naive(&dets, t));
    }
}

#[test]
fn refine_positives_shrink_as_threshold_rises() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let levels = LevelSpec::pyramid();
    for _ in 0..50 {
        let c = (rng.random_range(60.0..200.0), rng.random_range(60.0..200.0));
        let gts = vec![GroundTruth::new(common::text_quad(&mut rng, c, 90.0, 24.0, 0.3, 0.05), false)];
        let maps = build_pyramid_targets(&gts, &levels, 256, 256, 0.25).unwrap();
        for m in &maps {
            // Perturb the ideal offsets so the IoU spreads out.
            let noisy: Vec<f64> = m.reg.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            let mut prev = usize::MAX;
            for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let r = build_refine_targets(&noisy, m.height, m.width, &m.level, &gts, t).unwrap();
                let pos = r.count(Label::Positive);
                assert!(pos <= prev);
                assert_eq!(pos + r.count(Label::Negative) + r.count(Label::Ignore), m.height * m.width);
                prev = pos;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn higher_tau_never_adds_true_positives(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gts, dets) = random_scene(&mut rng, 6, 8);
        let mut prev = usize::MAX;
        for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let c = match_and_score(&dets, &gts, tau);
            prop_assert!(c.true_positives <= prev);
            prev = c.true_positives;
        }
    }

    #[test]
    fn count_identities_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (gts, dets) = random_scene(&mut rng, 7, 9);
        let c = match_and_score(&dets, &gts, 0.5);
        prop_assert_eq!(c.true_positives + c.false_negatives, gts.iter().filter(|g| !g.ignore).count());
        prop_assert_eq!(c.true_positives + c.false_positives + c.discarded, dets.len());
    }

    #[test]
    fn evaluation_ignores_image_and_detection_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images: Vec<ImageRecord<f64>> = (0..5)
            .map(|_| {
                let (gts, dets) = random_scene(&mut rng, 4, 5);
                ImageRecord { gts, dets }
            })
            .collect();
        let before = evaluate_images(&images, &[0.5, 0.75], &EvalOptions::default());
        images.shuffle(&mut rng);
        for im in &mut images {
            im.gts.shuffle(&mut rng);
            im.dets.shuffle(&mut rng);
        }
        prop_assert_eq!(before, evaluate_images(&images, &[0.5, 0.75], &EvalOptions::default()));
    }
}
