//! Seeded synthetic fixtures: non-overlapping text quads with wide scale,
//! orientation and aspect-ratio spread, and detections perturbed from them.

use std::f64::consts::TAU;

use quadtext::quadgeom::{canonicalize, iou_quad, scale_measure, Point};
use quadtext::{Detection, GroundTruth, Quad};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const CANVAS: f64 = 2048.0;
const MIN_SCALE: f64 = 8.0;
const MAX_SCALE: f64 = 512.0;
const MAX_ASPECT: f64 = 20.0;
const DO_NOT_CARE_RATE: f64 = 0.1;

pub struct SynthImage {
    pub stem: String,
    pub gts: Vec<(GroundTruth<f64>, String)>,
    pub dets: Vec<Detection<f64>>,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn rounded(points: [Point<f64>; 4]) -> Option<Quad<f64>> {
    canonicalize(points.map(|p| Point::new(round2(p.x), round2(p.y)))).ok()
}

fn text_quad(rng: &mut ChaCha8Rng) -> Option<Quad<f64>> {
    let scale = rng.random_range(MIN_SCALE.ln()..MAX_SCALE.ln()).exp();
    let aspect = rng.random_range(1.0..MAX_ASPECT);
    // Long lines are clipped to the canvas rather than redrawn, so the
    // aspect distribution keeps its tail at small scales.
    let length = (scale * aspect).min(0.9 * CANVAS);
    let angle = rng.random_range(0.0..TAU);
    let (c, s) = (angle.cos(), angle.sin());
    let center = (rng.random_range(0.0..CANVAS), rng.random_range(0.0..CANVAS));
    let jitter = 0.05 * scale;
    let half = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
    let points = half.map(|(u, v)| {
        let (x, y) = (u * length, v * scale);
        Point::new(
            center.0 + x * c - y * s + rng.random_range(-jitter..=jitter),
            center.1 + x * s + y * c + rng.random_range(-jitter..=jitter),
        )
    });
    let q = rounded(points)?;
    let b = q.aabb();
    (b.min_x >= 0.0 && b.min_y >= 0.0 && b.max_x <= CANVAS && b.max_y <= CANVAS).then_some(q)
}

fn noisy(rng: &mut ChaCha8Rng, gt: &Quad<f64>, noise: f64) -> Option<Quad<f64>> {
    if noise == 0.0 {
        return Some(*gt);
    }
    let normal = Normal::new(0.0, noise * scale_measure(gt)).ok()?;
    for _ in 0..20 {
        let points = gt.corners().map(|p| Point::new(p.x + normal.sample(rng), p.y + normal.sample(rng)));
        if let Some(q) = rounded(points) {
            return Some(q);
        }
    }
    None
}

/// Generates `images` fixtures. Detections are the normal texts with every
/// coordinate perturbed by `N(0, (noise * scale)^2)`, scored in [0.5, 1].
pub fn generate(seed: u64, images: usize, noise: f64) -> Vec<SynthImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(images);
    for img in 0..images {
        let wanted = rng.random_range(1..=10);
        let mut gts: Vec<(GroundTruth<f64>, String)> = Vec::new();
        let mut attempts = 0;
        while gts.len() < wanted && attempts < 200 {
            attempts += 1;
            let Some(q) = text_quad(&mut rng) else { continue };
            if gts.iter().any(|(g, _)| iou_quad(&g.quad, &q) > 0.0) {
                continue;
            }
            let ignore = rng.random_bool(DO_NOT_CARE_RATE);
            gts.push((GroundTruth::new(q, ignore), format!("word{}", gts.len())));
        }
        let mut dets = Vec::new();
        for (g, _) in gts.iter().filter(|(g, _)| !g.ignore) {
            let score = (rng.random_range(0.5..=1.0f64) * 1e4).round() / 1e4;
            if let Some(q) = noisy(&mut rng, &g.quad, noise) {
                dets.push(Detection::new(q, score).expect("score is finite"));
            }
        }
        out.push(SynthImage { stem: format!("img_{:04}", img + 1), gts, dets });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texts_never_overlap_and_stay_on_canvas() {
        for im in generate(11, 30, 0.0) {
            for (a, (ga, _)) in im.gts.iter().enumerate() {
                let b = ga.quad.aabb();
                assert!(b.min_x >= 0.0 && b.max_x <= CANVAS && b.min_y >= 0.0 && b.max_y <= CANVAS);
                for (gb, _) in &im.gts[a + 1..] {
                    assert_eq!(iou_quad(&ga.quad, &gb.quad), 0.0);
                }
            }
        }
    }

    #[test]
    fn scales_span_the_configured_range() {
        let scales: Vec<f64> =
            generate(2, 200, 0.0).iter().flat_map(|im| im.gts.iter().map(|(g, _)| scale_measure(&g.quad))).collect();
        let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scales.iter().cloned().fold(0.0, f64::max);
        assert!(lo < 12.0 && hi > 300.0, "scales span {lo}..{hi}");
    }

    #[test]
    fn zero_noise_reproduces_ground_truth() {
        for im in generate(4, 10, 0.0) {
            let normal: Vec<_> = im.gts.iter().filter(|(g, _)| !g.ignore).map(|(g, _)| g.quad).collect();
            let dets: Vec<_> = im.dets.iter().map(|d| d.quad).collect();
            assert_eq!(normal, dets);
            assert!(im.dets.iter().all(|d| (0.5..=1.0).contains(&d.score)));
        }
    }
}
