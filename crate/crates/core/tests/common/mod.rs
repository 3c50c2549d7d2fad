#![allow(dead_code)]

use quadtext::quadgeom::{canonicalize, iou_quad, Point, Quad};
use quadtext::{Detection, GroundTruth};
use rand::{Rng, RngExt};

pub fn convex_quad<R: Rng>(rng: &mut R, center: (f64, f64), radius: f64) -> Quad<f64> {
    loop {
        let squash: f64 = rng.random_range(0.2..1.0);
        let rot: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pts: [Point<f64>; 4] = std::array::from_fn(|i| {
            let r = radius * rng.random_range(0.7..1.0);
            let (ex, ey) = (r * angles[i].cos(), r * squash * angles[i].sin());
            Point::new(center.0 + ex * rot.cos() - ey * rot.sin(), center.1 + ex * rot.sin() + ey * rot.cos())
        });
        if let Ok(q) = canonicalize(pts) {
            if q.area() > 1e-3 * radius * radius {
                return q;
            }
        }
    }
}

/// Rotated rectangle `length x height` with every corner nudged by up to
/// `jitter * height`.
pub fn text_quad<R: Rng>(rng: &mut R, center: (f64, f64), length: f64, height: f64, angle: f64, jitter: f64) -> Quad<f64> {
    loop {
        let (c, s) = (angle.cos(), angle.sin());
        let local = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)];
        let pts = local.map(|(u, v)| {
            let (x, y) = (u * length, v * height);
            let (jx, jy) = if jitter > 0.0 {
                (rng.random_range(-jitter..=jitter) * height, rng.random_range(-jitter..=jitter) * height)
            } else {
                (0.0, 0.0)
            };
            Point::new(center.0 + x * c - y * s + jx, center.1 + x * s + y * c + jy)
        });
        if let Ok(q) = canonicalize(pts) {
            return q;
        }
    }
}

pub fn parallelogram<R: Rng>(rng: &mut R) -> Quad<f64> {
    loop {
        let o: Point<f64> = Point::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let u: Point<f64> = Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let v: Point<f64> = Point::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        if u.cross(v).abs() < 1.0f64 {
            continue;
        }
        if let Ok(q) = canonicalize([o, o + u, o + u + v, o + v]) {
            return q;
        }
    }
}

/// Independent point-in-convex-polygon test that does not assume any vertex
/// order: inside when no two edge-side signs disagree.
pub fn inside_any_order(q: &[Point<f64>; 4], p: (f64, f64)) -> bool {
    let mut pos = false;
    let mut neg = false;
    for i in 0..4 {
        let (a, b) = (q[i], q[(i + 1) % 4]);
        let side = (b.x - a.x) * (p.1 - a.y) - (b.y - a.y) * (p.0 - a.x);
        pos |= side > 0.0;
        neg |= side < 0.0;
    }
    !(pos && neg)
}

/// Maximum number of one-to-one pairs with IoU >= tau, by exhaustive
/// search over subsets of ground truths.
pub fn optimal_matches(dets: &[Detection<f64>], gts: &[GroundTruth<f64>], tau: f64) -> usize {
    let ok: Vec<Vec<bool>> = dets
        .iter()
        .map(|d| gts.iter().map(|g| !g.ignore && iou_quad(&d.quad, &g.quad) >= tau).collect())
        .collect();
    fn go(i: usize, used: u32, ok: &[Vec<bool>]) -> usize {
        if i == ok.len() {
            return 0;
        }
        let mut best = go(i + 1, used, ok);
        for (g, &hit) in ok[i].iter().enumerate() {
            if hit && used & (1 << g) == 0 {
                best = best.max(1 + go(i + 1, used | (1 << g), ok));
            }
        }
        best
    }
    go(0, 0, &ok)
}
