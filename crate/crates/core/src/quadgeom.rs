//! Quadrilateral representation and the planar geometry shared by every
//! other module.
//!
//! Coordinates are image pixels with `y` growing downward. Under that
//! convention a positive shoelace sum means the vertices run clockwise on
//! screen, which is the orientation every [`Quad`] carries.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Self::new(T::lit(x), T::lit(y))
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn midpoint(self, other: Self) -> Self {
        let half = T::lit(0.5);
        Self::new((self.x + other.x) * half, (self.y + other.y) * half)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(
            U::from(self.x).unwrap_or_else(U::nan),
            U::from(self.y).unwrap_or_else(U::nan),
        )
    }
}

impl<T: Scalar> Add for Point<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point<T> {
    type Output = Self;
    #[inline]
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

/// Orientation of `c` relative to the directed line `a -> b`.
#[inline]
fn orient<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>) -> T {
    (b - a).cross(c - a)
}

fn shoelace<T: Scalar>(pts: &[Point<T>]) -> T {
    let n = pts.len();
    let mut twice = T::zero();
    for i in 0..n {
        twice += pts[i].cross(pts[(i + 1) % n]);
    }
    twice * T::lit(0.5)
}

fn segments_cross<T: Scalar>(a: Point<T>, b: Point<T>, c: Point<T>, d: Point<T>) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < T::zero() && o3 * o4 < T::zero()
}

/// A strictly convex quadrilateral, clockwise on screen, starting at the
/// vertex with the smallest `x + y` (ties: smaller `y`, then smaller `x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<T> {
    corners: [Point<T>; 4],
}

impl<T: Scalar> Quad<T> {
    /// Equivalent to [`canonicalize`].
    pub fn new(points: [Point<T>; 4]) -> Result<Self> {
        canonicalize(points)
    }

    /// Builds a quad from `x1,y1,...,x4,y4`.
    pub fn from_coords(c: [T; 8]) -> Result<Self> {
        canonicalize([
            Point::new(c[0], c[1]),
            Point::new(c[2], c[3]),
            Point::new(c[4], c[5]),
            Point::new(c[6], c[7]),
        ])
    }

    pub fn from_f64(c: [f64; 8]) -> Result<Self> {
        Self::from_coords(c.map(T::lit))
    }

    /// Axis-aligned rectangle with top-left `(x0, y0)` and bottom-right `(x1, y1)`.
    pub fn rect(x0: T, y0: T, x1: T, y1: T) -> Result<Self> {
        Self::from_coords([x0, y0, x1, y0, x1, y1, x0, y1])
    }

    #[inline]
    pub fn corners(&self) -> &[Point<T>; 4] {
        &self.corners
    }

    pub fn coords(&self) -> [T; 8] {
        let c = &self.corners;
        [c[0].x, c[0].y, c[1].x, c[1].y, c[2].x, c[2].y, c[3].x, c[3].y]
    }

    pub fn center(&self) -> Point<T> {
        let c = &self.corners;
        let quarter = T::lit(0.25);
        Point::new(
            (c[0].x + c[1].x + c[2].x + c[3].x) * quarter,
            (c[0].y + c[1].y + c[2].y + c[3].y) * quarter,
        )
    }

    pub fn area(&self) -> T {
        area(self)
    }

    pub fn aabb(&self) -> Aabb<T> {
        aabb(self)
    }

    pub fn cast<U: Scalar>(&self) -> Result<Quad<U>> {
        canonicalize(self.corners.map(Point::cast))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth<T> {
    pub quad: Quad<T>,
    /// Do-not-care region.
    pub ignore: bool,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn new(quad: Quad<T>, ignore: bool) -> Self {
        Self { quad, ignore }
    }
}

/// Reorders four points into the canonical [`Quad`] form.
pub fn canonicalize<T: Scalar>(points: [Point<T>; 4]) -> Result<Quad<T>> {
    if !points.iter().all(Point::is_finite) {
        return Err(Error::NonFinite);
    }
    let [a, b, c, d] = points;
    if segments_cross(a, b, c, d) || segments_cross(b, c, d, a) {
        return Err(Error::NotSimple);
    }

    let mut pts = points;
    let signed = shoelace(&pts);
    if signed.abs() <= T::geom_eps() {
        return Err(Error::NonConvex);
    }
    if signed < T::zero() {
        pts.reverse();
    }
    for i in 0..4 {
        let turn = orient(pts[(i + 3) % 4], pts[i], pts[(i + 1) % 4]);
        if turn <= T::geom_eps() {
            return Err(Error::NonConvex);
        }
    }

    let start = (1..4).fold(0, |best, i| {
        let (p, q) = (pts[i], pts[best]);
        let (sp, sq) = (p.x + p.y, q.x + q.y);
        let better = sp < sq || (sp == sq && (p.y < q.y || (p.y == q.y && p.x < q.x)));
        if better {
            i
        } else {
            best
        }
    });
    pts.rotate_left(start);
    Ok(Quad { corners: pts })
}

pub fn area<T: Scalar>(q: &Quad<T>) -> T {
    shoelace(&q.corners)
}

/// Shorter of the two segments joining midpoints of opposing edges.
pub fn scale_measure<T: Scalar>(q: &Quad<T>) -> T {
    let c = &q.corners;
    let top = c[0].midpoint(c[1]);
    let right = c[1].midpoint(c[2]);
    let bottom = c[2].midpoint(c[3]);
    let left = c[3].midpoint(c[0]);
    (bottom - top).norm().min((right - left).norm())
}

/// Moves every corner toward both neighbours by fraction `ratio` of the
/// connecting edge.
pub fn shrink<T: Scalar>(q: &Quad<T>, ratio: T) -> Result<Quad<T>> {
    if !(ratio >= T::zero() && ratio < T::lit(0.5)) {
        return Err(Error::InvalidRatio(ratio.to_f64().unwrap_or(f64::NAN)));
    }
    let c = &q.corners;
    let moved: [Point<T>; 4] = std::array::from_fn(|i| {
        let p = c[i];
        let next = c[(i + 1) % 4];
        let prev = c[(i + 3) % 4];
        p + (next - p) * ratio + (prev - p) * ratio
    });
    canonicalize(moved).map_err(|_| Error::Degenerate)
}

/// Convex polygon, clockwise on screen. Empty when fewer than 3 vertices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon<T> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Scalar> ConvexPolygon<T> {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> T {
        if self.is_empty() {
            T::zero()
        } else {
            shoelace(&self.vertices).abs()
        }
    }
}

/// Sutherland-Hodgman clip of `a` against the four half-planes of `b`.
pub fn intersect_convex<T: Scalar>(a: &Quad<T>, b: &Quad<T>) -> ConvexPolygon<T> {
    let mut subject: Vec<Point<T>> = a.corners.to_vec();
    let mut scratch: Vec<Point<T>> = Vec::with_capacity(8);
    for i in 0..4 {
        let e0 = b.corners[i];
        let e1 = b.corners[(i + 1) % 4];
        let edge = e1 - e0;
        scratch.clear();
        let n = subject.len();
        for k in 0..n {
            let cur = subject[k];
            let prev = subject[(k + n - 1) % n];
            let side_cur = edge.cross(cur - e0);
            let side_prev = edge.cross(prev - e0);
            let cur_in = side_cur >= T::zero();
            let prev_in = side_prev >= T::zero();
            if cur_in != prev_in {
                let t = side_prev / (side_prev - side_cur);
                scratch.push(prev + (cur - prev) * t);
            }
            if cur_in {
                scratch.push(cur);
            }
        }
        std::mem::swap(&mut subject, &mut scratch);
        if subject.is_empty() {
            break;
        }
    }
    subject.dedup();
    if subject.len() > 1 && subject.first() == subject.last() {
        subject.pop();
    }
    ConvexPolygon { vertices: subject }
}

/// Exact polygon IoU. Argument order is normalised so the result is
/// bitwise symmetric.
pub fn iou_quad<T: Scalar>(a: &Quad<T>, b: &Quad<T>) -> T {
    iou_with_areas(a, area(a), b, area(b))
}

pub(crate) fn iou_with_areas<T: Scalar>(a: &Quad<T>, area_a: T, b: &Quad<T>, area_b: T) -> T {
    let (first, second) = if lex_le(a, b) { (a, b) } else { (b, a) };
    let inter = intersect_convex(first, second).area();
    let union = area_a + area_b - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).max(T::zero()).min(T::one())
}

fn lex_le<T: Scalar>(a: &Quad<T>, b: &Quad<T>) -> bool {
    for (x, y) in a.coords().iter().zip(b.coords().iter()) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min_x: T,
    pub min_y: T,
    pub max_x: T,
    pub max_y: T,
}

impl<T: Scalar> Aabb<T> {
    pub fn new(min_x: T, min_y: T, max_x: T, max_y: T) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn area(&self) -> T {
        (self.max_x - self.min_x).max(T::zero()) * (self.max_y - self.min_y).max(T::zero())
    }

    /// True when the boxes share interior or boundary points.
    #[inline]
    pub fn overlaps(&self, o: &Self) -> bool {
        self.min_x <= o.max_x && o.min_x <= self.max_x && self.min_y <= o.max_y && o.min_y <= self.max_y
    }
}

pub fn aabb<T: Scalar>(q: &Quad<T>) -> Aabb<T> {
    let c = &q.corners;
    let mut b = Aabb::new(c[0].x, c[0].y, c[0].x, c[0].y);
    for p in &c[1..] {
        b.min_x = b.min_x.min(p.x);
        b.min_y = b.min_y.min(p.y);
        b.max_x = b.max_x.max(p.x);
        b.max_y = b.max_y.max(p.y);
    }
    b
}

pub fn iou_aabb<T: Scalar>(a: &Aabb<T>, b: &Aabb<T>) -> T {
    let iw = (a.max_x.min(b.max_x) - a.min_x.max(b.min_x)).max(T::zero());
    let ih = (a.max_y.min(b.max_y) - a.min_y.max(b.min_y)).max(T::zero());
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        T::zero()
    } else {
        inter / union
    }
}

/// Half-plane test against all four edges; boundary points are inside.
pub fn contains_point<T: Scalar>(q: &Quad<T>, p: Point<T>) -> bool {
    (0..4).all(|i| orient(q.corners[i], q.corners[(i + 1) % 4], p) >= T::zero())
}

/// Like [`contains_point`] but rejects points on the boundary.
pub fn contains_point_strict<T: Scalar>(q: &Quad<T>, p: Point<T>) -> bool {
    (0..4).all(|i| orient(q.corners[i], q.corners[(i + 1) % 4], p) > T::zero())
}
