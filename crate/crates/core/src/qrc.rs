//! Quadrilateral RoI convolution: sampling grids spread uniformly over a
//! quadrilateral, their deltas from the regular kernel grid, and direct
//! reference forward passes for both the regular and the quad-guided
//! convolution.
//!
//! Feature-map coordinates put cell `(x, y)` at the integer point `(x, y)`;
//! image coordinates map onto them by division by the stride. All sums
//! run over taps in row-major order and then over input channels, so the
//! two forward passes agree bit-for-bit whenever their sample positions do.

use crate::cell::Cell;
use crate::error::{Error, Result};
use crate::quadgeom::{canonicalize, Point, Quad};
use crate::scalar::Scalar;

/// Dense `H x W x C` map, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    height: usize,
    width: usize,
    channels: usize,
    stride: u32,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(height: usize, width: usize, channels: usize, stride: u32, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 || stride == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature map dims must be positive, got {height}x{width}x{channels} stride {stride}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { height, width, channels, stride, data })
    }

    pub fn zeros(height: usize, width: usize, channels: usize, stride: u32) -> Result<Self> {
        Self::new(height, width, channels, stride, vec![T::zero(); height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Zero outside the map.
    #[inline]
    fn get_padded(&self, y: i64, x: i64, c: usize) -> T {
        if y < 0 || x < 0 || y >= self.height as i64 || x >= self.width as i64 {
            T::zero()
        } else {
            self.get(y as usize, x as usize, c)
        }
    }
}

/// Convolution weights laid out `h x w x c_in x c_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    dilation: usize,
    weights: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(h: usize, w: usize, c_in: usize, c_out: usize, dilation: usize, weights: Vec<T>) -> Result<Self> {
        if h == 0 || w == 0 || h.is_multiple_of(2) || w.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!("kernel size {h}x{w} must be odd and positive")));
        }
        if dilation == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::InvalidKernel("dilation and channel counts must be positive".into()));
        }
        if weights.len() != h * w * c_in * c_out {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights, got {}",
                h * w * c_in * c_out,
                weights.len()
            )));
        }
        if !weights.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { h, w, c_in, c_out, dilation, weights })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn dilation(&self) -> usize {
        self.dilation
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize, ci: usize, co: usize) -> T {
        self.weights[((i * self.w + j) * self.c_in + ci) * self.c_out + co]
    }

    /// Regular-grid displacement `(dy, dx)` of tap `(i, j)`.
    #[inline]
    pub fn tap(&self, i: usize, j: usize) -> (i64, i64) {
        let d = self.dilation as i64;
        ((i as i64 - (self.h / 2) as i64) * d, (j as i64 - (self.w / 2) as i64) * d)
    }
}

/// `h x w` sampling positions for one output location, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid<T> {
    pub h: usize,
    pub w: usize,
    pub points: Vec<Point<T>>,
}

impl<T: Scalar> SampleGrid<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Point<T> {
        self.points[i * self.w + j]
    }
}

/// Per-tap displacement from the regular grid, in feature-map cells.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TapOffset<T> {
    pub dy: T,
    pub dx: T,
}

/// `H x W x (2 h w)` offsets as `(dy, dx)` pairs per tap, with a mask of
/// locations whose quadrilateral was usable.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField<T> {
    pub height: usize,
    pub width: usize,
    pub taps: usize,
    pub data: Vec<T>,
    pub valid: Vec<bool>,
}

impl<T: Scalar> OffsetField<T> {
    pub fn at(&self, cell: Cell, tap: usize) -> TapOffset<T> {
        let base = (cell.index(self.width) * self.taps + tap) * 2;
        TapOffset { dy: self.data[base], dx: self.data[base + 1] }
    }
}

pub fn project_quad<T: Scalar>(q: &Quad<T>, stride: u32) -> [Point<T>; 4] {
    let s = T::from_u32(stride).expect("stride converts");
    q.corners().map(|c| Point::new(c.x / s, c.y / s))
}

/// Affine interpolation `((b-1-a) m + a n) / (b-1)` between two points.
pub fn linear_kernel<T: Scalar>(a: usize, b: usize, m: Point<T>, n: Point<T>) -> Result<Point<T>> {
    if b < 2 {
        return Err(Error::InvalidKernel(format!("linear kernel size {b} must be at least 2")));
    }
    if a > b - 1 {
        return Err(Error::InvalidKernel(format!("kernel index {a} out of range for size {b}")));
    }
    let span = T::from_usize_lossy(b - 1);
    let wm = T::from_usize_lossy(b - 1 - a) / span;
    let wn = T::from_usize_lossy(a) / span;
    Ok(m * wm + n * wn)
}

/// Bilinear grid over the projected corners: each column interpolates
/// between a point on the top edge and the matching point on the bottom
/// edge.
pub fn sample_grid<T: Scalar>(corners: &[Point<T>; 4], h: usize, w: usize) -> Result<SampleGrid<T>> {
    if h < 2 || w < 2 {
        return Err(Error::InvalidKernel(format!("sampling grid {h}x{w} needs both sides >= 2")));
    }
    let [q1, q2, q3, q4] = *corners;
    let mut columns = Vec::with_capacity(w);
    for j in 0..w {
        columns.push((linear_kernel(j, w, q1, q2)?, linear_kernel(j, w, q4, q3)?));
    }
    let mut points = Vec::with_capacity(h * w);
    for i in 0..h {
        for &(top, bottom) in &columns {
            points.push(linear_kernel(i, h, top, bottom)?);
        }
    }
    Ok(SampleGrid { h, w, points })
}

/// `Δr = g - p - r` for every tap, row-major.
pub fn grid_to_offsets<T: Scalar>(p: Cell, grid: &SampleGrid<T>, kernel: &Kernel<T>) -> Result<Vec<TapOffset<T>>> {
    if grid.h != kernel.h || grid.w != kernel.w || grid.points.len() != grid.h * grid.w {
        return Err(Error::ShapeMismatch(format!(
            "grid {}x{} does not match kernel {}x{}",
            grid.h, grid.w, kernel.h, kernel.w
        )));
    }
    let px = T::from_usize_lossy(p.x);
    let py = T::from_usize_lossy(p.y);
    let mut out = Vec::with_capacity(grid.points.len());
    for i in 0..grid.h {
        for j in 0..grid.w {
            let (ry, rx) = kernel.tap(i, j);
            let g = grid.get(i, j);
            out.push(TapOffset {
                dy: g.y - (py + T::from_i64(ry).unwrap()),
                dx: g.x - (px + T::from_i64(rx).unwrap()),
            });
        }
    }
    Ok(out)
}

/// Inverse of [`grid_to_offsets`]: sample positions `p + r + Δr`.
pub fn offsets_to_grid<T: Scalar>(p: Cell, offsets: &[TapOffset<T>], kernel: &Kernel<T>) -> Result<SampleGrid<T>> {
    if offsets.len() != kernel.h * kernel.w {
        return Err(Error::ShapeMismatch(format!(
            "{} offsets for a {}x{} kernel",
            offsets.len(),
            kernel.h,
            kernel.w
        )));
    }
    let px = T::from_usize_lossy(p.x);
    let py = T::from_usize_lossy(p.y);
    let mut points = Vec::with_capacity(offsets.len());
    for i in 0..kernel.h {
        for j in 0..kernel.w {
            let (ry, rx) = kernel.tap(i, j);
            let o = offsets[i * kernel.w + j];
            points.push(Point::new(
                (px + T::from_i64(rx).unwrap()) + o.dx,
                (py + T::from_i64(ry).unwrap()) + o.dy,
            ));
        }
    }
    Ok(SampleGrid { h: kernel.h, w: kernel.w, points })
}

/// Bilinear interpolation at a fractional position; cells outside the map
/// read as zero.
pub fn bilinear_sample<T: Scalar>(f: &FeatureMap<T>, p: Point<T>, channel: usize) -> T {
    let (x0f, y0f) = (p.x.floor(), p.y.floor());
    let (Some(x0), Some(y0)) = (x0f.to_i64(), y0f.to_i64()) else {
        return T::zero();
    };
    if x0 < -1 || y0 < -1 || x0 > f.width as i64 || y0 > f.height as i64 {
        return T::zero();
    }
    let fx = p.x - x0f;
    let fy = p.y - y0f;
    let (gx, gy) = (T::one() - fx, T::one() - fy);
    f.get_padded(y0, x0, channel) * gx * gy
        + f.get_padded(y0, x0 + 1, channel) * fx * gy
        + f.get_padded(y0 + 1, x0, channel) * gx * fy
        + f.get_padded(y0 + 1, x0 + 1, channel) * fx * fy
}

/// Same-padded correlation by direct summation.
pub fn conv2d_reference<T: Scalar>(f: &FeatureMap<T>, k: &Kernel<T>) -> Result<FeatureMap<T>> {
    check_channels(f, k)?;
    let (h, w) = (f.height, f.width);
    let mut out = vec![T::zero(); h * w * k.c_out];
    let mut samples = vec![T::zero(); k.h * k.w * k.c_in];
    for y in 0..h {
        for x in 0..w {
            for i in 0..k.h {
                for j in 0..k.w {
                    let (ry, rx) = k.tap(i, j);
                    for ci in 0..k.c_in {
                        samples[(i * k.w + j) * k.c_in + ci] = f.get_padded(y as i64 + ry, x as i64 + rx, ci);
                    }
                }
            }
            accumulate(k, &samples, &mut out[(y * w + x) * k.c_out..][..k.c_out]);
        }
    }
    FeatureMap::new(h, w, k.c_out, f.stride, out)
}

/// Result of [`qrc_forward`]. Locations whose quadrilateral was not a valid
/// convex quad produce zeros and are listed in `invalid`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrcOutput<T> {
    pub map: FeatureMap<T>,
    pub invalid: Vec<Cell>,
}

/// Convolution whose taps for location `p` sit on the grid sampled from
/// `quads[p]` (image coordinates, any vertex order).
pub fn qrc_forward<T: Scalar>(f: &FeatureMap<T>, k: &Kernel<T>, quads: &[[Point<T>; 4]]) -> Result<QrcOutput<T>> {
    check_channels(f, k)?;
    let (h, w) = (f.height, f.width);
    if quads.len() != h * w {
        return Err(Error::ShapeMismatch(format!("{} quads for a {h}x{w} map", quads.len())));
    }
    let mut out = vec![T::zero(); h * w * k.c_out];
    let mut invalid = Vec::new();
    let mut samples = vec![T::zero(); k.h * k.w * k.c_in];
    for (idx, raw) in quads.iter().enumerate() {
        let Ok(quad) = canonicalize(*raw) else {
            invalid.push(Cell::from_index(idx, w));
            continue;
        };
        let grid = sample_grid(&project_quad(&quad, f.stride), k.h, k.w)?;
        for (t, g) in grid.points.iter().enumerate() {
            for ci in 0..k.c_in {
                samples[t * k.c_in + ci] = bilinear_sample(f, *g, ci);
            }
        }
        accumulate(k, &samples, &mut out[idx * k.c_out..][..k.c_out]);
    }
    Ok(QrcOutput { map: FeatureMap::new(h, w, k.c_out, f.stride, out)?, invalid })
}

/// Offsets a deformable-convolution layer needs to reproduce
/// [`qrc_forward`] for the given per-location quads.
pub fn offset_field<T: Scalar>(
    quads: &[[Point<T>; 4]],
    height: usize,
    width: usize,
    stride: u32,
    k: &Kernel<T>,
) -> Result<OffsetField<T>> {
    if quads.len() != height * width {
        return Err(Error::ShapeMismatch(format!("{} quads for a {height}x{width} map", quads.len())));
    }
    let taps = k.h * k.w;
    let mut data = vec![T::zero(); height * width * taps * 2];
    let mut valid = vec![false; height * width];
    for (idx, raw) in quads.iter().enumerate() {
        let Ok(quad) = canonicalize(*raw) else { continue };
        let grid = sample_grid(&project_quad(&quad, stride), k.h, k.w)?;
        let offsets = grid_to_offsets(Cell::from_index(idx, width), &grid, k)?;
        for (t, o) in offsets.iter().enumerate() {
            data[(idx * taps + t) * 2] = o.dy;
            data[(idx * taps + t) * 2 + 1] = o.dx;
        }
        valid[idx] = true;
    }
    Ok(OffsetField { height, width, taps, data, valid })
}

/// Image-space quad whose projected sampling grid is exactly the regular
/// kernel grid around `cell`.
pub fn receptive_field_quad<T: Scalar>(cell: Cell, stride: u32, k: &Kernel<T>) -> Result<Quad<T>> {
    let s = stride as i64;
    let (ry, rx) = ((k.h / 2 * k.dilation) as i64, (k.w / 2 * k.dilation) as i64);
    let (cx, cy) = (cell.x as i64, cell.y as i64);
    let pt = |x: i64, y: i64| Point::new(T::from_i64(x * s).unwrap(), T::from_i64(y * s).unwrap());
    canonicalize([
        pt(cx - rx, cy - ry),
        pt(cx + rx, cy - ry),
        pt(cx + rx, cy + ry),
        pt(cx - rx, cy + ry),
    ])
}

fn check_channels<T: Scalar>(f: &FeatureMap<T>, k: &Kernel<T>) -> Result<()> {
    if f.channels != k.c_in {
        return Err(Error::ShapeMismatch(format!(
            "feature map has {} channels, kernel expects {}",
            f.channels, k.c_in
        )));
    }
    Ok(())
}

/// `out[co] = Σ_taps Σ_ci w * sample`, accumulated in that fixed order.
#[inline]
fn accumulate<T: Scalar>(k: &Kernel<T>, samples: &[T], out: &mut [T]) {
    for (co, slot) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for i in 0..k.h {
            for j in 0..k.w {
                let base = (i * k.w + j) * k.c_in;
                for ci in 0..k.c_in {
                    acc += k.weight(i, j, ci, co) * samples[base + ci];
                }
            }
        }
        *slot = acc;
    }
}
