//! Differentiable rasterizer.
//!
//! Each shape is flattened to a polyline and given a smooth coverage
//! `S(-d / SIGMA)` per pixel center, where `d` is the signed distance to the
//! outline (negative inside under the nonzero winding rule). Shapes are then
//! composited bottom to top with the over operator. Beyond `CUTOFF_DISTANCE`
//! from the outline coverage is exactly 0 or 1, which lets every shape touch
//! only its inflated bounding box.
//!
//! [`SceneRaster`] caches per-shape coverage so that forward rendering,
//! renders with one shape removed and the adjoint pass share one coverage
//! evaluation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{bernstein3, Point, Scene, Shape, FLATTEN_SUBDIVISIONS};
use crate::math;
use crate::par;

pub use crate::geometry::Rgb;

/// Coverage smoothing bandwidth, in pixels.
pub const SIGMA: f64 = 0.5;

/// Distance past which coverage is saturated to exactly 0 or 1.
/// `S(-16) ~ 1.1e-7`, well under any tolerance the optimizer works at.
pub const CUTOFF_DISTANCE: f64 = 16.0 * SIGMA;

/// H x W RGB image, row-major, channels interleaved, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas);
        }
        let c = color.clamped().to_array();
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&c);
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    /// Builds an image from interleaved RGB data. Values must be finite and
    /// in `[0, 1]`.
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas);
        }
        if data.len() != width * height * 3 {
            return Err(Error::invalid(alloc::format!(
                "expected {} channel values for {width}x{height}, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("channel value outside [0, 1]"));
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    /// Evaluates `f` at every pixel `(x, y)`; results are clamped.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas);
        }
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y).clamped().to_array());
            }
        }
        Ok(RasterImage {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        Rgb::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn mse(&self, other: &RasterImage) -> Result<f64> {
        PixelLoss::Mse.value(self, other)
    }

    pub fn l1(&self, other: &RasterImage) -> Result<f64> {
        PixelLoss::L1.value(self, other)
    }

    fn check_same_dims(&self, other: &RasterImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// Per-pixel derivative of a scalar loss w.r.t. a rendered image, same
/// layout as [`RasterImage`] but unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGradient {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl PixelGradient {
    pub fn zeros(width: usize, height: usize) -> Self {
        PixelGradient {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }
}

/// Pixel-wise reconstruction loss, averaged over pixels and channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelLoss {
    L1,
    #[default]
    Mse,
}

impl PixelLoss {
    #[inline]
    fn term(self, diff: f64) -> f64 {
        match self {
            PixelLoss::L1 => math::abs(diff),
            PixelLoss::Mse => diff * diff,
        }
    }

    #[inline]
    fn term_grad(self, diff: f64) -> f64 {
        match self {
            PixelLoss::L1 => {
                if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            PixelLoss::Mse => 2.0 * diff,
        }
    }

    pub fn value(self, render: &RasterImage, target: &RasterImage) -> Result<f64> {
        render.check_same_dims(target)?;
        let sum: f64 = render
            .data
            .iter()
            .zip(&target.data)
            .map(|(r, t)| self.term(r - t))
            .sum();
        Ok(sum / render.data.len() as f64)
    }

    /// Loss value and its derivative w.r.t. every channel of `render`.
    pub fn value_and_grad(
        self,
        render: &RasterImage,
        target: &RasterImage,
    ) -> Result<(f64, PixelGradient)> {
        render.check_same_dims(target)?;
        let n = render.data.len() as f64;
        let mut sum = 0.0;
        let mut grad = PixelGradient::zeros(render.width, render.height);
        for ((g, r), t) in grad.data.iter_mut().zip(&render.data).zip(&target.data) {
            let diff = r - t;
            sum += self.term(diff);
            *g = self.term_grad(diff) / n;
        }
        Ok((sum / n, grad))
    }
}

/// Derivatives of a scalar loss w.r.t. every shape parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    /// Per shape, one entry per control point.
    pub points: Vec<Vec<Point>>,
    /// Per shape, `(r, g, b, alpha)`.
    pub colors: Vec<[f64; 4]>,
}

impl GradientSet {
    pub fn zeros(scene: &Scene) -> Self {
        GradientSet {
            points: scene
                .shapes
                .iter()
                .map(|s| vec![Point::ZERO; s.points().len()])
                .collect(),
            colors: vec![[0.0; 4]; scene.shapes.len()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().flatten().all(|p| p.is_finite())
            && self.colors.iter().flatten().all(|c| c.is_finite())
    }

    /// Adds `scale * other` point gradients, shape by shape.
    pub fn add_points(&mut self, other: &[Vec<Point>], scale: f64) {
        for (mine, theirs) in self.points.iter_mut().zip(other) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += *t * scale;
            }
        }
    }

    pub fn matches(&self, scene: &Scene) -> bool {
        self.colors.len() == scene.shapes.len()
            && self
                .points
                .iter()
                .zip(&scene.shapes)
                .all(|(g, s)| g.len() == s.points().len())
    }
}

/// Closest-edge record for one pixel, kept for the adjoint pass.
#[derive(Debug, Clone, Copy, Default)]
struct Probe {
    edge: u32,
    t: f64,
    /// d(signed distance)/d(closest point); zero when saturated.
    dir: Point,
}

/// Cached coverage of one shape over its inflated bounding box.
#[derive(Debug, Clone)]
struct Layer {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    coverage: Vec<f64>,
    probes: Vec<Probe>,
}

impl Layer {
    fn empty() -> Self {
        Layer {
            x0: 0,
            y0: 0,
            w: 0,
            h: 0,
            coverage: Vec::new(),
            probes: Vec::new(),
        }
    }

    #[inline]
    fn local_index(&self, x: usize, y: usize) -> Option<usize> {
        if x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h {
            Some((y - self.y0) * self.w + (x - self.x0))
        } else {
            None
        }
    }
}

#[derive(Clone, Copy)]
struct Edge {
    p: Point,
    d: Point,
    inv_len2: f64,
    min: Point,
    max: Point,
}

fn rasterize_shape(shape: &Shape, width: usize, height: usize, keep_probes: bool) -> Layer {
    let poly = shape.to_polyline(FLATTEN_SUBDIVISIONS);
    let verts = &poly.vertices;
    let n = verts.len();

    let mut lo = verts[0];
    let mut hi = verts[0];
    for v in verts {
        lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    // pixel centers sit at i + 0.5
    let first = |v: f64| math::ceil(v - CUTOFF_DISTANCE - 0.5).max(0.0);
    let last = |v: f64, size: usize| math::floor(v + CUTOFF_DISTANCE - 0.5).min(size as f64 - 1.0);
    let (fx, lx) = (first(lo.x), last(hi.x, width));
    let (fy, ly) = (first(lo.y), last(hi.y, height));
    if !(fx <= lx && fy <= ly) {
        return Layer::empty();
    }
    let (x0, y0) = (fx as usize, fy as usize);
    let (w, h) = (lx as usize - x0 + 1, ly as usize - y0 + 1);

    let edges: Vec<Edge> = (0..n)
        .map(|i| {
            let p = verts[i];
            let q = verts[(i + 1) % n];
            let d = q - p;
            let len2 = d.dot(d);
            Edge {
                p,
                d,
                inv_len2: if len2 > 0.0 { 1.0 / len2 } else { 0.0 },
                min: Point::new(p.x.min(q.x), p.y.min(q.y)),
                max: Point::new(p.x.max(q.x), p.y.max(q.y)),
            }
        })
        .collect();

    let mut coverage = vec![0.0; w * h];
    let mut probes = if keep_probes {
        vec![Probe::default(); w * h]
    } else {
        Vec::new()
    };
    let cut2 = CUTOFF_DISTANCE * CUTOFF_DISTANCE;
    let mut near = Vec::with_capacity(n);
    let mut crossing = Vec::with_capacity(n);

    for row in 0..h {
        let py = (y0 + row) as f64 + 0.5;
        near.clear();
        crossing.clear();
        for (i, e) in edges.iter().enumerate() {
            if e.min.y - CUTOFF_DISTANCE <= py && py <= e.max.y + CUTOFF_DISTANCE {
                near.push(i);
            }
            let qy = e.p.y + e.d.y;
            if (e.p.y <= py) != (qy <= py) {
                crossing.push(i);
            }
        }
        for col in 0..w {
            let px = (x0 + col) as f64 + 0.5;
            let pt = Point::new(px, py);

            let mut winding = 0i32;
            for &i in &crossing {
                let e = &edges[i];
                let side = e.d.cross(pt - e.p);
                if e.p.y <= py {
                    if side > 0.0 {
                        winding += 1;
                    }
                } else if side < 0.0 {
                    winding -= 1;
                }
            }
            let inside = winding != 0;

            let mut best2 = cut2;
            let mut best: Option<(usize, f64, Point)> = None;
            for &i in &near {
                let e = &edges[i];
                let gx = (e.min.x - px).max(px - e.max.x).max(0.0);
                let gy = (e.min.y - py).max(py - e.max.y).max(0.0);
                if gx * gx + gy * gy >= best2 {
                    continue;
                }
                let t = ((pt - e.p).dot(e.d) * e.inv_len2).clamp(0.0, 1.0);
                let c = e.p + e.d * t;
                let r = pt - c;
                let r2 = r.dot(r);
                if r2 < best2 {
                    best2 = r2;
                    best = Some((i, t, r));
                }
            }

            let k = row * w + col;
            match best {
                None => coverage[k] = if inside { 1.0 } else { 0.0 },
                Some((edge, t, r)) => {
                    let dist = math::sqrt(best2);
                    let signed = if inside { -dist } else { dist };
                    coverage[k] = math::sigmoid(-signed / SIGMA);
                    if keep_probes {
                        let dir = if dist > 0.0 {
                            let s = if inside { -1.0 } else { 1.0 };
                            r * (s / dist)
                        } else {
                            Point::ZERO
                        };
                        probes[k] = Probe {
                            edge: edge as u32,
                            t,
                            dir,
                        };
                    }
                }
            }
        }
    }

    Layer {
        x0,
        y0,
        w,
        h,
        coverage,
        probes,
    }
}

/// Per-shape coverage of a scene, ready for compositing and its adjoint.
#[derive(Debug, Clone)]
pub struct SceneRaster {
    width: usize,
    height: usize,
    background: Rgb,
    layers: Vec<Layer>,
    colors: Vec<[f64; 4]>,
    has_probes: bool,
}

impl SceneRaster {
    /// Evaluates coverage for every shape. `with_gradients` keeps the extra
    /// per-pixel data [`SceneRaster::backward`] needs.
    pub fn new(scene: &Scene, with_gradients: bool) -> Result<Self> {
        if scene.width == 0 || scene.height == 0 {
            return Err(Error::EmptyCanvas);
        }
        let layers = par::map_indexed(scene.shapes.len(), |i| {
            rasterize_shape(&scene.shapes[i], scene.width, scene.height, with_gradients)
        });
        Ok(SceneRaster {
            width: scene.width,
            height: scene.height,
            background: scene.background,
            layers,
            colors: scene.shapes.iter().map(|s| s.color().to_array()).collect(),
            has_probes: with_gradients,
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Over-composites all layers except `skip`, bottom to top.
    pub fn composite(&self, skip: Option<usize>) -> RasterImage {
        let mut data = Vec::with_capacity(self.width * self.height * 3);
        let bg = self.background.to_array();
        for _ in 0..self.width * self.height {
            data.extend_from_slice(&bg);
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let color = self.colors[i];
            for row in 0..layer.h {
                let base = ((layer.y0 + row) * self.width + layer.x0) * 3;
                for col in 0..layer.w {
                    let a = layer.coverage[row * layer.w + col] * color[3];
                    let px = &mut data[base + col * 3..base + col * 3 + 3];
                    for ch in 0..3 {
                        px[ch] = a * color[ch] + (1.0 - a) * px[ch];
                    }
                }
            }
        }
        RasterImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Per-row lists of layers whose box covers that row.
    fn row_layers(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.height];
        for (i, l) in self.layers.iter().enumerate() {
            for row in rows.iter_mut().skip(l.y0).take(l.h) {
                row.push(i);
            }
        }
        rows
    }

    /// Adjoint of [`SceneRaster::composite`] (with nothing skipped): chains
    /// `pixel_grad` through compositing, coverage, signed distance,
    /// flattening and the Bernstein weights.
    pub fn backward(&self, scene: &Scene, pixel_grad: &PixelGradient) -> Result<GradientSet> {
        if (pixel_grad.width, pixel_grad.height) != (self.width, self.height)
            || pixel_grad.data.len() != self.width * self.height * 3
        {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (pixel_grad.width, pixel_grad.height),
            });
        }
        if scene.shapes.len() != self.layers.len() {
            return Err(Error::invalid("scene does not match its raster"));
        }
        if !self.has_probes {
            return Err(Error::invalid("raster was built without gradient data"));
        }

        // dL/d(coverage * alpha) per layer pixel, and dL/d(rgb) per layer
        let mut d_opacity: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.w * l.h]).collect();
        let mut d_rgb = vec![[0.0f64; 3]; self.layers.len()];
        let bg = self.background.to_array();
        let rows = self.row_layers();
        let mut stack: Vec<(usize, usize, f64, [f64; 3])> = Vec::new();

        for (y, active) in rows.iter().enumerate() {
            if active.is_empty() {
                continue;
            }
            for x in 0..self.width {
                stack.clear();
                let mut out = bg;
                for &li in active {
                    let layer = &self.layers[li];
                    let Some(k) = layer.local_index(x, y) else {
                        continue;
                    };
                    let a = layer.coverage[k] * self.colors[li][3];
                    stack.push((li, k, a, out));
                    let c = &self.colors[li];
                    for ch in 0..3 {
                        out[ch] = a * c[ch] + (1.0 - a) * out[ch];
                    }
                }
                let gi = (y * self.width + x) * 3;
                let mut g = [
                    pixel_grad.data[gi],
                    pixel_grad.data[gi + 1],
                    pixel_grad.data[gi + 2],
                ];
                for &(li, k, a, below) in stack.iter().rev() {
                    let c = &self.colors[li];
                    let mut da = 0.0;
                    for ch in 0..3 {
                        d_rgb[li][ch] += a * g[ch];
                        da += g[ch] * (c[ch] - below[ch]);
                    }
                    d_opacity[li][k] = da;
                    for gc in &mut g {
                        *gc *= 1.0 - a;
                    }
                }
            }
        }

        let per_shape = par::map_indexed(self.layers.len(), |i| {
            self.shape_backward(&scene.shapes[i], i, &d_opacity[i])
        });
        let mut out = GradientSet {
            points: Vec::with_capacity(per_shape.len()),
            colors: Vec::with_capacity(per_shape.len()),
        };
        for (i, (pts, d_alpha)) in per_shape.into_iter().enumerate() {
            out.points.push(pts);
            out.colors
                .push([d_rgb[i][0], d_rgb[i][1], d_rgb[i][2], d_alpha]);
        }
        Ok(out)
    }

    /// Chains one layer's opacity adjoint back to its control points and
    /// alpha.
    fn shape_backward(&self, shape: &Shape, index: usize, d_opacity: &[f64]) -> (Vec<Point>, f64) {
        let layer = &self.layers[index];
        let alpha = self.colors[index][3];
        let n_vertices = shape.segment_count() * FLATTEN_SUBDIVISIONS;
        let mut d_vertex = vec![Point::ZERO; n_vertices];
        let mut d_alpha = 0.0;
        for (k, &da) in d_opacity.iter().enumerate() {
            if da == 0.0 {
                continue;
            }
            let cov = layer.coverage[k];
            d_alpha += da * cov;
            let probe = layer.probes[k];
            if probe.dir == Point::ZERO {
                continue;
            }
            // d cov / d signed = -cov (1 - cov) / sigma
            let d_signed = da * alpha * (-cov * (1.0 - cov) / SIGMA);
            if d_signed == 0.0 {
                continue;
            }
            let e = probe.edge as usize;
            // signed distance moves with the closest point c = (1-t) p + t q
            let g = probe.dir * (-d_signed);
            d_vertex[e] += g * (1.0 - probe.t);
            d_vertex[(e + 1) % n_vertices] += g * probe.t;
        }

        let mut d_points = vec![Point::ZERO; shape.points().len()];
        let weights: Vec<[f64; 4]> = (0..FLATTEN_SUBDIVISIONS)
            .map(|k| bernstein3(k as f64 / FLATTEN_SUBDIVISIONS as f64))
            .collect();
        for s in 0..shape.segment_count() {
            let idx = shape.segment_indices(s);
            for (k, w) in weights.iter().enumerate() {
                let dv = d_vertex[s * FLATTEN_SUBDIVISIONS + k];
                if dv == Point::ZERO {
                    continue;
                }
                for j in 0..4 {
                    d_points[idx[j]] += dv * w[j];
                }
            }
        }
        (d_points, d_alpha)
    }

    /// Loss of the image rendered without each shape in turn.
    ///
    /// Uses prefix composites and suffix affine maps per pixel, so removing a
    /// shape costs only the pixels it covers. Agrees with deleting and
    /// re-rendering to rounding error.
    pub fn removal_losses(&self, target: &RasterImage, loss: PixelLoss) -> Result<Vec<f64>> {
        if target.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: target.dims(),
            });
        }
        let full = self.composite(None);
        let n_values = (self.width * self.height * 3) as f64;
        let base: f64 = full
            .data
            .iter()
            .zip(&target.data)
            .map(|(r, t)| loss.term(r - t))
            .sum();
        let rows = self.row_layers();

        let per_row: Vec<Vec<(usize, f64)>> = par::map_indexed(self.height, |y| {
            let active = &rows[y];
            let mut deltas: Vec<(usize, f64)> = Vec::new();
            if active.is_empty() {
                return deltas;
            }
            let bg = self.background.to_array();
            let mut stack: Vec<(usize, f64, [f64; 3])> = Vec::new();
            for x in 0..self.width {
                stack.clear();
                let mut out = bg;
                for &li in active {
                    let layer = &self.layers[li];
                    let Some(k) = layer.local_index(x, y) else {
                        continue;
                    };
                    let a = layer.coverage[k] * self.colors[li][3];
                    if a == 0.0 {
                        continue;
                    }
                    stack.push((li, a, out));
                    let c = &self.colors[li];
                    for ch in 0..3 {
                        out[ch] = a * c[ch] + (1.0 - a) * out[ch];
                    }
                }
                if stack.is_empty() {
                    continue;
                }
                let ti = (y * self.width + x) * 3;
                let t = &target.data[ti..ti + 3];
                let full_px = &full.data[ti..ti + 3];
                let full_loss: f64 = (0..3).map(|ch| loss.term(full_px[ch] - t[ch])).sum();
                // suffix map of everything above the current entry: v -> m*v + b
                let mut m = 1.0;
                let mut b = [0.0; 3];
                for &(li, a, below) in stack.iter().rev() {
                    let mut without = 0.0;
                    for ch in 0..3 {
                        without += loss.term(m * below[ch] + b[ch] - t[ch]);
                    }
                    deltas.push((li, without - full_loss));
                    let c = &self.colors[li];
                    for ch in 0..3 {
                        b[ch] += m * a * c[ch];
                    }
                    m *= 1.0 - a;
                }
            }
            deltas
        });

        let mut sums = vec![base; self.layers.len()];
        for row in per_row {
            for (li, d) in row {
                sums[li] += d;
            }
        }
        Ok(sums.into_iter().map(|s| s / n_values).collect())
    }

    /// Coverage of layer `index` at pixel `(x, y)`.
    pub fn coverage_at(&self, index: usize, x: usize, y: usize) -> f64 {
        let layer = &self.layers[index];
        layer.local_index(x, y).map_or(0.0, |k| layer.coverage[k])
    }
}

/// Renders the scene bottom to top over its background.
pub fn render(scene: &Scene) -> Result<RasterImage> {
    Ok(SceneRaster::new(scene, false)?.composite(None))
}

/// Renders every shape except `index`.
pub fn render_without(scene: &Scene, index: usize) -> Result<RasterImage> {
    if index >= scene.shapes.len() {
        return Err(Error::IndexOutOfRange {
            index,
            len: scene.shapes.len(),
        });
    }
    Ok(SceneRaster::new(scene, false)?.composite(Some(index)))
}

/// Gradient of a scalar loss w.r.t. all shape parameters, given the loss's
/// derivative w.r.t. the rendered image.
pub fn render_with_gradients(scene: &Scene, pixel_grad: &PixelGradient) -> Result<GradientSet> {
    if (pixel_grad.width, pixel_grad.height) != (scene.width, scene.height) {
        return Err(Error::DimensionMismatch {
            expected: (scene.width, scene.height),
            found: (pixel_grad.width, pixel_grad.height),
        });
    }
    SceneRaster::new(scene, true)?.backward(scene, pixel_grad)
}
