//! Shape domain types, polyline flattening and the soft geometric loss.
//!
//! A [`Shape`] stores its closed path as a flat list of control points,
//! three per segment: `[anchor0, ctrl0a, ctrl0b, anchor1, ...]`. Segment `i`
//! runs from `points[3i]` to `points[3i + 3]`, wrapping to `points[0]` for
//! the last segment, so shared endpoints exist once and closure is exact.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::math;

/// Samples per cubic segment used by the rasterizer and the exact oracles.
pub const FLATTEN_SUBDIVISIONS: usize = 16;

/// Edge-length floor below which an angle term is treated as zero.
const ANGLE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Opaque RGB color, channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const WHITE: Rgb = Rgb::new(1.0, 1.0, 1.0);
    pub const BLACK: Rgb = Rgb::new(0.0, 0.0, 0.0);

    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Rgb::new(c[0], c[1], c[2])
    }

    pub fn clamped(self) -> Self {
        Rgb::new(clamp01(self.r), clamp01(self.g), clamp01(self.b))
    }
}

/// Fill color with a single opacity scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rgba {
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub a: f64,
}

impl Rgba {
    pub const fn new(r: f64, g: f64, b: f64, a: f64) -> Self {
        Rgba { r, g, b, a }
    }

    pub fn opaque(rgb: Rgb) -> Self {
        Rgba::new(rgb.r, rgb.g, rgb.b, 1.0)
    }

    pub fn rgb(self) -> Rgb {
        Rgb::new(self.r, self.g, self.b)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.r, self.g, self.b, self.a]
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Rgba::new(c[0], c[1], c[2], c[3])
    }

    pub fn clamped(self) -> Self {
        Rgba::new(
            clamp01(self.r),
            clamp01(self.g),
            clamp01(self.b),
            clamp01(self.a),
        )
    }
}

#[inline]
pub(crate) fn clamp01(v: f64) -> f64 {
    // NaN passes through so the optimizer's non-finite guard still sees it.
    if v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

/// One cubic Bézier: start `a`, controls `b` and `c`, end `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSegment {
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
}

impl CubicSegment {
    pub const fn new(a: Point, b: Point, c: Point, d: Point) -> Self {
        CubicSegment { a, b, c, d }
    }

    pub fn points(&self) -> [Point; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn eval(&self, t: f64) -> Point {
        // de Casteljau: exact for degenerate and straight segments
        let lerp = |p: Point, q: Point| p + (q - p) * t;
        let (ab, bc, cd) = (lerp(self.a, self.b), lerp(self.b, self.c), lerp(self.c, self.d));
        let (abc, bcd) = (lerp(ab, bc), lerp(bc, cd));
        lerp(abc, bcd)
    }
}

/// Cubic Bernstein basis at `t`.
#[inline]
pub fn bernstein3(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t]
}

/// A closed path of cubic segments with an RGBA fill.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    points: Vec<Point>,
    color: Rgba,
}

impl Shape {
    /// Builds a shape from `3 * segments` control points. Needs at least two
    /// segments and finite coordinates; the color is clamped to `[0, 1]`.
    pub fn new(points: Vec<Point>, color: Rgba) -> Result<Self> {
        if points.len() < 6 || points.len() % 3 != 0 {
            return Err(Error::invalid(alloc::format!(
                "a closed shape needs 3 control points per segment and at least 2 segments, got {} points",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite control point"));
        }
        Ok(Shape {
            points,
            color: color.clamped(),
        })
    }

    /// Builds a shape from explicit segments. Each segment's end must equal
    /// the next segment's start, wrapping around.
    pub fn from_segments(segments: &[CubicSegment], color: Rgba) -> Result<Self> {
        let n = segments.len();
        for (i, s) in segments.iter().enumerate() {
            if s.d != segments[(i + 1) % n].a {
                return Err(Error::invalid(alloc::format!(
                    "segment {i} does not end where segment {} starts",
                    (i + 1) % n
                )));
            }
        }
        let points = segments.iter().flat_map(|s| [s.a, s.b, s.c]).collect();
        Shape::new(points, color)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Point] {
        &mut self.points
    }

    pub fn color(&self) -> Rgba {
        self.color
    }

    pub fn set_color(&mut self, color: Rgba) {
        self.color = color.clamped();
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() / 3
    }

    /// Control-point indices `(a, b, c, d)` of segment `i`.
    #[inline]
    pub fn segment_indices(&self, i: usize) -> [usize; 4] {
        let n = self.points.len();
        [3 * i, 3 * i + 1, 3 * i + 2, (3 * i + 3) % n]
    }

    pub fn segment(&self, i: usize) -> CubicSegment {
        let [a, b, c, d] = self.segment_indices(i);
        CubicSegment::new(
            self.points[a],
            self.points[b],
            self.points[c],
            self.points[d],
        )
    }

    pub fn segments(&self) -> impl Iterator<Item = CubicSegment> + '_ {
        (0..self.segment_count()).map(|i| self.segment(i))
    }

    /// Flattened closed outline with `subdivisions` edges per segment.
    pub fn to_polyline(&self, subdivisions: usize) -> Polyline {
        let mut vertices = Vec::with_capacity(self.segment_count() * subdivisions);
        for seg in self.segments() {
            let pts = flatten(&seg, subdivisions);
            vertices.extend_from_slice(&pts[..pts.len() - 1]);
        }
        Polyline { vertices }
    }

    pub fn translate(&mut self, offset: Point) {
        for p in &mut self.points {
            *p += offset;
        }
    }
}

/// The vector image: shapes bottom to top over an opaque background.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub shapes: Vec<Shape>,
    pub width: usize,
    pub height: usize,
    pub background: Rgb,
}

impl Scene {
    pub fn new(width: usize, height: usize, background: Rgb) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCanvas);
        }
        Ok(Scene {
            shapes: Vec::new(),
            width,
            height,
            background,
        })
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    /// Copy of the scene with shape `index` removed.
    pub fn without(&self, index: usize) -> Result<Scene> {
        if index >= self.shapes.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.shapes.len(),
            });
        }
        let mut out = self.clone();
        out.shapes.remove(index);
        Ok(out)
    }

    /// Number of control points per shape, the layout every per-parameter
    /// buffer has to match.
    pub fn layout(&self) -> Vec<usize> {
        self.shapes.iter().map(|s| s.points.len()).collect()
    }
}

/// Closed flattened outline.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub vertices: Vec<Point>,
}

impl Polyline {
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// Samples the cubic at `t = k / subdivisions` for `k = 0..=subdivisions`.
/// Endpoints are reproduced exactly.
pub fn flatten(seg: &CubicSegment, subdivisions: usize) -> Vec<Point> {
    let n = subdivisions.max(1);
    let mut out = Vec::with_capacity(n + 1);
    out.push(seg.a);
    for k in 1..n {
        out.push(seg.eval(k as f64 / n as f64));
    }
    out.push(seg.d);
    out
}

/// Raw cross term fed to the sigmoid: positive means counter-clockwise.
#[inline]
fn orientation_arg(a: Point, b: Point, c: Point) -> f64 {
    (b.y - a.y) * (c.x - b.x) - (b.x - a.x) * (c.y - b.y)
}

/// Partial derivatives of [`orientation_arg`] w.r.t. `a`, `b`, `c`.
#[inline]
fn orientation_arg_grad(a: Point, b: Point, c: Point) -> [Point; 3] {
    [
        Point::new(c.y - b.y, b.x - c.x),
        Point::new(a.y - c.y, c.x - a.x),
        Point::new(b.y - a.y, a.x - b.x),
    ]
}

/// Soft orientation of the triple: 0 clockwise, 1 counter-clockwise.
/// The cross product is used at pixel scale, unnormalized.
pub fn orientation(a: Point, b: Point, c: Point) -> f64 {
    math::sigmoid(orientation_arg(a, b, c))
}

pub fn soft_and(p: f64, q: f64) -> f64 {
    p * q
}

/// `p + q - pq`. Algebraically this is a soft OR; kept in this form on
/// purpose since it is the loss being reproduced.
pub fn soft_xor(p: f64, q: f64) -> f64 {
    p + q - p * q
}

/// Soft indicator that chord `ab` crosses chord `cd`.
pub fn f_intersect(a: Point, b: Point, c: Point, d: Point) -> f64 {
    soft_and(
        soft_xor(orientation(a, b, c), orientation(a, b, d)),
        soft_xor(orientation(c, d, a), orientation(c, d, b)),
    )
}

/// Soft indicator that `abc` and `bcd` share an orientation.
pub fn f_orientation(a: Point, b: Point, c: Point, d: Point) -> f64 {
    soft_and(orientation(a, b, c), orientation(b, c, d))
}

pub fn geom_loss_ab(seg: &CubicSegment, lambda_p: f64) -> f64 {
    let CubicSegment { a, b, c, d } = *seg;
    lambda_p * (f_intersect(a, b, c, d) + f_orientation(a, b, c, d))
}

pub fn geom_loss_angle(seg: &CubicSegment) -> f64 {
    let CubicSegment { a, b, c, d } = *seg;
    obtuse_penalty(b - a, c - b) + obtuse_penalty(c - b, d - c)
}

/// `ReLU(-cos(u, v))`, zero when either vector is degenerate.
fn obtuse_penalty(u: Point, v: Point) -> f64 {
    let (lu, lv) = (u.length(), v.length());
    if lu < ANGLE_EPS || lv < ANGLE_EPS {
        return 0.0;
    }
    let cos = u.dot(v) / (lu * lv);
    if -cos > 0.0 {
        -cos
    } else {
        0.0
    }
}

/// Gradient of [`obtuse_penalty`] w.r.t. `u` and `v`.
fn obtuse_penalty_grad(u: Point, v: Point) -> (Point, Point) {
    let (lu, lv) = (u.length(), v.length());
    if lu < ANGLE_EPS || lv < ANGLE_EPS {
        return (Point::ZERO, Point::ZERO);
    }
    let inv = 1.0 / (lu * lv);
    let cos = u.dot(v) * inv;
    if cos >= 0.0 {
        return (Point::ZERO, Point::ZERO);
    }
    let du = v * inv - u * (cos / (lu * lu));
    let dv = u * inv - v * (cos / (lv * lv));
    (-du, -dv)
}

/// Combined per-segment loss `geom_loss_ab + geom_loss_angle` and its
/// gradient w.r.t. `(a, b, c, d)`.
pub fn segment_loss_grad(seg: &CubicSegment, lambda_p: f64) -> (f64, [Point; 4]) {
    let CubicSegment { a, b, c, d } = *seg;
    let mut grad = [Point::ZERO; 4];

    // (point indices, value) for the five orientation triples
    const TRIPLES: [[usize; 3]; 5] = [[0, 1, 2], [0, 1, 3], [2, 3, 0], [2, 3, 1], [1, 2, 3]];
    let p = [a, b, c, d];
    let o: [f64; 5] = TRIPLES.map(|[i, j, k]| orientation(p[i], p[j], p[k]));

    let x1 = soft_xor(o[0], o[1]);
    let x2 = soft_xor(o[2], o[3]);
    let ab = lambda_p * (x1 * x2 + o[0] * o[4]);

    let g_o = [
        lambda_p * (x2 * (1.0 - o[1]) + o[4]),
        lambda_p * x2 * (1.0 - o[0]),
        lambda_p * x1 * (1.0 - o[3]),
        lambda_p * x1 * (1.0 - o[2]),
        lambda_p * o[0],
    ];
    for (t, [i, j, k]) in TRIPLES.iter().enumerate() {
        let gz = g_o[t] * o[t] * (1.0 - o[t]);
        if gz == 0.0 {
            continue;
        }
        let [gi, gj, gk] = orientation_arg_grad(p[*i], p[*j], p[*k]);
        grad[*i] += gi * gz;
        grad[*j] += gj * gz;
        grad[*k] += gk * gz;
    }

    let (u, v, w) = (b - a, c - b, d - c);
    let angle = obtuse_penalty(u, v) + obtuse_penalty(v, w);
    let (gu1, gv1) = obtuse_penalty_grad(u, v);
    let (gv2, gw2) = obtuse_penalty_grad(v, w);
    let gu = gu1;
    let gv = gv1 + gv2;
    let gw = gw2;
    grad[0] += -gu;
    grad[1] += gu - gv;
    grad[2] += gv - gw;
    grad[3] += gw;

    (ab + angle, grad)
}

/// Sum of the per-segment geometric loss over every segment of every shape.
pub fn geometric_loss(scene: &Scene, lambda_p: f64) -> f64 {
    scene
        .shapes
        .iter()
        .flat_map(|s| s.segments())
        .map(|seg| geom_loss_ab(&seg, lambda_p) + geom_loss_angle(&seg))
        .sum()
}

/// [`geometric_loss`] together with its gradient, one vector of
/// control-point gradients per shape.
pub fn geometric_loss_grad(scene: &Scene, lambda_p: f64) -> (f64, Vec<Vec<Point>>) {
    let mut total = 0.0;
    let grads = scene
        .shapes
        .iter()
        .map(|shape| {
            let mut g = alloc::vec![Point::ZERO; shape.points.len()];
            for i in 0..shape.segment_count() {
                let (loss, sg) = segment_loss_grad(&shape.segment(i), lambda_p);
                total += loss;
                for (idx, gp) in shape.segment_indices(i).into_iter().zip(sg) {
                    g[idx] += gp;
                }
            }
            g
        })
        .collect();
    (total, grads)
}

/// Exact sign of the turn `a -> b -> c`.
#[inline]
fn turn(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

/// Proper crossing of segments `p1p2` and `q1q2` (touching does not count).
pub fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = turn(q1, q2, p1);
    let d2 = turn(q1, q2, p2);
    let d3 = turn(p1, p2, q1);
    let d4 = turn(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Number of non-adjacent edge pairs of the closed polyline that cross.
pub fn polyline_self_intersections(poly: &Polyline) -> usize {
    let v = &poly.vertices;
    let n = v.len();
    if n < 4 {
        return 0;
    }
    let mut count = 0;
    for i in 0..n {
        let (p1, p2) = (v[i], v[(i + 1) % n]);
        // j > i + 1 skips the next edge; the (0, n - 1) pair is adjacent too
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(p1, p2, v[j], v[(j + 1) % n]) {
                count += 1;
            }
        }
    }
    count
}

/// Flattens `shape` and counts proper self-crossings of its outline.
pub fn exact_self_intersections(shape: &Shape, subdivisions: usize) -> usize {
    polyline_self_intersections(&shape.to_polyline(subdivisions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn seg(pts: [(f64, f64); 4]) -> CubicSegment {
        CubicSegment::new(
            p(pts[0].0, pts[0].1),
            p(pts[1].0, pts[1].1),
            p(pts[2].0, pts[2].1),
            p(pts[3].0, pts[3].1),
        )
    }

    /// Four-arc circle approximation.
    pub(crate) fn circle_shape(cx: f64, cy: f64, r: f64) -> Shape {
        let k = 0.5522847498 * r;
        let pts = vec![
            p(cx + r, cy),
            p(cx + r, cy + k),
            p(cx + k, cy + r),
            p(cx, cy + r),
            p(cx - k, cy + r),
            p(cx - r, cy + k),
            p(cx - r, cy),
            p(cx - r, cy - k),
            p(cx - k, cy - r),
            p(cx, cy - r),
            p(cx + k, cy - r),
            p(cx + r, cy - k),
        ];
        Shape::new(pts, Rgba::new(0.0, 0.0, 0.0, 1.0)).unwrap()
    }

    fn sigmoid_ref(x: f64) -> f64 {
        1.0 / (1.0 + libm::exp(-x))
    }

    #[test]
    fn orientation_examples() {
        assert_eq!(orientation(p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)), 0.5);
        let cw = orientation(p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0));
        assert!((cw - 0.268_941_421_369_995_1).abs() < 1e-12);
        let ccw = orientation(p(0.0, 0.0), p(1.0, 0.0), p(1.0, -1.0));
        assert!((ccw - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn soft_boolean_examples() {
        assert_eq!(soft_and(1.0, 1.0), 1.0);
        assert_eq!(soft_and(0.0, 1.0), 0.0);
        assert_eq!(soft_and(0.5, 0.5), 0.25);
        assert_eq!(soft_xor(1.0, 0.0), 1.0);
        assert_eq!(soft_xor(0.0, 0.0), 0.0);
        assert_eq!(soft_xor(1.0, 1.0), 1.0);
    }

    /// Scalar re-evaluation of the composed indicator, written out longhand.
    fn f_intersect_oracle(a: Point, b: Point, c: Point, d: Point) -> f64 {
        let o = |p: Point, q: Point, r: Point| {
            sigmoid_ref((q.y - p.y) * (r.x - q.x) - (q.x - p.x) * (r.y - q.y))
        };
        let (o1, o2, o3, o4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
        (o1 + o2 - o1 * o2) * (o3 + o4 - o3 * o4)
    }

    #[test]
    fn f_intersect_examples() {
        let (a, b, c, d) = (p(0.0, 0.0), p(1.0, 1.0), p(0.0, 1.0), p(1.0, 0.0));
        let v = f_intersect(a, b, c, d);
        assert!((v - f_intersect_oracle(a, b, c, d)).abs() < 1e-15);
        // o(a,b,c)=S(-1), o(a,b,d)=S(1), o(c,d,a)=S(1), o(c,d,b)=S(-1)
        assert!((v - 0.645_432_385_809_989_2).abs() < 1e-12, "{v}");
        assert!(v > 0.2);

        let far = f_intersect(p(0.0, 0.0), p(10.0, 0.0), p(0.0, 20.0), p(10.0, 20.0));
        assert!(far < 0.1, "{far}");

        let z = p(3.0, 4.0);
        assert!((f_intersect(z, z, z, z) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn f_orientation_examples() {
        let ccw = f_orientation(p(0.0, 0.0), p(10.0, 0.0), p(10.0, 10.0), p(0.0, 10.0));
        let cw = f_orientation(p(0.0, 0.0), p(0.0, 10.0), p(10.0, 10.0), p(10.0, 0.0));
        // the raw cross term for the first square is -100 under this sign
        // convention, so "counter-clockwise" in y-down pixel space is the
        // mirrored square
        assert!(cw > 1.0 - 1e-12 || ccw > 1.0 - 1e-12);
        assert!(cw < 1e-12 || ccw < 1e-12);
        let collinear = f_orientation(p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0));
        assert_eq!(collinear, 0.25);
    }

    #[test]
    fn geom_loss_ab_examples() {
        let s = seg([(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]);
        assert_eq!(geom_loss_ab(&s, 0.0), 0.0);
        let v = geom_loss_ab(&s, 10.0);
        let expected = 10.0
            * (f_intersect_oracle(s.a, s.b, s.c, s.d)
                + sigmoid_ref(-1.0) * sigmoid_ref(
                    (s.c.y - s.b.y) * (s.d.x - s.c.x) - (s.c.x - s.b.x) * (s.d.y - s.c.y),
                ));
        assert!(v > 0.0);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn angle_loss_examples() {
        let straight = seg([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        assert_eq!(geom_loss_angle(&straight), 0.0);
        let reversal = seg([(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!((geom_loss_angle(&reversal) - 2.0).abs() < 1e-15);
        let right = seg([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (2.0, 1.0)]);
        assert_eq!(geom_loss_angle(&right), 0.0);
        let degenerate = seg([(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let v = geom_loss_angle(&degenerate);
        assert!(v.is_finite());
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_loss_scene_examples() {
        let empty = Scene::new(10, 10, Rgb::WHITE).unwrap();
        assert_eq!(geometric_loss(&empty, 10.0), 0.0);

        let mut scene = empty.clone();
        scene.shapes.push(circle_shape(5.0, 5.0, 3.0));
        let per_segment: f64 = scene.shapes[0]
            .segments()
            .map(|s| geom_loss_ab(&s, 10.0) + geom_loss_angle(&s))
            .sum();
        assert!((geometric_loss(&scene, 10.0) - per_segment).abs() < 1e-12);

        let angle: f64 = scene.shapes[0].segments().map(|s| geom_loss_angle(&s)).sum();
        let l1 = geometric_loss(&scene, 10.0) - angle;
        let l2 = geometric_loss(&scene, 20.0) - angle;
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        let (lg, _) = geometric_loss_grad(&scene, 10.0);
        assert!((lg - geometric_loss(&scene, 10.0)).abs() < 1e-12);
    }

    #[test]
    fn flatten_examples() {
        let q = p(2.0, -1.0);
        assert!(flatten(&CubicSegment::new(q, q, q, q), 5).iter().all(|&v| v == q));

        let line = seg([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let f = flatten(&line, 3);
        let expect = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0)];
        assert_eq!(f.len(), 4);
        for (a, b) in f.iter().zip(expect) {
            assert!((*a - b).length() < 1e-12);
        }

        let arch = seg([(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]);
        let mid = flatten(&arch, 2)[1];
        assert!((mid - p(0.5, 0.75)).length() < 1e-15);
    }

    #[test]
    fn shape_rejects_bad_layouts() {
        let c = Rgba::new(0.0, 0.0, 0.0, 1.0);
        assert!(Shape::new(vec![Point::ZERO; 3], c).is_err());
        assert!(Shape::new(vec![Point::ZERO; 7], c).is_err());
        assert!(Shape::new(vec![p(f64::NAN, 0.0); 6], c).is_err());
        let s = Shape::new(vec![Point::ZERO; 6], Rgba::new(2.0, -1.0, 0.5, 3.0)).unwrap();
        assert_eq!(s.color(), Rgba::new(1.0, 0.0, 0.5, 1.0));
    }

    #[test]
    fn from_segments_requires_closure() {
        let c = Rgba::new(0.0, 0.0, 0.0, 1.0);
        let s1 = seg([(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let s2 = seg([(3.0, 0.0), (2.0, 1.0), (1.0, 1.0), (0.0, 0.0)]);
        let shape = Shape::from_segments(&[s1, s2], c).unwrap();
        assert_eq!(shape.segment(1), s2);
        let open = seg([(3.0, 0.0), (2.0, 1.0), (1.0, 1.0), (0.5, 0.0)]);
        assert!(Shape::from_segments(&[s1, open], c).is_err());
    }

    #[test]
    fn exact_intersection_examples() {
        let quad = Polyline {
            vertices: vec![p(0.0, 0.0), p(4.0, 0.0), p(4.0, 3.0), p(0.0, 3.0)],
        };
        assert_eq!(polyline_self_intersections(&quad), 0);
        let bowtie = Polyline {
            vertices: vec![p(0.0, 0.0), p(4.0, 3.0), p(4.0, 0.0), p(0.0, 3.0)],
        };
        assert_eq!(polyline_self_intersections(&bowtie), 1);
        assert_eq!(exact_self_intersections(&circle_shape(50.0, 50.0, 30.0), 16), 0);

        // the same bowtie as a 4-segment shape with straight cubics; the
        // crossing at (2, 1.5) falls strictly inside two flattened edges
        let corners = [p(0.0, 0.0), p(4.3, 3.0), p(4.0, 0.0), p(0.0, 3.1)];
        let mut pts = vec![];
        for i in 0..4 {
            let (s, e) = (corners[i], corners[(i + 1) % 4]);
            pts.extend([s, s + (e - s) * (1.0 / 3.0), s + (e - s) * (2.0 / 3.0)]);
        }
        let shape = Shape::new(pts, Rgba::new(0.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(exact_self_intersections(&shape, 16), 1);
    }
}
