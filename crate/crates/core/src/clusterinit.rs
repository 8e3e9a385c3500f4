//! Initial scene from the raster target.
//!
//! Colors of a downsampled copy are clustered with DBSCAN, the labels are
//! projected back to full resolution, and the largest 4-connected
//! components become circle-like seed shapes.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Point, Rgb, Rgba, Scene, Shape};
use crate::math;
use crate::raster::RasterImage;

/// Knobs for [`init_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    /// Side of the square grid DBSCAN runs on.
    pub downsample: usize,
    /// Neighborhood radius, in 0-255 RGB units.
    pub eps: f64,
    pub min_points: usize,
    /// Seed radius as a fraction of the component's equivalent-disk radius.
    pub radius_scale: f64,
    pub segments_per_shape: usize,
    /// Components smaller than this are skipped while larger ones remain.
    pub min_component_area: usize,
    /// Half-width of the centroid jitter used when components are reused.
    pub jitter: f64,
    pub seed: u64,
    pub background: Rgb,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            downsample: 100,
            eps: 5.0,
            min_points: 20,
            radius_scale: 0.5,
            segments_per_shape: 4,
            min_component_area: 48,
            jitter: 2.0,
            seed: 0,
            background: Rgb::WHITE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorCluster {
    /// `(x, y)` coordinates on the clustered grid.
    pub members: Vec<(usize, usize)>,
    pub mean: Rgb,
}

/// Per-pixel cluster labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
}

impl LabelMap {
    pub fn get(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }

    /// Nearest-neighbor upscaling (or downscaling) to `width` x `height`.
    pub fn resample(&self, width: usize, height: usize) -> LabelMap {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = nearest_index(y, height, self.height);
            for x in 0..width {
                labels.push(self.get(nearest_index(x, width, self.width), sy));
            }
        }
        LabelMap {
            width,
            height,
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: usize,
    pub pixels: Vec<(usize, usize)>,
    pub area: usize,
    /// Mean of member pixel centers.
    pub centroid: Point,
    pub mean: Rgb,
}

#[inline]
fn nearest_index(i: usize, dst: usize, src: usize) -> usize {
    let s = math::floor((i as f64 + 0.5) * src as f64 / dst as f64) as usize;
    s.min(src - 1)
}

/// Point-samples `img` at the centers of a `width` x `height` grid. No new
/// colors are introduced, so flat regions stay flat.
pub fn downsample_nearest(img: &RasterImage, width: usize, height: usize) -> Result<RasterImage> {
    RasterImage::from_fn(width, height, |x, y| {
        img.pixel(
            nearest_index(x, width, img.width()),
            nearest_index(y, height, img.height()),
        )
    })
}

const NOISE: usize = usize::MAX;

/// DBSCAN over pixel colors on the 0-255 scale with Euclidean distance.
/// Noise pixels join the cluster whose mean is nearest. Returns the clusters
/// and the label of every pixel.
pub fn cluster_colors(img: &RasterImage, eps: f64, min_points: usize) -> Result<(Vec<ColorCluster>, LabelMap)> {
    if !(eps > 0.0) || min_points < 1 {
        return Err(Error::invalid("DBSCAN needs eps > 0 and min_points >= 1"));
    }
    let (w, h) = img.dims();

    // identical colors are identical points; cluster the distinct ones
    let mut index_of: BTreeMap<[u64; 3], usize> = BTreeMap::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut pixel_color = Vec::with_capacity(w * h);
    for px in img.pixels() {
        let c = px.map(|v| v * 255.0);
        let key = c.map(f64::to_bits);
        let idx = *index_of.entry(key).or_insert_with(|| {
            colors.push(c);
            counts.push(0);
            colors.len() - 1
        });
        counts[idx] += 1;
        pixel_color.push(idx);
    }

    let cell_of = |c: &[f64; 3]| c.map(|v| math::floor(v / eps) as i64);
    let mut grid: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, c) in colors.iter().enumerate() {
        grid.entry(cell_of(c)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        let c = colors[i];
        let cell = cell_of(&c);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [cell[0] + dx, cell[1] + dy, cell[2] + dz];
                    if let Some(list) = grid.get(&key) {
                        for &j in list {
                            let o = colors[j];
                            let d2 = (c[0] - o[0]) * (c[0] - o[0])
                                + (c[1] - o[1]) * (c[1] - o[1])
                                + (c[2] - o[2]) * (c[2] - o[2]);
                            if d2 <= eps2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    };

    let n = colors.len();
    let mut label = vec![NOISE; n];
    let mut visited = vec![false; n];
    let mut n_clusters = 0;
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let nb = neighbors(start);
        if nb.iter().map(|&j| counts[j]).sum::<usize>() < min_points {
            continue;
        }
        let cid = n_clusters;
        n_clusters += 1;
        label[start] = cid;
        let mut queue = nb;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if label[j] == NOISE {
                label[j] = cid;
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = neighbors(j);
            if nb.iter().map(|&k| counts[k]).sum::<usize>() >= min_points {
                queue.extend(nb);
            }
        }
    }

    if n_clusters == 0 {
        // everything is noise; fall back to a single cluster
        label.iter_mut().for_each(|l| *l = 0);
        n_clusters = 1;
    } else {
        let mut sums = vec![[0.0f64; 3]; n_clusters];
        let mut sizes = vec![0usize; n_clusters];
        for i in 0..n {
            if label[i] != NOISE {
                for ch in 0..3 {
                    sums[label[i]][ch] += colors[i][ch] * counts[i] as f64;
                }
                sizes[label[i]] += counts[i];
            }
        }
        let means: Vec<[f64; 3]> = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| s.map(|v| v / n as f64))
            .collect();
        for i in 0..n {
            if label[i] == NOISE {
                let c = colors[i];
                let mut best = (f64::INFINITY, 0);
                for (k, m) in means.iter().enumerate() {
                    let d2 = (c[0] - m[0]) * (c[0] - m[0])
                        + (c[1] - m[1]) * (c[1] - m[1])
                        + (c[2] - m[2]) * (c[2] - m[2]);
                    if d2 < best.0 {
                        best = (d2, k);
                    }
                }
                label[i] = best.1;
            }
        }
    }

    let labels: Vec<usize> = pixel_color.iter().map(|&c| label[c]).collect();
    let mut clusters: Vec<ColorCluster> = (0..n_clusters)
        .map(|_| ColorCluster {
            members: Vec::new(),
            mean: Rgb::BLACK,
        })
        .collect();
    let mut sums = vec![[0.0f64; 3]; n_clusters];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            clusters[l].members.push((x, y));
            let p = img.pixel(x, y).to_array();
            for ch in 0..3 {
                sums[l][ch] += p[ch];
            }
        }
    }
    for (c, s) in clusters.iter_mut().zip(&sums) {
        let n = c.members.len().max(1) as f64;
        c.mean = Rgb::new(s[0] / n, s[1] / n, s[2] / n);
    }
    Ok((
        clusters,
        LabelMap {
            width: w,
            height: h,
            labels,
        },
    ))
}

/// DBSCAN clusters of the image colors. See [`cluster_colors`].
pub fn dbscan_colors(img: &RasterImage, eps: f64, min_points: usize) -> Result<Vec<ColorCluster>> {
    Ok(cluster_colors(img, eps, min_points)?.0)
}

/// 4-connected components of equal labels, with area, centroid and mean
/// color taken from `img`. Ordered by first pixel in scan order.
pub fn connected_components(labels: &LabelMap, img: &RasterImage) -> Result<Vec<Component>> {
    if (labels.width, labels.height) != img.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: (labels.width, labels.height),
        });
    }
    let (w, h) = (labels.width, labels.height);
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let label = labels.labels[start];
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut sum = [0.0; 3];
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            let c = img.pixel(x, y).to_array();
            for ch in 0..3 {
                sum[ch] += c[ch];
            }
            let mut visit = |j: usize| {
                if !seen[j] && labels.labels[j] == label {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        let area = pixels.len();
        let n = area as f64;
        out.push(Component {
            label,
            area,
            centroid: Point::new(sx / n, sy / n),
            mean: Rgb::new(sum[0] / n, sum[1] / n, sum[2] / n),
            pixels,
        });
    }
    Ok(out)
}

/// Closed circle-like shape: anchors evenly spaced on the circle, handles
/// tangent with the standard arc-approximation length.
pub fn circle_seed(center: Point, radius: f64, segments: usize, color: Rgba) -> Result<Shape> {
    if segments < 2 {
        return Err(Error::invalid("a seed needs at least 2 segments"));
    }
    let n = segments as f64;
    let handle = 4.0 / 3.0 * math::tan(PI / (2.0 * n)) * radius;
    let mut pts = Vec::with_capacity(segments * 3);
    let at = |k: usize| {
        let th = 2.0 * PI * k as f64 / n;
        let (s, c) = (math::sin(th), math::cos(th));
        (center + Point::new(c, s) * radius, Point::new(-s, c))
    };
    for k in 0..segments {
        let (p0, t0) = at(k);
        let (p1, t1) = at(k + 1);
        pts.push(p0);
        pts.push(p0 + t0 * handle);
        pts.push(p1 - t1 * handle);
    }
    Shape::new(pts, color)
}

/// Seed radius for a component of `area` pixels.
pub fn seed_radius(area: usize, radius_scale: f64) -> f64 {
    radius_scale * math::sqrt(area as f64 / PI)
}

/// Builds the initial `n_shapes`-shape scene for `img`.
pub fn init_scene(img: &RasterImage, n_shapes: usize, cfg: &InitConfig) -> Result<Scene> {
    if n_shapes < 1 {
        return Err(Error::invalid("n_shapes must be at least 1"));
    }
    let (w, h) = img.dims();
    let small = downsample_nearest(img, cfg.downsample.min(w), cfg.downsample.min(h))?;
    let (_, small_labels) = cluster_colors(&small, cfg.eps, cfg.min_points)?;
    let labels = small_labels.resample(w, h);
    let mut comps = connected_components(&labels, img)?;

    if comps.iter().any(|c| c.area >= cfg.min_component_area) {
        comps.retain(|c| c.area >= cfg.min_component_area);
    }
    comps.sort_by(|a, b| {
        b.area
            .cmp(&a.area)
            .then(a.centroid.y.total_cmp(&b.centroid.y))
            .then(a.centroid.x.total_cmp(&b.centroid.x))
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scene = Scene::new(w, h, cfg.background)?;
    for i in 0..n_shapes {
        let comp = &comps[i % comps.len()];
        let mut center = comp.centroid;
        if i >= comps.len() && cfg.jitter > 0.0 {
            center.x += rng.gen_range(-cfg.jitter..=cfg.jitter);
            center.y += rng.gen_range(-cfg.jitter..=cfg.jitter);
            center.x = center.x.clamp(0.0, w as f64);
            center.y = center.y.clamp(0.0, h as f64);
        }
        let radius = seed_radius(comp.area, cfg.radius_scale);
        scene.shapes.push(circle_seed(
            center,
            radius,
            cfg.segments_per_shape,
            Rgba::opaque(comp.mean),
        )?);
    }
    Ok(scene)
}

/// Random circle seeds with random opaque colors, the baseline start.
pub fn random_scene(
    width: usize,
    height: usize,
    n_shapes: usize,
    segments: usize,
    seed: u64,
    background: Rgb,
) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::new(width, height, background)?;
    let side = width.min(height) as f64;
    for _ in 0..n_shapes {
        let center = Point::new(
            rng.gen_range(0.0..width as f64),
            rng.gen_range(0.0..height as f64),
        );
        let radius = rng.gen_range(0.05 * side..0.15 * side);
        let color = Rgba::new(rng.gen(), rng.gen(), rng.gen(), 1.0);
        scene.shapes.push(circle_seed(center, radius, segments, color)?);
    }
    Ok(scene)
}
