#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vectorforge_core::{CubicSegment, Point, RasterImage, Rgb, Rgba, Scene, Shape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn point(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Point {
    Point::new(r.gen_range(lo..hi), r.gen_range(lo..hi))
}

pub fn segment(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> CubicSegment {
    CubicSegment::new(point(r, lo, hi), point(r, lo, hi), point(r, lo, hi), point(r, lo, hi))
}

/// Jittered circle with `segments` cubic segments.
pub fn blob(r: &mut ChaCha8Rng, center: Point, radius: f64, segments: usize, jitter: f64, color: Rgba) -> Shape {
    let n = 3 * segments;
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            Point::new(
                center.x + radius * t.cos() + r.gen_range(-jitter..=jitter),
                center.y + radius * t.sin() + r.gen_range(-jitter..=jitter),
            )
        })
        .collect();
    Shape::new(pts, color).unwrap()
}

pub fn random_scene(r: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Scene {
    let mut scene = Scene::new(w, h, Rgb::new(r.gen(), r.gen(), r.gen())).unwrap();
    let side = w.min(h) as f64;
    for _ in 0..n {
        let c = Point::new(r.gen_range(0.0..w as f64), r.gen_range(0.0..h as f64));
        let radius = r.gen_range(0.1 * side..0.35 * side);
        let color = Rgba::new(r.gen_range(0.05..0.95), r.gen_range(0.05..0.95), r.gen_range(0.05..0.95), r.gen_range(0.2..0.95));
        let segments = r.gen_range(2..6);
        scene.shapes.push(blob(r, c, radius, segments, 0.3 * radius, color));
    }
    scene
}

pub fn random_image(r: &mut ChaCha8Rng, w: usize, h: usize) -> RasterImage {
    let data = (0..w * h * 3).map(|_| r.gen::<f64>()).collect();
    RasterImage::from_raw(w, h, data).unwrap()
}

/// 4x4 supersampled disks over a background, painted independently of the
/// engine's rasterizer.
pub fn disks(w: usize, h: usize, bg: Rgb, disks: &[(f64, f64, f64, Rgb)]) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| {
        let mut acc = [0.0; 3];
        for sy in 0..4 {
            for sx in 0..4 {
                let px = x as f64 + (sx as f64 + 0.5) / 4.0;
                let py = y as f64 + (sy as f64 + 0.5) / 4.0;
                let c = disks
                    .iter()
                    .rev()
                    .find(|d| (px - d.0).powi(2) + (py - d.1).powi(2) <= d.2 * d.2)
                    .map_or(bg, |d| d.3);
                acc[0] += c.r / 16.0;
                acc[1] += c.g / 16.0;
                acc[2] += c.b / 16.0;
            }
        }
        Rgb::from_array(acc)
    })
    .unwrap()
}
