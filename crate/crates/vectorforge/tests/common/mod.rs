//! Synthetic targets drawn by a small supersampling painter that shares no
//! code with the engine's rasterizer.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vectorforge_core::{Point, RasterImage, Rgb, Rgba, Scene, Shape};

#[derive(Clone, Debug)]
pub enum Prim {
    Disk { c: (f64, f64), r: f64, color: Rgb },
    Poly { pts: Vec<(f64, f64)>, color: Rgb },
}

impl Prim {
    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Prim::Disk { c, r, .. } => (x - c.0).powi(2) + (y - c.1).powi(2) <= r * r,
            Prim::Poly { pts, .. } => {
                // nonzero winding
                let mut wn = 0i32;
                for i in 0..pts.len() {
                    let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
                    let side = (b.0 - a.0) * (y - a.1) - (x - a.0) * (b.1 - a.1);
                    if a.1 <= y && b.1 > y && side > 0.0 {
                        wn += 1;
                    } else if a.1 > y && b.1 <= y && side < 0.0 {
                        wn -= 1;
                    }
                }
                wn != 0
            }
        }
    }

    fn color(&self) -> Rgb {
        match self {
            Prim::Disk { color, .. } | Prim::Poly { color, .. } => *color,
        }
    }
}

/// Paints `prims` in order over `bg` with `ss` x `ss` samples per pixel.
pub fn paint(w: usize, h: usize, bg: Rgb, prims: &[Prim], ss: usize) -> RasterImage {
    RasterImage::from_fn(w, h, |x, y| {
        let mut acc = [0.0; 3];
        for sy in 0..ss {
            for sx in 0..ss {
                let px = x as f64 + (sx as f64 + 0.5) / ss as f64;
                let py = y as f64 + (sy as f64 + 0.5) / ss as f64;
                let c = prims.iter().rev().find(|p| p.contains(px, py)).map_or(bg, Prim::color);
                acc[0] += c.r;
                acc[1] += c.g;
                acc[2] += c.b;
            }
        }
        let n = (ss * ss) as f64;
        Rgb::new(acc[0] / n, acc[1] / n, acc[2] / n)
    })
    .unwrap()
}

pub fn rgb8(r: u8, g: u8, b: u8) -> Rgb {
    Rgb::new(r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0)
}

fn disk(cx: f64, cy: f64, r: f64, color: Rgb) -> Prim {
    Prim::Disk { c: (cx, cy), r, color }
}

fn poly(pts: &[(f64, f64)], color: Rgb) -> Prim {
    Prim::Poly { pts: pts.to_vec(), color }
}

fn star(cx: f64, cy: f64, r_out: f64, r_in: f64, n: usize, color: Rgb) -> Prim {
    let pts = (0..2 * n)
        .map(|i| {
            let t = i as f64 * std::f64::consts::PI / n as f64 - std::f64::consts::FRAC_PI_2;
            let r = if i % 2 == 0 { r_out } else { r_in };
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect::<Vec<_>>();
    poly(&pts, color)
}

/// The ten-image benchmark suite: disks, overlapping polygons and flat
/// cartoon scenes, drawn on a `size` x `size` canvas.
pub fn suite(size: usize) -> Vec<(&'static str, RasterImage)> {
    let s = size as f64 / 64.0;
    let p = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| (x * s, y * s)).collect::<Vec<_>>();
    let mut out: Vec<(&'static str, Vec<Prim>)> = vec![
        ("disk", vec![disk(32.0 * s, 32.0 * s, 20.0 * s, rgb8(200, 30, 40))]),
        (
            "three_disks",
            vec![
                disk(22.0 * s, 24.0 * s, 14.0 * s, rgb8(230, 60, 50)),
                disk(40.0 * s, 26.0 * s, 13.0 * s, rgb8(40, 160, 70)),
                disk(31.0 * s, 42.0 * s, 14.0 * s, rgb8(40, 70, 200)),
            ],
        ),
        (
            "tinted_disks",
            vec![
                poly(&p(&[(0.0, 0.0), (64.0, 0.0), (64.0, 64.0), (0.0, 64.0)]), rgb8(235, 225, 190)),
                disk(20.0 * s, 40.0 * s, 12.0 * s, rgb8(120, 40, 140)),
                disk(44.0 * s, 22.0 * s, 10.0 * s, rgb8(250, 160, 20)),
            ],
        ),
        (
            "triangle_square",
            vec![
                poly(&p(&[(10.0, 12.0), (42.0, 12.0), (42.0, 44.0), (10.0, 44.0)]), rgb8(30, 120, 200)),
                poly(&p(&[(24.0, 20.0), (56.0, 54.0), (14.0, 56.0)]), rgb8(240, 200, 40)),
            ],
        ),
        (
            "star_disk",
            vec![
                disk(40.0 * s, 40.0 * s, 16.0 * s, rgb8(60, 180, 170)),
                star(26.0 * s, 26.0 * s, 20.0 * s, 9.0 * s, 5, rgb8(220, 40, 90)),
            ],
        ),
        (
            "house",
            vec![
                poly(&p(&[(0.0, 50.0), (64.0, 50.0), (64.0, 64.0), (0.0, 64.0)]), rgb8(80, 170, 60)),
                poly(&p(&[(16.0, 28.0), (48.0, 28.0), (48.0, 52.0), (16.0, 52.0)]), rgb8(210, 180, 140)),
                poly(&p(&[(12.0, 30.0), (32.0, 10.0), (52.0, 30.0)]), rgb8(170, 40, 40)),
                poly(&p(&[(27.0, 38.0), (37.0, 38.0), (37.0, 52.0), (27.0, 52.0)]), rgb8(90, 60, 30)),
            ],
        ),
        (
            "face",
            vec![
                disk(32.0 * s, 32.0 * s, 26.0 * s, rgb8(250, 205, 50)),
                disk(23.0 * s, 25.0 * s, 4.5 * s, rgb8(50, 30, 20)),
                disk(41.0 * s, 25.0 * s, 4.5 * s, rgb8(50, 30, 20)),
                poly(&p(&[(18.0, 38.0), (46.0, 38.0), (40.0, 48.0), (24.0, 48.0)]), rgb8(180, 40, 50)),
            ],
        ),
        (
            "rings",
            vec![
                disk(32.0 * s, 32.0 * s, 24.0 * s, rgb8(30, 60, 150)),
                disk(32.0 * s, 32.0 * s, 16.0 * s, rgb8(240, 240, 240)),
                disk(32.0 * s, 32.0 * s, 8.0 * s, rgb8(220, 50, 30)),
                poly(&p(&[(4.0, 56.0), (60.0, 56.0), (60.0, 61.0), (4.0, 61.0)]), rgb8(20, 20, 20)),
            ],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random_color = |rng: &mut ChaCha8Rng| rgb8(rng.gen(), rng.gen(), rng.gen());
    let disks: Vec<Prim> = (0..5)
        .map(|_| {
            let c = (rng.gen_range(12.0..52.0) * s, rng.gen_range(12.0..52.0) * s);
            disk(c.0, c.1, rng.gen_range(6.0..14.0) * s, random_color(&mut rng))
        })
        .collect();
    out.push(("random_disks", disks));
    let polys: Vec<Prim> = (0..4)
        .map(|_| {
            let c = (rng.gen_range(16.0..48.0), rng.gen_range(16.0..48.0));
            let n = rng.gen_range(3..6);
            let r = rng.gen_range(10.0..18.0);
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64 * std::f64::consts::TAU + rng.gen_range(-0.3..0.3);
                    (c.0 + r * t.cos(), c.1 + r * t.sin())
                })
                .collect();
            poly(&p(&pts), random_color(&mut rng))
        })
        .collect();
    out.push(("random_polygons", polys));
    out.into_iter()
        .map(|(name, prims)| (name, paint(size, size, Rgb::WHITE, &prims, 4)))
        .collect()
}

/// Circle-like closed shape with every control point jittered by up to
/// `jitter` pixels.
pub fn wobbly_shape(rng: &mut ChaCha8Rng, center: Point, radius: f64, segments: usize, jitter: f64, color: Rgba) -> Shape {
    let n = 3 * segments;
    let pts = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            Point::new(
                center.x + radius * t.cos() + rng.gen_range(-jitter..=jitter),
                center.y + radius * t.sin() + rng.gen_range(-jitter..=jitter),
            )
        })
        .collect();
    Shape::new(pts, color).unwrap()
}

/// Random scene with translucent, irregular shapes and a random background.
pub fn random_scene(rng: &mut ChaCha8Rng, w: usize, h: usize, n: usize) -> Scene {
    let bg = Rgb::new(rng.gen(), rng.gen(), rng.gen());
    let mut scene = Scene::new(w, h, bg).unwrap();
    let side = w.min(h) as f64;
    for _ in 0..n {
        let c = Point::new(rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64));
        let r = rng.gen_range(0.1 * side..0.35 * side);
        let color = Rgba::new(rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95), rng.gen_range(0.2..0.95));
        let segs = rng.gen_range(2..6);
        scene.shapes.push(wobbly_shape(rng, c, r, segs, 0.4 * r, color));
    }
    scene
}

/// Random smooth-ish target image.
pub fn random_target(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RasterImage {
    let prims: Vec<Prim> = (0..4)
        .map(|_| {
            disk(
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(3.0..w as f64 / 2.0),
                Rgb::new(rng.gen(), rng.gen(), rng.gen()),
            )
        })
        .collect();
    paint(w, h, Rgb::new(rng.gen(), rng.gen(), rng.gen()), &prims, 2)
}
