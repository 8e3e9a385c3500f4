mod common;

use vectorforge_core::clusterinit::circle_seed;
use vectorforge_core::optimizer::{loss_and_grad, loss_value};
use vectorforge_core::raster::{render, render_without, SceneRaster};
use vectorforge_core::{LossConfig, Point, RasterImage, Rgb, Rgba, Scene, Shape};

fn mse_only() -> LossConfig {
    LossConfig {
        lambda_geometric: 0.0,
        ..LossConfig::default()
    }
}

#[test]
fn gradients_match_finite_differences_at_coarse_steps() {
    let cfg = mse_only();
    for seed in 0..10 {
        let mut r = common::rng(300 + seed);
        let scene = common::random_scene(&mut r, 32, 32, 3);
        let target = common::random_image(&mut r, 32, 32);
        let (_, grads) = loss_and_grad(&scene, &target, &cfg).unwrap();
        let ok = |an: f64, fd: f64| (an - fd).abs() <= 1e-6 || (an - fd).abs() <= 1e-2 * fd.abs().max(an.abs());
        for s in 0..scene.len() {
            for p in 0..scene.shapes[s].points().len() {
                let h = 1e-3;
                let mut plus = scene.clone();
                let mut minus = scene.clone();
                plus.shapes[s].points_mut()[p].y += h;
                minus.shapes[s].points_mut()[p].y -= h;
                let fd = (loss_value(&plus, &target, &cfg).unwrap() - loss_value(&minus, &target, &cfg).unwrap()) / (2.0 * h);
                let an = grads.points[s][p].y;
                assert!(ok(an, fd), "seed {seed} shape {s} point {p}: {an} vs {fd}");
            }
            for ch in 0..4 {
                let h = 1e-4;
                let with = |d: f64| {
                    let mut sc = scene.clone();
                    let mut c = sc.shapes[s].color().to_array();
                    c[ch] += d;
                    sc.shapes[s].set_color(Rgba::from_array(c));
                    loss_value(&sc, &target, &cfg).unwrap()
                };
                let fd = (with(h) - with(-h)) / (2.0 * h);
                let an = grads.colors[s][ch];
                assert!(ok(an, fd), "seed {seed} shape {s} channel {ch}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn translation_gradient_opposes_shift() {
    let cfg = mse_only();
    let mut r = common::rng(17);
    for _ in 0..10 {
        let shape = common::blob(&mut r, Point::new(20.0, 20.0), 8.0, 4, 1.0, Rgba::new(0.1, 0.2, 0.7, 1.0));
        let mut scene = Scene::new(40, 40, Rgb::WHITE).unwrap();
        scene.shapes.push(shape);
        let shift = common::point(&mut r, -3.0, 3.0);
        let mut moved = scene.clone();
        moved.shapes[0].translate(shift);
        let target = render(&moved).unwrap();
        let (_, grads) = loss_and_grad(&scene, &target, &cfg).unwrap();
        let total = grads.points[0].iter().fold(Point::ZERO, |a, &b| a + b);
        assert!(total.dot(shift) < 0.0, "gradient {total:?} shift {shift:?}");
    }
}

fn full_cover(color: Rgba) -> Shape {
    circle_seed(Point::new(10.0, 10.0), 40.0, 4, color).unwrap()
}

#[test]
fn full_canvas_color_gradient_is_mean_residual() {
    let cfg = mse_only();
    let mut r = common::rng(23);
    let target = common::random_image(&mut r, 20, 20);
    let mut scene = Scene::new(20, 20, Rgb::WHITE).unwrap();
    scene.shapes.push(full_cover(Rgba::new(0.3, 0.6, 0.2, 1.0)));
    let img = render(&scene).unwrap();
    let (_, grads) = loss_and_grad(&scene, &target, &cfg).unwrap();
    let n = (20 * 20 * 3) as f64;
    for ch in 0..3 {
        // mean over all values, only this channel's residuals contribute
        let residual: f64 = img
            .data()
            .iter()
            .zip(target.data())
            .skip(ch)
            .step_by(3)
            .map(|(a, b)| a - b)
            .sum();
        let expected = 2.0 * residual / n;
        assert!((grads.colors[0][ch] - expected).abs() < 1e-12, "{} vs {expected}", grads.colors[0][ch]);
    }
}

#[test]
fn compositing_is_sequential_over() {
    let mut r = common::rng(29);
    for _ in 0..20 {
        let scene = common::random_scene(&mut r, 24, 20, 2);
        let mut bottom = scene.clone();
        bottom.shapes.truncate(1);
        let under = render(&bottom).unwrap();
        let full = render(&scene).unwrap();
        let layers = SceneRaster::new(&scene, false).unwrap();
        let c = scene.shapes[1].color();
        for y in 0..20 {
            for x in 0..24 {
                let a = layers.coverage_at(1, x, y) * c.a;
                let u = under.pixel(x, y);
                let expect = [a * c.r + (1.0 - a) * u.r, a * c.g + (1.0 - a) * u.g, a * c.b + (1.0 - a) * u.b];
                let got = full.pixel(x, y).to_array();
                for k in 0..3 {
                    assert!((got[k] - expect[k]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn render_without_equals_rerender() {
    let mut r = common::rng(31);
    for _ in 0..20 {
        let scene = common::random_scene(&mut r, 30, 30, 5);
        for i in 0..5 {
            let mut removed = scene.clone();
            removed.shapes.remove(i);
            assert_eq!(render_without(&scene, i).unwrap(), render(&removed).unwrap());
        }
    }
}

#[test]
fn fully_occluded_removal_changes_nothing() {
    let mut scene = Scene::new(20, 20, Rgb::WHITE).unwrap();
    scene.shapes.push(circle_seed(Point::new(10.0, 10.0), 3.0, 4, Rgba::new(0.9, 0.1, 0.1, 1.0)).unwrap());
    scene.shapes.push(full_cover(Rgba::new(0.2, 0.4, 0.6, 1.0)));
    let full = render(&scene).unwrap();
    let without = render_without(&scene, 0).unwrap();
    for (a, b) in full.data().iter().zip(without.data()) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn coverage_saturates_five_sigma_from_the_edge() {
    let mut scene = Scene::new(40, 40, Rgb::WHITE).unwrap();
    let radius = 12.0;
    let center = Point::new(20.0, 20.0);
    scene.shapes.push(circle_seed(center, radius, 8, Rgba::new(0.0, 0.0, 0.0, 1.0)).unwrap());
    let layers = SceneRaster::new(&scene, false).unwrap();
    // the 8-segment seed deviates from the circle by far less than 0.05 px
    let margin = 5.0 * vectorforge_core::raster::SIGMA + 0.05;
    for y in 0..40 {
        for x in 0..40 {
            let d = (Point::new(x as f64 + 0.5, y as f64 + 0.5) - center).length() - radius;
            let c = layers.coverage_at(0, x, y);
            assert!((0.0..=1.0).contains(&c));
            if d <= -margin {
                assert!(c > 0.99, "({x},{y}) d={d} c={c}");
            } else if d >= margin {
                assert!(c < 0.01, "({x},{y}) d={d} c={c}");
            }
        }
    }
}

#[cfg(feature = "std")]
#[test]
fn renders_are_identical_across_thread_counts() {
    let mut r = common::rng(37);
    let scene = common::random_scene(&mut r, 64, 48, 12);
    let target = common::random_image(&mut r, 64, 48);
    let cfg = LossConfig::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let img = render(&scene).unwrap();
                let (loss, grads) = loss_and_grad(&scene, &target, &cfg).unwrap();
                (img, loss.to_bits(), grads)
            })
    };
    let one = run(1);
    for t in [2, 3, 8] {
        let other = run(t);
        assert_eq!(one.0, other.0);
        assert_eq!(one.1, other.1);
        assert_eq!(one.2, other.2);
    }
}

#[test]
fn image_losses_reject_mismatched_sizes() {
    let a = RasterImage::filled(3, 3, Rgb::WHITE).unwrap();
    let b = RasterImage::filled(3, 4, Rgb::WHITE).unwrap();
    assert!(a.mse(&b).is_err());
}
