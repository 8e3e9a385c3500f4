//! Gradient descent over all shape parameters at once.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{self, clamp01, Point, Rgba, Scene};
use crate::math;
use crate::raster::{GradientSet, PixelLoss, RasterImage, SceneRaster};

pub use crate::raster::PixelLoss as ReconKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub recon_kind: ReconKind,
    /// Weight of `recon_kind` against an auxiliary MSE term:
    /// `alpha * recon + (1 - alpha) * mse`.
    pub alpha_blend: f64,
    pub lambda_geometric: f64,
    pub lambda_p: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            recon_kind: ReconKind::Mse,
            alpha_blend: 1.0,
            lambda_geometric: 0.01,
            lambda_p: 10.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_blend) {
            return Err(Error::invalid("alpha_blend must lie in [0, 1]"));
        }
        if !(self.lambda_geometric >= 0.0 && self.lambda_geometric.is_finite()) {
            return Err(Error::invalid("lambda_geometric must be finite and >= 0"));
        }
        if !(self.lambda_p >= 0.0 && self.lambda_p.is_finite()) {
            return Err(Error::invalid("lambda_p must be finite and >= 0"));
        }
        Ok(())
    }
}

/// When to stop a single optimize phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub min_iters: usize,
    pub max_iters: usize,
    /// Stop once `(prev - cur) / prev` drops below this.
    pub rel_improve_floor: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_iters: 50,
            max_iters: 500,
            rel_improve_floor: 1e-4,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.min_iters < 1 || self.min_iters > self.max_iters {
            return Err(Error::invalid("need 1 <= min_iters <= max_iters"));
        }
        if !(self.rel_improve_floor >= 0.0) {
            return Err(Error::invalid("rel_improve_floor must be >= 0"));
        }
        Ok(())
    }

    /// Whether to stop after iteration `iter` (1-based) given the last two
    /// losses.
    pub fn should_stop(&self, iter: usize, prev: Option<f64>, cur: f64) -> bool {
        if iter >= self.max_iters {
            return true;
        }
        if iter < self.min_iters {
            return false;
        }
        if self.rel_improve_floor == f64::INFINITY {
            return true;
        }
        let Some(prev) = prev else {
            return false;
        };
        let rel = if prev > 0.0 { (prev - cur) / prev } else { 0.0 };
        rel < self.rel_improve_floor
    }
}

/// Learning rates for the two parameter groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr_points: f64,
    pub lr_colors: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr_points: 1.0,
            lr_colors: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.lr_points) || !ok(self.lr_colors) || !ok(self.eps) {
            return Err(Error::invalid("learning rates and eps must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Adam moments for every point coordinate and color channel.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub config: AdamConfig,
    pub step: u64,
    m_points: Vec<Vec<Point>>,
    v_points: Vec<Vec<Point>>,
    m_colors: Vec<[f64; 4]>,
    v_colors: Vec<[f64; 4]>,
}

impl OptimState {
    pub fn new(scene: &Scene, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<Point>> = scene
            .shapes
            .iter()
            .map(|s| vec![Point::ZERO; s.points().len()])
            .collect();
        OptimState {
            config,
            step: 0,
            m_points: zeros.clone(),
            v_points: zeros,
            m_colors: vec![[0.0; 4]; scene.shapes.len()],
            v_colors: vec![[0.0; 4]; scene.shapes.len()],
        }
    }

    pub fn is_congruent(&self, scene: &Scene) -> bool {
        self.m_points.len() == scene.shapes.len()
            && self
                .m_points
                .iter()
                .zip(&scene.shapes)
                .all(|(m, s)| m.len() == s.points().len())
    }
}

/// Loss value split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub reconstruction: f64,
    /// Unweighted geometric loss.
    pub geometric: f64,
}

/// Reconstruction loss of `render` plus its pixel gradient.
fn reconstruction(
    render: &RasterImage,
    target: &RasterImage,
    cfg: &LossConfig,
) -> Result<(f64, crate::raster::PixelGradient)> {
    let alpha = cfg.alpha_blend;
    if alpha == 1.0 || cfg.recon_kind == PixelLoss::Mse {
        return cfg.recon_kind.value_and_grad(render, target);
    }
    let (main, mut g) = cfg.recon_kind.value_and_grad(render, target)?;
    let (aux, ga) = PixelLoss::Mse.value_and_grad(render, target)?;
    for (a, b) in g.data.iter_mut().zip(&ga.data) {
        *a = alpha * *a + (1.0 - alpha) * b;
    }
    Ok((alpha * main + (1.0 - alpha) * aux, g))
}

/// Total loss and its gradient w.r.t. every shape parameter.
pub fn loss_and_grad(scene: &Scene, target: &RasterImage, cfg: &LossConfig) -> Result<(f64, GradientSet)> {
    let (parts, grads) = loss_parts_and_grad(scene, target, cfg)?;
    Ok((parts.total, grads))
}

pub fn loss_parts_and_grad(
    scene: &Scene,
    target: &RasterImage,
    cfg: &LossConfig,
) -> Result<(LossParts, GradientSet)> {
    if (scene.width, scene.height) != target.dims() {
        return Err(Error::DimensionMismatch {
            expected: (scene.width, scene.height),
            found: target.dims(),
        });
    }
    let raster = SceneRaster::new(scene, true)?;
    let render = raster.composite(None);
    let (recon, pixel_grad) = reconstruction(&render, target, cfg)?;
    let mut grads = raster.backward(scene, &pixel_grad)?;
    let mut geometric = 0.0;
    if cfg.lambda_geometric > 0.0 {
        let (g, geo_grads) = geometry::geometric_loss_grad(scene, cfg.lambda_p);
        geometric = g;
        grads.add_points(&geo_grads, cfg.lambda_geometric);
    }
    let parts = LossParts {
        total: recon + cfg.lambda_geometric * geometric,
        reconstruction: recon,
        geometric,
    };
    Ok((parts, grads))
}

/// Scalar loss only; same value as [`loss_and_grad`].
pub fn loss_value(scene: &Scene, target: &RasterImage, cfg: &LossConfig) -> Result<f64> {
    let render = crate::raster::render(scene)?;
    let (recon, _) = reconstruction(&render, target, cfg)?;
    let geometric = if cfg.lambda_geometric > 0.0 {
        cfg.lambda_geometric * geometry::geometric_loss(scene, cfg.lambda_p)
    } else {
        0.0
    };
    Ok(recon + geometric)
}

#[inline]
fn adam_update(param: &mut f64, grad: f64, m: &mut f64, v: &mut f64, lr: f64, c: &AdamConfig, bc1: f64, bc2: f64) {
    *m = c.beta1 * *m + (1.0 - c.beta1) * grad;
    *v = c.beta2 * *v + (1.0 - c.beta2) * grad * grad;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *param -= lr * m_hat / (math::sqrt(v_hat) + c.eps);
}

/// One Adam update in place: `lr_points` for coordinates, `lr_colors` for
/// RGBA, colors clamped to `[0, 1]` afterwards.
pub fn adam_step(scene: &mut Scene, grads: &GradientSet, state: &mut OptimState) -> Result<()> {
    if !state.is_congruent(scene) || !grads.matches(scene) {
        return Err(Error::IncongruentState);
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(c.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(c.beta2, t as f64);

    for (si, shape) in scene.shapes.iter_mut().enumerate() {
        let (mp, vp) = (&mut state.m_points[si], &mut state.v_points[si]);
        for (pi, p) in shape.points_mut().iter_mut().enumerate() {
            let g = grads.points[si][pi];
            adam_update(&mut p.x, g.x, &mut mp[pi].x, &mut vp[pi].x, c.lr_points, &c, bc1, bc2);
            adam_update(&mut p.y, g.y, &mut mp[pi].y, &mut vp[pi].y, c.lr_points, &c, bc1, bc2);
        }
        let mut color = shape.color().to_array();
        for ch in 0..4 {
            adam_update(
                &mut color[ch],
                grads.colors[si][ch],
                &mut state.m_colors[si][ch],
                &mut state.v_colors[si][ch],
                c.lr_colors,
                &c,
                bc1,
                bc2,
            );
            color[ch] = clamp01(color[ch]);
        }
        shape.set_color(Rgba::from_array(color));
    }
    Ok(())
}

fn scene_is_finite(scene: &Scene) -> bool {
    scene.shapes.iter().all(|s| {
        s.points().iter().all(|p| p.is_finite()) && s.color().to_array().iter().all(|c| c.is_finite())
    })
}

/// Result of one optimize phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub scene: Scene,
    /// Loss measured before each executed step.
    pub trace: Vec<f64>,
}

impl Optimized {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Runs Adam for up to `min(iters_budget, stop.max_iters)` steps, stopping
/// early per `stop`. A NaN/Inf anywhere aborts with [`Error::NonFinite`]
/// (phase 0; callers running several phases relabel it).
pub fn optimize(
    scene: Scene,
    target: &RasterImage,
    cfg: &LossConfig,
    stop: &StopRule,
    adam: &AdamConfig,
    iters_budget: usize,
) -> Result<Optimized> {
    optimize_with(scene, target, cfg, stop, adam, iters_budget, |_, _| {})
}

/// [`optimize`] with a callback after every step, given the iteration
/// number (1-based) and the updated scene.
pub fn optimize_with(
    mut scene: Scene,
    target: &RasterImage,
    cfg: &LossConfig,
    stop: &StopRule,
    adam: &AdamConfig,
    iters_budget: usize,
    mut on_step: impl FnMut(usize, &Scene),
) -> Result<Optimized> {
    if iters_budget < 1 {
        return Err(Error::invalid("iteration budget must be at least 1"));
    }
    cfg.validate()?;
    stop.validate()?;
    adam.validate()?;
    let rule = StopRule {
        max_iters: stop.max_iters.min(iters_budget),
        min_iters: stop.min_iters.min(iters_budget),
        ..*stop
    };
    let mut state = OptimState::new(&scene, *adam);
    let mut trace = Vec::new();
    loop {
        let (loss, grads) = loss_and_grad(&scene, target, cfg)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite {
                phase: 0,
                scene: Box::new(scene),
            });
        }
        let prev = trace.last().copied();
        trace.push(loss);
        adam_step(&mut scene, &grads, &mut state)?;
        if !scene_is_finite(&scene) {
            return Err(Error::NonFinite {
                phase: 0,
                scene: Box::new(scene),
            });
        }
        on_step(trace.len(), &scene);
        if rule.should_stop(trace.len(), prev, loss) {
            break;
        }
    }
    Ok(Optimized { scene, trace })
}
