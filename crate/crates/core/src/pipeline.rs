//! Optimize & reduce orchestration.
//!
//! A run starts from a clustered initialization at the first schedule count
//! and optimizes every shape at once. Each later count either prunes the
//! lowest-ranked shapes (count goes down) or seeds new shapes at error peaks
//! (count goes up), followed by another optimize phase. The number of
//! optimize phases equals the schedule length, independent of the final
//! shape count.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clusterinit::{circle_seed, init_scene, InitConfig};
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Rgba, Scene};
use crate::math;
use crate::optimizer::{self, AdamConfig, LossConfig, StopRule};
use crate::raster::{render, PixelLoss, RasterImage, SceneRaster};

/// Iterations per phase when a schedule has four phases.
pub const FOUR_PHASE_SPLIT: [usize; 4] = [150, 100, 100, 150];

/// Iteration budget of a whole run.
pub const DEFAULT_TOTAL_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub shapes: usize,
    pub iters: usize,
}

/// Shape counts and iteration budgets, one entry per optimize phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub phases: Vec<Phase>,
}

impl Schedule {
    /// Budgets for `counts` sharing `total_iters`: the fixed four-phase split
    /// when it applies (scaled to the total), otherwise an even split with
    /// the remainder going to the last phase.
    pub fn from_counts(counts: &[usize], total_iters: usize) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("schedule needs at least one shape count"));
        }
        let n = counts.len();
        let iters: Vec<usize> = if n == 4 && total_iters == DEFAULT_TOTAL_ITERS {
            FOUR_PHASE_SPLIT.to_vec()
        } else {
            let each = total_iters / n;
            let mut v = vec![each; n];
            v[n - 1] += total_iters - each * n;
            v
        };
        let s = Schedule {
            phases: counts
                .iter()
                .zip(iters)
                .map(|(&shapes, iters)| Phase { shapes, iters })
                .collect(),
        };
        s.validate()?;
        Ok(s)
    }

    /// `[4n, 2n, n]` over the default 500 iterations.
    pub fn halving(target: usize) -> Result<Self> {
        Schedule::from_counts(&[4 * target, 2 * target, target], DEFAULT_TOTAL_ITERS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::invalid("schedule needs at least one phase"));
        }
        if self.phases.iter().any(|p| p.shapes < 1 || p.iters < 1) {
            return Err(Error::invalid("schedule counts and budgets must be >= 1"));
        }
        Ok(())
    }

    pub fn final_count(&self) -> usize {
        self.phases.last().map_or(0, |p| p.shapes)
    }

    pub fn total_iters(&self) -> usize {
        self.phases.iter().map(|p| p.iters).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReduceMode {
    Deterministic,
    /// Softmax sampling of survivors at the given temperature.
    Stochastic { temperature: f64 },
}

/// Add-operation knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddConfig {
    /// Side of the square suppressed around each chosen error peak.
    pub window: usize,
    pub radius: f64,
}

impl Default for AddConfig {
    fn default() -> Self {
        AddConfig {
            window: 15,
            radius: 8.0,
        }
    }
}

/// Everything a run needs besides the target image.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub schedule: Schedule,
    pub loss: LossConfig,
    pub stop: StopRule,
    pub adam: AdamConfig,
    pub reduce_loss: PixelLoss,
    pub reduce_mode: ReduceMode,
    pub init: InitConfig,
    pub add: AddConfig,
    /// Iterations spent morphing toward the second image in [`interpolate`].
    pub interpolation_iters: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn for_target(target: usize) -> Result<Self> {
        Ok(PipelineConfig {
            schedule: Schedule::halving(target)?,
            loss: LossConfig::default(),
            stop: StopRule::default(),
            adam: AdamConfig::default(),
            reduce_loss: PixelLoss::L1,
            reduce_mode: ReduceMode::Deterministic,
            init: InitConfig::default(),
            add: AddConfig::default(),
            interpolation_iters: 150,
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.loss.validate()?;
        self.stop.validate()?;
        self.adam.validate()?;
        if let ReduceMode::Stochastic { temperature } = self.reduce_mode {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(Error::invalid("temperature must be positive"));
            }
        }
        if self.init.segments_per_shape < 2 {
            return Err(Error::invalid("segments_per_shape must be at least 2"));
        }
        if self.add.window < 1 || !(self.add.radius > 0.0) {
            return Err(Error::invalid("add window and radius must be positive"));
        }
        Ok(())
    }
}

/// How a phase's shape set was produced before optimizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    Init,
    Reduce,
    Add,
    /// Count unchanged from the previous phase.
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMetrics {
    pub phase: usize,
    pub kind: PhaseKind,
    pub shapes: usize,
    /// MSE on the `[0, 1]` scale.
    pub mse: f64,
    pub l1: f64,
    /// Unweighted geometric loss of the phase's final scene.
    pub geometric: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scene: Scene,
    pub phases: Vec<PhaseMetrics>,
}

impl RunReport {
    /// Number of optimize phases executed.
    pub fn optimize_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.phases.iter().map(|p| p.iterations).sum()
    }
}

/// Importance of each shape: the reduce loss of the image rendered without
/// it. Higher means more important.
#[derive(Debug, Clone, PartialEq)]
pub struct RankScores(pub Vec<f64>);

impl RankScores {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn rank_shapes(scene: &Scene, target: &RasterImage, reduce_loss: PixelLoss) -> Result<RankScores> {
    if scene.is_empty() {
        return Err(Error::invalid("cannot rank an empty scene"));
    }
    let raster = SceneRaster::new(scene, false)?;
    Ok(RankScores(raster.removal_losses(target, reduce_loss)?))
}

fn check_keep(scene: &Scene, scores: &RankScores, keep: usize) -> Result<()> {
    if scores.len() != scene.len() {
        return Err(Error::invalid("one rank score per shape is required"));
    }
    if keep < 1 || keep > scene.len() {
        return Err(Error::invalid(alloc::format!(
            "keep must lie in [1, {}], got {keep}",
            scene.len()
        )));
    }
    Ok(())
}

fn keep_indices(scene: &Scene, mut indices: Vec<usize>) -> Scene {
    indices.sort_unstable();
    Scene {
        shapes: indices.into_iter().map(|i| scene.shapes[i].clone()).collect(),
        width: scene.width,
        height: scene.height,
        background: scene.background,
    }
}

/// Keeps the `keep` highest-scoring shapes in their original z-order.
/// Ties go to the lower index.
pub fn reduce_deterministic(scene: &Scene, scores: &RankScores, keep: usize) -> Result<Scene> {
    check_keep(scene, scores, keep)?;
    let mut order: Vec<usize> = (0..scene.len()).collect();
    order.sort_by(|&a, &b| scores.0[b].total_cmp(&scores.0[a]).then(a.cmp(&b)));
    order.truncate(keep);
    Ok(keep_indices(scene, order))
}

/// `softmax(scores / temperature)`, shifted by the max for stability.
pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|&s| math::exp((s - max) / temperature)).collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Draws `keep` distinct indices without replacement: one softmax draw at a
/// time over the indices still available.
pub fn sample_without_replacement<R: Rng>(scores: &[f64], keep: usize, temperature: f64, rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut chosen = Vec::with_capacity(keep);
    for _ in 0..keep.min(scores.len()) {
        let sub: Vec<f64> = remaining.iter().map(|&i| scores[i]).collect();
        let probs = softmax(&sub, temperature);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = remaining.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        // never land on a zero-probability tail entry through rounding
        if probs[pick] == 0.0 {
            pick = probs
                .iter()
                .enumerate()
                .rev()
                .find(|(_, p)| **p > 0.0)
                .map_or(pick, |(k, _)| k);
        }
        chosen.push(remaining.remove(pick));
    }
    chosen
}

pub fn reduce_stochastic(
    scene: &Scene,
    scores: &RankScores,
    keep: usize,
    temperature: f64,
    seed: u64,
) -> Result<Scene> {
    check_keep(scene, scores, keep)?;
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid("temperature must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample_without_replacement(&scores.0, keep, temperature, &mut rng);
    Ok(keep_indices(scene, picked))
}

/// Per-pixel squared error summed over channels.
fn error_map(render: &RasterImage, target: &RasterImage) -> Vec<f64> {
    render
        .pixels()
        .zip(target.pixels())
        .map(|(a, b)| (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum())
        .collect()
}

/// Greedy error peaks: each pick suppresses a `window` x `window` square
/// around itself. When everything is suppressed the mask is reset.
pub fn error_peaks(errors: &[f64], width: usize, height: usize, count: usize, window: usize) -> Vec<(usize, usize)> {
    let mut suppressed = vec![false; errors.len()];
    let half = window / 2;
    let mut peaks = Vec::with_capacity(count);
    for _ in 0..count {
        if suppressed.iter().all(|&s| s) {
            suppressed.iter_mut().for_each(|s| *s = false);
        }
        let mut best: Option<usize> = None;
        for i in 0..errors.len() {
            if suppressed[i] {
                continue;
            }
            if best.map_or(true, |b| errors[i] > errors[b]) {
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        let (x, y) = (i % width, i / width);
        peaks.push((x, y));
        for yy in y.saturating_sub(half)..(y + half + 1).min(height) {
            for xx in x.saturating_sub(half)..(x + half + 1).min(width) {
                suppressed[yy * width + xx] = true;
            }
        }
    }
    peaks
}

/// Appends `n_add` circle seeds on top of the scene at the highest
/// reconstruction-error peaks, colored with the target at each peak.
pub fn add_shapes(
    scene: &Scene,
    target: &RasterImage,
    n_add: usize,
    cfg: &AddConfig,
    segments: usize,
) -> Result<Scene> {
    if n_add < 1 {
        return Err(Error::invalid("n_add must be at least 1"));
    }
    let current = render(scene)?;
    if current.dims() != target.dims() {
        return Err(Error::DimensionMismatch {
            expected: current.dims(),
            found: target.dims(),
        });
    }
    let errors = error_map(&current, target);
    let mut out = scene.clone();
    for (x, y) in error_peaks(&errors, scene.width, scene.height, n_add, cfg.window) {
        let center = Point::new(x as f64 + 0.5, y as f64 + 0.5);
        out.shapes.push(circle_seed(
            center,
            cfg.radius,
            segments,
            Rgba::opaque(target.pixel(x, y)),
        )?);
    }
    Ok(out)
}

fn phase_metrics(phase: usize, kind: PhaseKind, scene: &Scene, target: &RasterImage, lambda_p: f64, iterations: usize) -> Result<PhaseMetrics> {
    let img = render(scene)?;
    Ok(PhaseMetrics {
        phase,
        kind,
        shapes: scene.len(),
        mse: img.mse(target)?,
        l1: img.l1(target)?,
        geometric: geometry::geometric_loss(scene, lambda_p),
        iterations,
    })
}

fn relabel(err: Error, phase: usize) -> Error {
    match err {
        Error::NonFinite { scene, .. } => Error::NonFinite { phase, scene },
        other => other,
    }
}

/// Runs the whole schedule. See [`run_oandr_with`].
pub fn run_oandr(target: &RasterImage, cfg: &PipelineConfig) -> Result<RunReport> {
    run_oandr_with(target, cfg, |_, _| {})
}

/// Runs the whole schedule, calling `on_phase` after each optimize phase.
pub fn run_oandr_with(
    target: &RasterImage,
    cfg: &PipelineConfig,
    mut on_phase: impl FnMut(&PhaseMetrics, &Scene),
) -> Result<RunReport> {
    cfg.validate()?;
    let mut init_cfg = cfg.init.clone();
    init_cfg.seed = cfg.seed;
    let mut scene = Scene::new(1, 1, cfg.init.background)?;
    let mut phases = Vec::with_capacity(cfg.schedule.phases.len());

    for (index, phase) in cfg.schedule.phases.iter().enumerate() {
        let kind = if index == 0 {
            scene = init_scene(target, phase.shapes, &init_cfg)?;
            PhaseKind::Init
        } else if phase.shapes < scene.len() {
            let scores = rank_shapes(&scene, target, cfg.reduce_loss)?;
            scene = match cfg.reduce_mode {
                ReduceMode::Deterministic => reduce_deterministic(&scene, &scores, phase.shapes)?,
                ReduceMode::Stochastic { temperature } => reduce_stochastic(
                    &scene,
                    &scores,
                    phase.shapes,
                    temperature,
                    cfg.seed.wrapping_add(index as u64),
                )?,
            };
            PhaseKind::Reduce
        } else if phase.shapes > scene.len() {
            scene = add_shapes(
                &scene,
                target,
                phase.shapes - scene.len(),
                &cfg.add,
                cfg.init.segments_per_shape,
            )?;
            PhaseKind::Add
        } else {
            PhaseKind::Continue
        };

        let out = optimizer::optimize(scene, target, &cfg.loss, &cfg.stop, &cfg.adam, phase.iters)
            .map_err(|e| relabel(e, index))?;
        scene = out.scene;
        let metrics = phase_metrics(index, kind, &scene, target, cfg.loss.lambda_p, out.trace.len())?;
        on_phase(&metrics, &scene);
        phases.push(metrics);
    }
    Ok(RunReport { scene, phases })
}

/// Frame sequence morphing the vectorization of `source` toward `target`.
///
/// `source` is vectorized with [`run_oandr`]; that scene is then optimized
/// against `target` for `cfg.interpolation_iters` steps with no early stop,
/// and snapshots are taken at `n_frames` evenly spaced iterations. The first
/// frame is the source vectorization, the last the final state.
pub fn interpolate(source: &RasterImage, target: &RasterImage, cfg: &PipelineConfig, n_frames: usize) -> Result<Vec<Scene>> {
    if source.dims() != target.dims() {
        return Err(Error::DimensionMismatch {
            expected: source.dims(),
            found: target.dims(),
        });
    }
    if n_frames < 2 {
        return Err(Error::invalid("need at least 2 frames"));
    }
    let start = run_oandr(source, cfg)?.scene;
    morph(start, target, cfg, n_frames)
}

/// Snapshots of `start` being optimized toward `target`. See [`interpolate`].
pub fn morph(start: Scene, target: &RasterImage, cfg: &PipelineConfig, n_frames: usize) -> Result<Vec<Scene>> {
    if n_frames < 2 {
        return Err(Error::invalid("need at least 2 frames"));
    }
    let iters = cfg.interpolation_iters.max(1);
    let at: Vec<usize> = (0..n_frames)
        .map(|k| math::round(k as f64 * iters as f64 / (n_frames - 1) as f64) as usize)
        .collect();
    let stop = StopRule {
        min_iters: iters,
        max_iters: iters,
        rel_improve_floor: 0.0,
    };
    let mut frames = Vec::with_capacity(n_frames);
    frames.extend(at.iter().take_while(|&&i| i == 0).map(|_| start.clone()));
    let phase = cfg.schedule.phases.len();
    optimizer::optimize_with(start, target, &cfg.loss, &stop, &cfg.adam, iters, |iter, scene| {
        for _ in at.iter().filter(|&&i| i == iter) {
            frames.push(scene.clone());
        }
    })
    .map_err(|e| relabel(e, phase))?;
    Ok(frames)
}
