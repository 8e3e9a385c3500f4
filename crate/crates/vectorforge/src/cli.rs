//! Argument parsing, the `key=value` config file and the three subcommands.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use vectorforge_core::pipeline::{self, PhaseKind};
use vectorforge_core::raster::{self, PixelLoss};
use vectorforge_core::{Error, PipelineConfig, RasterImage, ReduceMode, Scene, Schedule};

use crate::error::{CliError, CliResult};
use crate::io;
use crate::metrics::{self, BenchRecord, MetricsRecord};
use crate::plot;
use crate::svg::write_svg;

pub const THREADS_ENV: &str = "VECTORFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "vectorforge", version, about = "Raster to vector by optimize & reduce")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vectorize one image into an SVG.
    Vectorize(VectorizeArgs),
    /// Vectorize every image in a directory at several shape counts.
    Benchmark(BenchmarkArgs),
    /// Morph the vectorization of one image toward another.
    Interpolate(InterpolateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    L1,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReduceArg {
    Det,
    Stoch,
}

/// `k@phase`: after schedule phase `phase` (0-based), add `k` shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddStep {
    pub count: usize,
    pub after_phase: usize,
}

fn parse_add(s: &str) -> Result<AddStep, String> {
    let (k, p) = s.split_once('@').ok_or("expected k@phase, e.g. 32@3")?;
    let count: usize = k.trim().parse().map_err(|_| format!("bad shape count `{k}`"))?;
    let after_phase = p.trim().parse().map_err(|_| format!("bad phase index `{p}`"))?;
    if count == 0 {
        return Err("added shape count must be at least 1".into());
    }
    Ok(AddStep { count, after_phase })
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("canvas must be at least 1x1".into());
    }
    Ok((w, h))
}

/// Options shared by every subcommand that runs the pipeline.
#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Reconstruction loss.
    #[arg(long, value_enum, default_value = "mse")]
    pub loss: LossArg,
    /// Blend between the reconstruction loss and an auxiliary MSE term.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "lambda-geom", default_value_t = 0.01)]
    pub lambda_geom: f64,
    #[arg(long = "lambda-p", default_value_t = 10.0)]
    pub lambda_p: f64,
    #[arg(long, value_enum, default_value = "det")]
    pub reduce: ReduceArg,
    /// Softmax temperature for `--reduce stoch`.
    #[arg(long, default_value_t = 0.01)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Canvas the input is resized to.
    #[arg(long, value_parser = parse_size, default_value = "240x240")]
    pub size: (usize, usize),
    #[arg(long, default_value_t = 4)]
    pub segments: usize,
    /// Total optimization iterations, split across schedule phases.
    #[arg(long, default_value_t = pipeline::DEFAULT_TOTAL_ITERS)]
    pub iters: usize,
    #[arg(long = "min-iters", default_value_t = 50)]
    pub min_iters: usize,
    #[arg(long = "max-iters", default_value_t = 500)]
    pub max_iters: usize,
    /// Relative loss improvement below which a phase stops early.
    #[arg(long = "rel-floor", default_value_t = 1e-4)]
    pub rel_floor: f64,
    #[arg(long = "lr-points", default_value_t = 1.0)]
    pub lr_points: f64,
    #[arg(long = "lr-colors", default_value_t = 0.01)]
    pub lr_colors: f64,
    /// Optional `key=value` file; keys are flag names without `--`.
    /// Flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VectorizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Final shape count. Defaults the schedule to 4n, 2n, n.
    #[arg(long)]
    pub shapes: Option<usize>,
    /// Explicit shape counts, e.g. 256,128,64,32.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<usize>>,
    /// Add step `k@phase`; may be repeated.
    #[arg(long, value_parser = parse_add)]
    pub add: Vec<AddStep>,
    /// Per-phase metrics CSV. Defaults to `<output>.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub targets: Vec<usize>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub plot: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub from: PathBuf,
    #[arg(long)]
    pub to: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub frames: usize,
    #[arg(long)]
    pub outdir: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub shapes: usize,
    /// Also write the rendered frames side by side to this PNG.
    #[arg(long)]
    pub strip: Option<PathBuf>,
    /// Optimization steps spent morphing toward `--to`.
    #[arg(long = "morph-iters", default_value_t = 150)]
    pub morph_iters: usize,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

/// Everything `vectorize` needs, validated.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub metrics: PathBuf,
    pub canvas: (usize, usize),
    pub pipeline: PipelineConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn core_usage(e: Error) -> CliError {
    usage(e.to_string())
}

/// Inserts add steps into a list of shape counts.
pub fn apply_adds(counts: &[usize], adds: &[AddStep]) -> CliResult<Vec<usize>> {
    let mut order: Vec<AddStep> = adds.to_vec();
    order.sort_by_key(|a| std::cmp::Reverse(a.after_phase));
    let mut out = counts.to_vec();
    for add in order {
        if add.after_phase >= counts.len() {
            return Err(usage(format!(
                "--add {}@{}: schedule has only {} phases",
                add.count,
                add.after_phase,
                counts.len()
            )));
        }
        out.insert(add.after_phase + 1, counts[add.after_phase] + add.count);
    }
    Ok(out)
}

impl PipelineArgs {
    /// Pipeline settings for a given schedule.
    pub fn to_pipeline(&self, schedule: Schedule) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::for_target(schedule.final_count()).map_err(core_usage)?;
        cfg.schedule = schedule;
        cfg.loss.recon_kind = match self.loss {
            LossArg::L1 => PixelLoss::L1,
            LossArg::Mse => PixelLoss::Mse,
        };
        cfg.loss.alpha_blend = self.alpha;
        cfg.loss.lambda_geometric = self.lambda_geom;
        cfg.loss.lambda_p = self.lambda_p;
        cfg.reduce_mode = match self.reduce {
            ReduceArg::Det => ReduceMode::Deterministic,
            ReduceArg::Stoch => ReduceMode::Stochastic {
                temperature: self.temperature,
            },
        };
        cfg.seed = self.seed;
        cfg.init.segments_per_shape = self.segments;
        cfg.stop.min_iters = self.min_iters;
        cfg.stop.max_iters = self.max_iters;
        cfg.stop.rel_improve_floor = self.rel_floor;
        cfg.adam.lr_points = self.lr_points;
        cfg.adam.lr_colors = self.lr_colors;
        cfg.validate().map_err(core_usage)?;
        Ok(cfg)
    }

    pub fn schedule_for(&self, counts: &[usize]) -> CliResult<Schedule> {
        if self.iters < counts.len() {
            return Err(usage(format!("--iters {} is fewer than the {} phases", self.iters, counts.len())));
        }
        Schedule::from_counts(counts, self.iters).map_err(core_usage)
    }
}

impl RunConfig {
    pub fn from_args(args: &VectorizeArgs) -> CliResult<Self> {
        if args.input.as_os_str().is_empty() || args.output.as_os_str().is_empty() {
            return Err(usage("input and output paths must be non-empty"));
        }
        let base = match (&args.schedule, args.shapes) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) if n >= 1 => vec![4 * n, 2 * n, n],
            (None, Some(_)) => return Err(usage("--shapes must be at least 1")),
            (None, None) => return Err(usage("one of --shapes or --schedule is required")),
        };
        let counts = apply_adds(&base, &args.add)?;
        if let Some(n) = args.shapes {
            if counts.last() != Some(&n) {
                return Err(usage(format!(
                    "schedule ends at {} shapes but --shapes is {n}",
                    counts.last().copied().unwrap_or(0)
                )));
            }
        }
        let schedule = args.pipeline.schedule_for(&counts)?;
        let pipeline = args.pipeline.to_pipeline(schedule)?;
        let metrics = args
            .metrics
            .clone()
            .unwrap_or_else(|| with_suffix(&args.output, ".metrics.csv"));
        Ok(RunConfig {
            input: args.input.clone(),
            output: args.output.clone(),
            metrics,
            canvas: args.pipeline.size,
            pipeline,
        })
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Reads a flat `key=value` file into `--key value` arguments.
pub fn config_file_args(path: &Path) -> CliResult<Vec<OsString>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let key = k.trim();
        if key.is_empty() || key == "config" {
            return Err(usage(format!("{}:{}: bad key `{key}`", path.display(), n + 1)));
        }
        out.push(format!("--{key}").into());
        out.push(v.trim().into());
    }
    Ok(out)
}

/// Splices config file entries in front of the command line flags so that
/// flags override the file.
pub fn expand_config(argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let mut config = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        }
    }
    let Some(path) = config else { return Ok(argv) };
    if argv.len() < 2 {
        return Ok(argv);
    }
    let mut out = argv[..2].to_vec();
    out.extend(config_file_args(&path)?);
    out.extend(argv[2..].iter().cloned());
    Ok(out)
}

pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A second call in the same process (tests) keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Writes the offending scene next to `near` and converts the error.
fn numeric_failure(err: Error, near: &Path) -> CliError {
    match err {
        Error::NonFinite { phase, scene } => {
            let dump = with_suffix(near, &format!(".nan-phase{phase}.svg"));
            let dump = write_svg(&scene, &dump).ok().map(|_| dump);
            CliError::Numeric { phase, dump }
        }
        other => CliError::Core(other),
    }
}

fn kind_name(kind: PhaseKind) -> &'static str {
    match kind {
        PhaseKind::Init => "init",
        PhaseKind::Reduce => "reduce",
        PhaseKind::Add => "add",
        PhaseKind::Continue => "continue",
    }
}

pub fn cmd_vectorize(args: &VectorizeArgs) -> CliResult<()> {
    let cfg = RunConfig::from_args(args)?;
    let target = io::load_raster(&cfg.input, Some(cfg.canvas))?;
    let start = Instant::now();
    let mut last = start;
    let mut records = Vec::new();
    let report = pipeline::run_oandr_with(&target, &cfg.pipeline, |m, _| {
        let now = Instant::now();
        records.push(MetricsRecord::from_phase(m, kind_name(m.kind), (now - last).as_secs_f64()));
        last = now;
    })
    .map_err(|e| numeric_failure(e, &cfg.output))?;

    write_svg(&report.scene, &cfg.output)?;
    metrics::write_phase_csv(&records, &cfg.metrics)?;
    let summary = summary(&cfg, &records, start.elapsed().as_secs_f64());
    io::write_atomic(&with_suffix(&cfg.output, ".summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn summary(cfg: &RunConfig, records: &[MetricsRecord], seconds: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "input    {}", cfg.input.display());
    let _ = writeln!(s, "output   {}", cfg.output.display());
    let _ = writeln!(s, "canvas   {}x{}", cfg.canvas.0, cfg.canvas.1);
    let counts: Vec<String> = cfg.pipeline.schedule.phases.iter().map(|p| p.shapes.to_string()).collect();
    let _ = writeln!(s, "schedule {}", counts.join(" -> "));
    let _ = writeln!(s, "phase  kind      shapes  iters        mse   mse(gray^2)          l1   geometric");
    for r in records {
        let _ = writeln!(
            s,
            "{:>5}  {:<8}  {:>6}  {:>5}  {:>9.3e}  {:>12.3}  {:>10.3e}  {:>10.3e}",
            r.phase, r.kind, r.shapes, r.iterations, r.mse, r.mse_gray, r.l1, r.geometric
        );
    }
    let iters: usize = records.iter().map(|r| r.iterations).sum();
    let _ = writeln!(s, "total    {iters} iterations in {seconds:.2} s");
    s
}

fn image_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no PNG or JPEG images in {}", dir.display())));
    }
    Ok(files)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    if args.targets.is_empty() || args.targets.contains(&0) {
        return Err(usage("--targets must be positive shape counts"));
    }
    let files = image_files(&args.dir)?;
    let images: Vec<RasterImage> = files
        .iter()
        .map(|f| io::load_raster(f, Some(args.pipeline.size)))
        .collect::<CliResult<_>>()?;
    let mut configs = Vec::new();
    for &t in &args.targets {
        let schedule = args.pipeline.schedule_for(&[4 * t, 2 * t, t])?;
        configs.push(args.pipeline.to_pipeline(schedule)?);
    }
    let jobs: Vec<(usize, usize)> = (0..files.len())
        .flat_map(|i| (0..args.targets.len()).map(move |t| (i, t)))
        .collect();
    let records: Vec<BenchRecord> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let start = Instant::now();
            let report = pipeline::run_oandr(&images[i], &configs[t]).map_err(|e| numeric_failure(e, &args.csv))?;
            let last = report.phases.last().expect("schedule is non-empty");
            Ok(BenchRecord {
                image: files[i].file_name().unwrap_or_default().to_string_lossy().into_owned(),
                target: args.targets[t],
                shapes: report.scene.len(),
                mse: last.mse,
                mse_gray: last.mse * metrics::GRAY_SCALE,
                l1: last.l1,
                geometric: last.geometric,
                iterations: report.total_iterations(),
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<CliResult<_>>()?;
    metrics::write_bench_csv(&records, &args.csv)?;
    io::write_atomic(&args.plot, plot::mse_chart(&records).as_bytes())?;
    for r in &records {
        println!(
            "{:<24} {:>4} shapes  mse {:.4e}  ({:.1} gray^2)  {:.2} s",
            r.image, r.target, r.mse, r.mse_gray, r.seconds
        );
    }
    Ok(())
}

pub fn cmd_interpolate(args: &InterpolateArgs) -> CliResult<()> {
    if args.frames < 2 {
        return Err(usage("--frames must be at least 2"));
    }
    if args.shapes < 1 {
        return Err(usage("--shapes must be at least 1"));
    }
    let schedule = args.pipeline.schedule_for(&[4 * args.shapes, 2 * args.shapes, args.shapes])?;
    let mut cfg = args.pipeline.to_pipeline(schedule)?;
    cfg.interpolation_iters = args.morph_iters.max(1);
    let source = io::load_raster(&args.from, Some(args.pipeline.size))?;
    let target = io::load_raster(&args.to, Some(args.pipeline.size))?;
    std::fs::create_dir_all(&args.outdir).map_err(|e| CliError::io(&args.outdir, e))?;
    let frames: Vec<Scene> = pipeline::interpolate(&source, &target, &cfg, args.frames)
        .map_err(|e| numeric_failure(e, &args.outdir.join("interpolate")))?;
    for (k, frame) in frames.iter().enumerate() {
        write_svg(frame, &args.outdir.join(format!("frame_{k:03}.svg")))?;
    }
    if let Some(path) = &args.strip {
        let renders: Vec<RasterImage> = frames.iter().map(raster::render).collect::<Result<_, _>>()?;
        io::save_png(&io::strip(&renders), path)?;
    }
    println!("wrote {} frames to {}", frames.len(), args.outdir.display());
    Ok(())
}

/// Parses `argv` and runs the chosen command; returns the exit status.
pub fn run(argv: Vec<OsString>) -> i32 {
    match run_inner(argv) {
        Ok(()) => 0,
        Err(Ok(clap_err)) => {
            let _ = clap_err.print();
            if clap_err.use_stderr() {
                1
            } else {
                0
            }
        }
        Err(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(argv: Vec<OsString>) -> Result<(), Result<clap::Error, CliError>> {
    let argv = expand_config(argv).map_err(Err)?;
    let cli = Cli::try_parse_from(argv).map_err(Ok)?;
    init_threads().map_err(Err)?;
    match &cli.command {
        Command::Vectorize(a) => cmd_vectorize(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Interpolate(a) => cmd_interpolate(a),
    }
    .map_err(Err)
}
