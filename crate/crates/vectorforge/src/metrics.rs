//! CSV output.
//!
//! Per-phase file (`vectorize`):
//! `phase,kind,shapes,mse,mse_gray,l1,geometric,iterations,seconds`
//!
//! Benchmark file:
//! `image,target,shapes,mse,mse_gray,l1,geometric,iterations,seconds`
//!
//! `mse` is over channels in [0, 1]; `mse_gray` is the same value in 0..255
//! gray levels, i.e. `mse * 255^2`. `seconds` is wall-clock time.

use std::path::Path;

use vectorforge_core::PhaseMetrics;

use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

pub const GRAY_SCALE: f64 = 255.0 * 255.0;

pub const PHASE_HEADER: [&str; 9] = [
    "phase", "kind", "shapes", "mse", "mse_gray", "l1", "geometric", "iterations", "seconds",
];
pub const BENCH_HEADER: [&str; 9] = [
    "image", "target", "shapes", "mse", "mse_gray", "l1", "geometric", "iterations", "seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub phase: usize,
    pub kind: &'static str,
    pub shapes: usize,
    pub mse: f64,
    pub mse_gray: f64,
    pub l1: f64,
    pub geometric: f64,
    pub iterations: usize,
    pub seconds: f64,
}

impl MetricsRecord {
    pub fn from_phase(m: &PhaseMetrics, kind: &'static str, seconds: f64) -> Self {
        MetricsRecord {
            phase: m.phase,
            kind,
            shapes: m.shapes,
            mse: m.mse,
            mse_gray: m.mse * GRAY_SCALE,
            l1: m.l1,
            geometric: m.geometric,
            iterations: m.iterations,
            seconds,
        }
    }
}

/// Final metrics of one image at one shape target.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub image: String,
    pub target: usize,
    pub shapes: usize,
    pub mse: f64,
    pub mse_gray: f64,
    pub l1: f64,
    pub geometric: f64,
    pub iterations: usize,
    pub seconds: f64,
}

fn finish(w: csv::Writer<Vec<u8>>, path: &Path) -> CliResult<()> {
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_phase_csv(records: &[MetricsRecord], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PHASE_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.phase.to_string(),
            r.kind.to_string(),
            r.shapes.to_string(),
            r.mse.to_string(),
            r.mse_gray.to_string(),
            r.l1.to_string(),
            r.geometric.to_string(),
            r.iterations.to_string(),
            format!("{:.6}", r.seconds),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}

pub fn write_bench_csv(records: &[BenchRecord], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER).map_err(csv_err(path))?;
    for r in records {
        w.write_record([
            r.image.clone(),
            r.target.to_string(),
            r.shapes.to_string(),
            r.mse.to_string(),
            r.mse_gray.to_string(),
            r.l1.to_string(),
            r.geometric.to_string(),
            r.iterations.to_string(),
            format!("{:.6}", r.seconds),
        ])
        .map_err(csv_err(path))?;
    }
    finish(w, path)
}
