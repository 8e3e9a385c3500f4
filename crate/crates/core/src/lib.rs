//! Optimize & reduce vectorization core.
//!
//! Fits a set of filled closed cubic Bézier shapes to a raster target by
//! alternating gradient-based optimization of every shape at once with
//! pruning of the least important shapes, until a shape budget is met.
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only turns on
//! data-parallel rendering through rayon; results are bit-identical either
//! way. File formats and the command line live in the `vectorforge` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod clusterinit;
mod error;
pub mod geometry;
pub mod math;
pub mod optimizer;
mod par;
pub mod pipeline;
pub mod raster;

pub use clusterinit::{init_scene, random_scene, InitConfig};
pub use error::{Error, Result};
pub use geometry::{CubicSegment, Point, Polyline, Rgba, Scene, Shape};
pub use optimizer::{LossConfig, OptimState, ReconKind, StopRule};
pub use pipeline::{PhaseMetrics, PipelineConfig, ReduceMode, RunReport, Schedule};
pub use raster::{GradientSet, RasterImage, Rgb};
