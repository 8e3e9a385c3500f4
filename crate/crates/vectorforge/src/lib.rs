//! File formats, IO and the command line for `vectorforge-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod plot;
pub mod svg;

pub use error::{CliError, CliResult};
pub use io::load_raster;
pub use svg::{parse_svg, read_svg, svg_string, write_svg};
