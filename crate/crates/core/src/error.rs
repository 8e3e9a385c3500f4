use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::geometry::Scene;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone)]
pub enum Error {
    /// Canvas with zero width or height.
    EmptyCanvas,
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    /// Optimizer state was built for a differently shaped scene.
    IncongruentState,
    InvalidArgument(String),
    /// A loss or gradient turned NaN/Inf. Carries the scene being optimized
    /// when it happened so callers can dump it.
    NonFinite {
        phase: usize,
        scene: Box<Scene>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCanvas => f.write_str("empty canvas"),
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "shape index {index} out of range for {len} shapes")
            }
            Error::IncongruentState => {
                f.write_str("optimizer state does not match the scene layout")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite { phase, .. } => {
                write!(f, "non-finite loss or gradient in phase {phase}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
