use std::path::PathBuf;

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("axis {axis} out of range for rank {rank}")]
    Axis { axis: usize, rank: usize },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-finite gradient at step {step} for `{param}` (max |g| = {max_abs})")]
    NonFiniteGradient {
        step: u64,
        param: String,
        max_abs: f32,
    },

    #[error("cannot split class `{class}`: needs at least 2 items, has {count}")]
    Split { class: String, count: usize },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: cannot decode image: {message}", path.display())]
    Image { path: PathBuf, message: String },

    #[error("not a model container (bad magic {found:?})")]
    NotAContainer { found: [u8; 4] },

    #[error("unsupported container version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("tensor `{first}` overlaps tensor `{second}` in container payload")]
    OverlappingTensors { first: String, second: String },

    #[error("corrupt model container: {0}")]
    CorruptContainer(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// True for errors caused by bad user input (files, configs, arguments)
    /// as opposed to internal or numeric failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dataset(_)
                | Error::Io { .. }
                | Error::Image { .. }
                | Error::NotAContainer { .. }
                | Error::UnsupportedVersion { .. }
                | Error::OverlappingTensors { .. }
                | Error::CorruptContainer(_)
                | Error::Split { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
