use alloc::string::String;

use crate::expr::ParseError;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    /// A program references a coordinate outside the row it is evaluated on.
    #[error("dimension d{index} out of range for width {width}")]
    DimOutOfRange { index: u32, width: usize },

    #[error("shape mismatch: expected {expected}, got {found}")]
    Shape { expected: usize, found: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u32, classes: u32 },

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
