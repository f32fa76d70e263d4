//! File formats, study pipeline and command line for embedding surrogates.

pub mod artifacts;
pub mod config;
pub mod embd;
mod error;
pub mod study;
pub mod table;

pub use embsurr_core as core;
pub use error::{Error, Result};
