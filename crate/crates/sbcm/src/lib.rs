//! File formats, parameter sweeps and the `sbcm` command line on top of `sbcm-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod io;
pub mod portrait;
pub mod sweep;
pub mod topology;

pub use error::{Error, Result};
