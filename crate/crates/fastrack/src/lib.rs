//! Command-line pipeline around `fastrack-core`: run configs, the table file
//! format, parallel precomputation, verification suites and exports.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod precompute;
pub mod simulate;
pub mod tables;
pub mod verify;

pub use error::{Error, Result};
