//! Library half of the `pointsim` command-line tool: file IO, sweeps,
//! accumulation curves, gradient profiles, timing benchmarks and the seeded
//! experiments built on them.

pub mod accumulate;
pub mod bench;
pub mod commands;
pub mod error;
pub mod experiments;
pub mod format;
pub mod io;
pub mod profile;
pub mod sweep;

pub use error::{CliError, Result};
