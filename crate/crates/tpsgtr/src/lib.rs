//! File formats and the command-line pipeline around [`tpsgtr_core`]:
//! JSON Lines datasets, JSON checkpoints and reports, flat `key = value`
//! run configs, and the `tpsgtr` executable's subcommands.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod inspect;
pub mod report;

pub use error::{CliError, Result};
