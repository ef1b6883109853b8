//! File formats and the command-line driver for `contopic-core`.

pub mod cli;
pub mod config;
pub mod format;
pub mod output;
