//! Command-line pipeline around `stochdiag-core`: TOML configuration, CSV
//! run tables, the toy experiments and SVG rendering of reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod pipeline;
pub mod render;
pub mod svg;

pub use commands::run;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
