//! Command-line front end for `outbreak-text`: fixture generation,
//! labeling, five-split training and evaluation, strategy comparison and
//! summary reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::{LanguageSel, ModelKind, RunConfig};
pub use error::CliError;
