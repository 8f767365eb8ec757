//! Command-line orchestration: config parsing, manifests, and the train,
//! evaluate, ablate, sweep and inspection commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{execute, replay, Outcome};
pub use config::{load_run_spec, parse_dataset, DatasetSpec, RunSpec, KEYS};
pub use error::CliError;
pub use manifest::{Invocation, PreviewSource, RepeatMode, RunManifest, SweepAxis};
