//! Configuration files, trajectory persistence, run manifests and the
//! `chaoslab` command line on top of `chaoslab-core`.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;
pub mod traj_io;

pub use commands::{dispatch, DispatchError, Subcommand};
pub use config::{parse_config, render, ConfigError, ResolvedConfig};
pub use manifest::{config_hash, ErrorRecord, RunManifest};
