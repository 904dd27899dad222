//! Configuration-driven experiment runner behind the `qns` binary.
//!
//! A TOML configuration names the experiment and its physical parameters;
//! frequencies and durations carry explicit unit suffixes (`_hz`, `_s`) and
//! are converted to rad/s internally (factor `2 pi`) on load. Each command
//! writes plain columnar text plus a `manifest.json` recording the seed,
//! package version and config hash, enough to reproduce every output file
//! bit for bit.
//!
//! Subcommands: `dpss`, `filters`, `simulate`, `reconstruct`, `compare`.
//! Exit codes: 0 success, 2 validation error, 3 numerical failure.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run_command, Command, RunError};
