//! Experiment harness around `dlora-core`: TOML configuration, parallel
//! radius × policy × seed sweeps, CSV results and agent snapshots.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{load_config, ConfigFile, SweepSpec};
pub use sweep::{run_sweep, RunOptions};
