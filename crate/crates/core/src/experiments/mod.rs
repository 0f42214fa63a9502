//! Reproducible experiment runs: presets, configuration, sweeps and validation.

pub mod checks;
pub mod config;
pub mod policy_file;
pub mod presets;
pub mod sweep;

pub use config::{ExperimentConfig, Resolved, SimSettings, SweepSpec};
pub use policy_file::{params_hash, PolicyFile};
pub use presets::{Preset, SweptParam};
pub use sweep::{run_sweep, write_csv, GridPoint, PolicyOutcome};
