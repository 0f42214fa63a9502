//! Optimal pull-based tracking of two binary Markov sources whose sensors
//! can report each other's state.
//!
//! The crate builds the finite belief MDP seen by the monitor, solves it with
//! relative value iteration, evaluates policies exactly through stationary
//! distributions, and checks the results against a slotted Monte-Carlo
//! simulation of the physical system.

pub mod belief;
pub mod distortion;
pub mod error;
pub mod markov;
pub mod model;
pub mod policies;
pub mod sim;
pub mod solver;

pub use belief::Belief;
pub use distortion::DistortionMatrix;
pub use error::{Error, Result};
pub use markov::SourceModel;
pub use model::{Action, StateSpace, SystemParams, TrackingModel, TrackingState};
pub use policies::{Policy, PolicyKind};
pub use sim::{SimConfig, SimResult};
pub use solver::{FiniteMdp, PolicyTable, RviaOptions};
pub mod experiments;
