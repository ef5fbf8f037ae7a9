//! Resource marginal problems for quantum states and channels.
//!
//! Given marginal density matrices on overlapping subsystems, decide whether
//! some global state reproduces them while its reduction on a target
//! subsystem is resource-free, quantify the failure by a conic robustness,
//! and turn the dual optimum into witnesses and discrimination games. The
//! same questions are answered for families of channels through their Choi
//! matrices.

pub mod channel;
pub mod config;
pub mod discrimination;
pub mod error;
pub mod free_sets;
pub mod hermitian;
pub mod instances;
pub mod io;
pub mod rng;
pub mod solver;
pub mod state_rmp;

pub use channel::{ChannelMarginalFamily, ChannelPair, ChannelRmpInstance, ChannelSpec};
pub use error::{Result, RmpError};
pub use free_sets::{FreeChannelKind, FreeChannelSetSpec, FreeSetKind, FreeSetSpec};
pub use hermitian::{CMat, CVec, DensityMatrix, HermitianOperator, SubsystemLayout, SubsystemSet};
pub use io::{Instance, Provenance};
pub use solver::{ConicProgram, Settings, SolveResult, SolveStatus};
pub use state_rmp::{MarginalFamily, RmpInstance};
