//! Channels, channel marginal families and their resource marginal problem.

mod rmp;
mod spec;

pub use rmp::*;
pub use spec::*;
