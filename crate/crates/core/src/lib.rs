//! Energy management for a plug-in hybrid fuel-cell/battery ship.
//!
//! - [`sim`]: powertrain environment, costs and reward.
//! - [`profiles`]: synthetic voyages and profile CSV files.
//! - [`nn`]: dense networks, backpropagation, Adam and checkpoints.
//! - [`td3`]: the TD3 agent.
//! - [`dp`]: dynamic-programming benchmark.
//! - [`strategy`]: controllers selectable by name.
//! - [`harness`]: training protocol, reports and plots.

pub mod dp;
pub mod harness;
pub mod nn;
pub mod profiles;
mod seeding;
pub mod sim;
pub mod strategy;
pub mod td3;
