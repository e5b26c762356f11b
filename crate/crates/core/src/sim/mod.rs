//! Episodic simulator of the plug-in hybrid PEMFC/battery powertrain.
//!
//! One episode is a voyage: a sailing segment stepped one sample at a time,
//! followed by a single port transition that simulates the whole shore-power segment.

mod battery;
mod config;
mod costs;
mod env;
mod log;
mod reward;
mod state;

use std::path::PathBuf;

use thiserror::Error;

pub use battery::{battery_power, port_charge, BatteryFlow};
pub use config::{BatteryDegradation, BatteryParams, FcDegradation, FuelCellParams, GwpFactors, Prices, ShipConfig};
pub use costs::{
    battery_and_shore_costs, cluster_degradation, cluster_h2_kg, fuel_cell_costs, stack_efficiency, step_costs,
};
pub use env::{
    apply_action, sailing_transition, simulate_port, total_converter_power, Environment, Mode, SailingTransition, StepOutcome,
    StepRecord, TerminationReason,
};
pub use log::{read_log, write_log, LogRow};
pub use reward::{cost_reward, reward, COST_FLOOR, PENALTY};
pub use state::{Action, CostBreakdown, SystemState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid ship config: {0}")]
    InvalidConfig(String),
    #[error("{what} has dimension {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("action component {value} outside [-{limit}, {limit}]")]
    ActionOutOfBounds { value: f64, limit: f64 },
    #[error("step called on a terminated episode")]
    EpisodeTerminated,
    #[error("step called before reset")]
    NotReset,
    #[error("profile: {0}")]
    Profile(#[from] crate::profiles::ProfileError),
    #[error("{path}: {msg}")]
    Log { path: PathBuf, msg: String },
}
