//! Scenario configuration and the simulation runner.

mod config;
mod runner;

pub use config::{
    parse_duration_ms, BroadcastSpec, ConfigError, PositionSpec, ScenarioConfig, TuningOverride, TuningSpec,
    DEFAULT_BROADCAST_BYTES, DEFAULT_DURATION_MS, DEFAULT_NUM_INTERFACES,
};
pub use runner::{build_and_run, run_in_memory, Outgoing, SharedBuf, SimError, SimEvent, Simulation};
