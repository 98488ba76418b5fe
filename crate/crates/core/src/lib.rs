//! Deterministic discrete-event simulator for Hello beaconing over
//! multi-channel, multi-interface wireless networks.
//!
//! Nodes carry several radio interfaces, each tuned to one channel. Hello
//! beacons are replicated on every interface, and a frame is received only
//! by interfaces tuned to the channel it was sent on. Channel selection is
//! pluggable ([`policy::ChannelPolicy`]), every send, receive, drop and
//! retune is written to a line-oriented trace, and [`trace::audit`] replays
//! a trace to check it.

pub mod engine;
pub mod hello;
pub mod policy;
pub mod radio;
pub mod scenario;
pub mod stats;
pub mod trace;

pub use engine::{EventHandle, EventQueue, RngStreams, SimTime};
pub use policy::ChannelPolicy;
pub use radio::{ChannelId, IfaceRef, NodeId, Position};
pub use scenario::{build_and_run, run_in_memory, ConfigError, ScenarioConfig, SimError, Simulation};
pub use stats::{discovery_completeness, ideal_neighbors, CounterSet, RunSummary};
