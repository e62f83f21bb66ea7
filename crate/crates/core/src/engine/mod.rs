//! Scenario loading, the simulation loop, event logs and replay.

pub mod events;
pub mod run;
pub mod scenario;
pub mod world;

pub use events::{parse_log, write_log, AgentRef, DetachCause, Event, EventKind};
pub use run::{finish, replay, run, Metrics, RunMeta, RunRecord, TargetDose, Verdict};
pub use scenario::{load_scenario, ControlAction, Scenario, ScriptEntry, SCHEMA_VERSION};
pub use world::{Sample, Snapshot, World};
