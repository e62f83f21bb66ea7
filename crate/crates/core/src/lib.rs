//! Agent-based simulator of jellyfish-capsule / Janus-particle microrobots.

pub mod agents;
pub mod batch;
pub mod chamber;
pub mod dep;
pub mod discharge;
pub mod engine;
pub mod enzyme;
pub mod error;
pub mod export;
pub mod field;
pub mod gateway;
pub mod geom;
pub mod medium;
pub mod presets;
pub mod propulsion;
pub mod rng;
pub mod targets;

pub use error::{Result, SimError};
