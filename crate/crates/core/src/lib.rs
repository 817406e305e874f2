//! Simulation core for friendliness-driven virtual agents.
//!
//! A scalar friendliness value selects a gait, gates hand/head gestures and
//! eye contact. A behavioral state machine walks the agent through a scripted
//! task protocol, navigation moves it collision-free, and the engine composes
//! everything into per-tick skeletal snapshots.

pub mod motion;
pub mod friendliness;
pub mod stats;
pub mod bfsm;
pub mod nav;
pub mod gaze;
pub mod engine;
