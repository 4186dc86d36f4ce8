//! Deterministic discrete-round network simulator: scenarios, schedules,
//! adversary strategies, the world loop, traces, and compliance checks.

pub mod scenario;
pub mod schedule;
pub mod adversary;
pub mod world;
pub mod trace;
pub mod compliance;
