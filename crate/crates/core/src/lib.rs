//! UWB geofencing safety simulator for AGVs.
//!
//! Simulates an RTLS-driven emergency stop (tag blinks, noisy location
//! fixes, a geofence controller and the stop latency chain) and evaluates
//! assume-guarantee safety contracts against the resulting stopping
//! distances.

pub mod agv;
pub mod calibration;
pub mod config;
pub mod contracts;
pub mod controller;
pub mod geometry;
pub mod harness;
pub mod latency;
pub mod presets;
pub mod rtls;
pub mod stats;

pub use contracts::{evaluate_contract, SafetyContract};
pub use geometry::{BufferedZone, Point2, WorldConfig, Zone};
pub use harness::{run_experiment, simulate_run, ExperimentConfig, ExperimentReport, RunResult};
pub use presets::preset;
