//! Simulator for a line-following skid-steer vehicle steered by fused
//! commands from an on-vehicle camera and overhead infrastructure cameras
//! over a lossy datagram network.
//!
//! The pipeline per camera frame is `perception` → `control` → `faults` →
//! `wire`; the vehicle node in `fusion` combines the latest command of each
//! source and drives the kinematics in `world`. `harness` runs whole
//! experiments and `metrics` scores them.

pub mod control;
pub mod faults;
pub mod fusion;
pub mod harness;
pub mod metrics;
pub mod perception;
pub mod wire;
pub mod world;

pub use control::{pid_update, sensor_tick, PidGains, PidState};
pub use fusion::{fuse_max, fuse_simple_avg, fuse_weighted, FusionPolicy, SourceRegistry, VehicleNode};
pub use harness::{load_scenario, run, RunResult, Scenario};
pub use wire::{decode_command, encode_command, SteeringCommand};
pub use world::{Pose, Track, TrackSpec};
