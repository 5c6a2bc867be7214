//! Link-SINR assurance for RIS-assisted indoor mmWave networks.
//!
//! A factory floor holds base stations, wall-mounted reconfigurable
//! intelligent surfaces (RIS), machines that block line of sight, and mobile
//! robots. Each slot every robot is served directly by a base station, through
//! a RIS, or not at all; the goal is to keep every robot above its SINR
//! threshold while never letting it go without service for `K_r` slots in a
//! row, and to minimise the total number of outage slots.

pub mod allocation;
pub mod channel;
pub mod geometry;
pub mod harness;
pub mod heuristic;
pub mod milp;
pub mod scenario;

pub use allocation::{validate, AllocationSchedule, Assignment, ValidationReport};
pub use channel::PhysParams;
pub use geometry::{Obstacle, Point2D, RisMount};
pub use heuristic::{allocate, HeuristicOutcome};
pub use scenario::{generate, precompute, DerivedTables, Scenario, ScenarioConfig};
