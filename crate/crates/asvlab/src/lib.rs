//! Simulation, training and evaluation stack for an underactuated surface
//! vessel that follows a waypoint path while avoiding static obstacles.
//!
//! The crate is organized along the data flow of one simulated episode:
//!
//! - [`dynamics`] — 3-DOF vessel model and fixed-step RKF45 integration.
//! - [`geometry`] — monotone-cubic waypoint paths, arc-length
//!   parameterization and path-relative tracking errors.
//! - [`scenario`] — stochastic generation and persistence of training
//!   environments (path plus circular obstacles).
//! - [`sensing`] — rangefinder simulation and sector pooling (min, max,
//!   feasibility).
//! - [`env`] — the episode protocol: observation vector, reward shaping,
//!   termination.
//! - [`rl`] — actor/critic networks, generalized advantage estimation,
//!   clipped-surrogate policy optimization and the training loop.
//! - [`eval`] — batch evaluation across reward trade-offs, built-in test
//!   scenarios and trend-model curve fitting.
//!
//! The `asvlab` binary wires these together behind subcommands; see the
//! repository README for usage.

pub mod angle;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod eval;
pub mod geometry;
pub mod rl;
pub mod rng;
pub mod scenario;
pub mod sensing;
