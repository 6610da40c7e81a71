//! Robust range-only network localization.
//!
//! The crate models a sensor network with a handful of anchors, samples noisy
//! (and possibly corrupted) range measurements, and estimates the sensor
//! positions by minimizing a convex relaxation of a Huber-loss discrepancy.
//! Two distributed solvers are provided: an accelerated synchronous method in
//! which every node updates in lockstep, and an asynchronous method where one
//! randomly woken node solves its local problem at a time. The [`harness`]
//! module drives Monte Carlo experiments on top of both.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod async_solver;
pub mod config;
pub mod cost;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod reference;
pub mod rng;
pub mod sync_solver;

pub use error::{Error, Result};
pub use geometry::{NetworkInstance, NetworkTopology};
pub use linalg::Points;
pub use noise::{FaultSpec, Measurements, NoiseModel};
