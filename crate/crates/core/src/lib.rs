//! Tracking-error-bound reachability for planner/tracker model pairs.
//!
//! The crate is `no_std` (with `alloc`) and contains every numerical piece of
//! the pipeline:
//!
//! - [`dynamics`]: the 10D near-hover quadrotor, the 3D holonomic planner and
//!   their relative system, plus the X/Y/Z subsystem decomposition.
//! - [`grid`]: Cartesian grids, multilinear look-up and gradient tables.
//! - [`solver`]: the pursuit-evasion value function, solved to convergence with
//!   a monotone Lax-Friedrichs scheme.
//! - [`teb`]: tracking error bound extraction and obstacle augmentation.
//! - [`controller`]: the hybrid safety/performance tracking controller.
//! - [`rrt`], [`world`], [`sim`]: the online planning loop in simulation.
//!
//! File formats, parallel precomputation and the command line live in the
//! companion `fastrack` crate.
#![cfg_attr(not(test), no_std)]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod controller;
pub mod dynamics;
mod error;
pub mod grid;
pub mod hash;
pub mod rng;
pub mod rrt;
pub mod sim;
pub mod solver;
pub mod teb;
pub mod world;

pub use error::{Error, Result};
