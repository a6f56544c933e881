//! Joint subchannel, transmit-power and hovering-time allocation for a UAV swarm that
//! shares spectrum with a satellite downlink.
//!
//! The solvers work on large-scale channel state only: rates are replaced by a deterministic
//! approximation whose slack variables are tied to the powers by a scalar fixed point, and the
//! true ergodic rates are checked by Monte Carlo in [`rate`].

pub mod blocks;
pub mod channel;
pub mod error;
pub mod kernels;
pub mod maxmin;
pub mod model;
pub mod rate;
mod rng;
pub mod sum;
pub mod units;

pub use error::{Error, Result};
pub use model::{Allocation, ConstraintSet, Scenario, SlackState};
