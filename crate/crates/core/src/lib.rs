//! Stochastic extended asymmetric-behavior (EAB) car-following toolkit.
//!
//! The crate covers the whole analysis chain for leader/follower trajectory
//! data passing through a single stop-and-go disturbance:
//!
//! * [`trajectory`]: trajectory types, CSV ingestion, resampling, Newell shifts
//!   and leader phase detection.
//! * [`newell`]: deterministic grid calibration of the Newell response time and
//!   minimum spacing, plus the NRMSE primitive.
//! * [`eab`]: the piecewise-linear deviation curve, follower simulation,
//!   empirical deviation measurement and reaction-pattern classification.
//! * [`abc`]: adaptive sequential Monte Carlo ABC calibration of the deviation
//!   curve parameters.
//! * [`validation`]: assignment-based reproduction distances, representative
//!   particles and Jensen–Shannon distance between posteriors.
//! * [`hysteresis`]: Edie zones along the wave speed, flow–density loops,
//!   cross-product orientation and loop classification.
//! * [`platoon`]: Monte-Carlo mixed HDV/ACC platoon simulation.
//! * [`pipeline`], [`config`], [`synthetic`], [`report`], [`plot`]: the batch
//!   pipeline behind the `eab` binary.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abc;
pub mod config;
pub mod eab;
pub mod error;
pub mod hysteresis;
pub mod newell;
pub mod pipeline;
pub mod platoon;
pub mod plot;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod trajectory;
pub mod validation;

pub use error::{Error, Result};
