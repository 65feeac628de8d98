//! Particles advected by a dipole whose orientation is redrawn at random every
//! step, and the tools to measure what they trace out: box-counting dimension,
//! survival under absorbing walls, step-length tails and viscous dissipation.

// Index loops mirror the tableau and matrix notation they implement.
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod experiments;
pub mod field;
pub mod integrator;
pub mod simulator;
pub mod stochastic;
pub mod vector;

pub use field::{DipoleField, FieldError, Source, SourceSet};
pub use integrator::{StepControl, FEHLBERG};
pub use simulator::{simulate_trajectory, BoundaryMode, SimConfig, SimError, Stepping, Trajectory};
pub use stochastic::DirectionSampler;
pub use vector::{Dimension, Vector};
