//! Box-counting dimensions, survival curves, step-length statistics and
//! dissipation integrals.

pub mod boxcount;
pub mod dissipation;
pub mod ensemble;
pub mod levy;
pub mod regression;
pub mod survival;

use thiserror::Error;

use crate::simulator::SimError;

pub use boxcount::{
    box_count, default_depth, estimate_dimension, regress_dimension, BoxCountResult, DimensionFit, ScaleSelection,
    R_SQUARED_GATE,
};
pub use dissipation::{dissipation_closed_form, dissipation_numeric};
pub use ensemble::{
    fractal_dimension_of_run, fractal_dimension_of_trajectory, EnsembleStats, FractalOptions, ScalePolicy, TrialResult,
};
pub use levy::{df_from_alpha, fit_levy, heavy_tail_ratio, step_length_histogram, step_lengths, Histogram, LevyFit};
pub use survival::{survival_experiment, SurvivalCurve};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("point {index} at {position:?} lies outside the counting region")]
    PointOutside { index: usize, position: [f64; 3] },
    #[error("only {retained} usable scales, need at least 3")]
    InsufficientScales { retained: usize },
    #[error("no trial passed the R² gate ({trials} trials)")]
    NoEstimate { trials: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("fit failed: {reason} (residual {residual:e})")]
    FitFailure { reason: String, residual: f64 },
    #[error("quadrature did not converge on [{:e}, {:e}] (estimate {estimate:e})", interval.0, interval.1)]
    Quadrature { interval: (f64, f64), estimate: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
}
