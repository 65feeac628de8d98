//! Decay of the surviving population under absorbing boundaries.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::linear_fit;
use super::AnalysisError;
use crate::simulator::{directions, run_with, BoundaryMode, SimConfig, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// Step checkpoints `0, 1, 2, 4, …, 2^n ≤ steps`.
    pub checkpoints: Vec<usize>,
    /// Particles still inside the domain after each checkpoint.
    pub counts: Vec<usize>,
    /// `λ` in `count ≈ C·exp(−λ·step)`.
    pub decay_rate: f64,
    pub r_squared: f64,
    /// Slope and `R²` of `ln count` against `log₂ step` over the checkpoints
    /// from step 1 on: the same data on the axis it is sampled on.
    pub log_step_slope: f64,
    pub log_step_r_squared: f64,
    pub trials: usize,
    /// Runs stopped by the integrator; they are counted as survivors.
    pub truncated: usize,
}

impl SurvivalCurve {
    /// CSV `step,count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step,count")?;
        for (s, c) in self.checkpoints.iter().zip(&self.counts) {
            writeln!(w, "{s},{c}")?;
        }
        Ok(())
    }
}

/// `0` followed by powers of two up to `steps`.
pub fn checkpoints(steps: usize) -> Vec<usize> {
    let mut v = vec![0];
    let mut p = 1usize;
    while p <= steps {
        v.push(p);
        match p.checked_mul(2) {
            Some(next) => p = next,
            None => break,
        }
    }
    v
}

/// Number of steps completed before absorption.
fn lifetime(config: &SimConfig, trial: u64) -> Result<(usize, bool), AnalysisError> {
    let (status, _) = run_with(config, directions(config, trial), |_, _, _, _| {})?;
    Ok(match status {
        Status::Completed => (config.steps, false),
        Status::Absorbed { step } => (step - 1, false),
        Status::Truncated { .. } => (config.steps, true),
    })
}

/// Runs `config.trials` particles without recovery and fits `ln count`
/// against step number.
pub fn survival_experiment(config: &SimConfig) -> Result<SurvivalCurve, AnalysisError> {
    if config.boundary != BoundaryMode::Absorbing {
        return Err(AnalysisError::InvalidInput("survival needs the absorbing boundary".into()));
    }
    config.validate()?;
    let lives = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| lifetime(config, trial))
        .collect::<Result<Vec<_>, _>>()?;
    let checkpoints = checkpoints(config.steps);
    let counts: Vec<usize> = checkpoints.iter().map(|&s| lives.iter().filter(|(life, _)| *life >= s).count()).collect();
    let truncated = lives.iter().filter(|(_, t)| *t).count();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        checkpoints.iter().zip(&counts).filter(|(_, &c)| c > 0).map(|(&s, &c)| (s as f64, (c as f64).ln())).unzip();
    let degenerate = || AnalysisError::Degenerate("all particles were lost before the second checkpoint".into());
    let fit = linear_fit(&xs, &ys).ok_or_else(degenerate)?;
    let (ls, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(&ys).filter(|(&s, _)| s >= 1.0).map(|(&s, &y)| (s.log2(), y)).unzip();
    let log_fit = linear_fit(&ls, &ly);
    Ok(SurvivalCurve {
        checkpoints,
        counts,
        decay_rate: -fit.slope,
        r_squared: fit.r_squared,
        log_step_slope: log_fit.map_or(0.0, |f| f.slope),
        log_step_r_squared: log_fit.map_or(f64::NAN, |f| f.r_squared),
        trials: config.trials,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::{Dimension, Vector};

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(0), vec![0]);
        assert_eq!(checkpoints(1), vec![0, 1]);
        assert_eq!(checkpoints(10), vec![0, 1, 2, 4, 8]);
        assert_eq!(checkpoints(16), vec![0, 1, 2, 4, 8, 16]);
    }

    #[test]
    fn still_field_loses_nobody() {
        let c = SimConfig {
            dim: Dimension::Three,
            moment: 0.0,
            half_box: 3.0,
            x0: Vector::new(1.0, 0.0, 0.0),
            boundary: BoundaryMode::Absorbing,
            steps: 64,
            trials: 8,
            ..SimConfig::default()
        };
        let s = survival_experiment(&c).unwrap();
        assert!(s.counts.iter().all(|&n| n == 8));
        assert_eq!(s.decay_rate, 0.0);
    }

    #[test]
    fn requires_absorbing_boundary() {
        assert!(survival_experiment(&SimConfig::default()).is_err());
    }
}
