//! Fractal dimension of simulated trajectories, singly and over ensembles.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boxcount::{box_count, default_depth, regress_dimension, BoxCountResult, ScaleSelection};
use super::levy::step_lengths;
use super::AnalysisError;
use crate::simulator::{simulate_trajectory, SimConfig, Status, Trajectory};

/// How the finest regression scale is chosen for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScalePolicy {
    /// Keep grid levels whose cells are at least `factor` times the median
    /// step length. Finer grids see the individual samples of a curve rather
    /// than the set it traces out.
    StepResolution { factor: f64 },
    /// A fixed rule independent of the trajectory.
    Fixed(ScaleSelection),
}

impl Default for ScalePolicy {
    fn default() -> Self {
        ScalePolicy::StepResolution { factor: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FractalOptions {
    /// Grid depth; the dimension's default when `None`.
    pub depth: Option<usize>,
    pub policy: ScalePolicy,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    Some(*m)
}

/// Box-counting estimate for one trajectory.
pub fn fractal_dimension_of_trajectory(
    traj: &Trajectory,
    config: &SimConfig,
    options: &FractalOptions,
) -> Result<BoxCountResult, AnalysisError> {
    let depth = options.depth.unwrap_or_else(|| default_depth(config.dim));
    let counted = box_count(&traj.positions, config.dim, config.half_box, depth)?;
    let selection = match options.policy {
        ScalePolicy::Fixed(s) => s,
        ScalePolicy::StepResolution { factor } => {
            let typical = median(step_lengths(traj, config.boundary, config.half_box))
                .filter(|&m| m > 0.0)
                .ok_or_else(|| AnalysisError::Degenerate("trajectory never moves".into()))?;
            ScaleSelection::Resolution { finest_edge: factor * typical }
        }
    };
    regress_dimension(counted, selection)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub df: Option<f64>,
    pub r_squared: Option<f64>,
    pub passed: bool,
    /// Samples produced; less than `steps + 1` if the run stopped early.
    pub samples: usize,
    pub truncated: bool,
    /// Why no estimate exists, if none does.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub trials: Vec<TrialResult>,
    pub mean_df: Option<f64>,
    /// Sample standard deviation over passing trials; `None` below two.
    pub sigma: Option<f64>,
    pub gate_failures: usize,
}

impl EnsembleStats {
    pub fn from_trials(trials: Vec<TrialResult>) -> Self {
        let values: Vec<f64> = trials.iter().filter(|t| t.passed).filter_map(|t| t.df).collect();
        let n = values.len();
        let mean_df = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        let sigma = mean_df
            .filter(|_| n > 1)
            .map(|m| (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        let gate_failures = trials.len() - n;
        EnsembleStats { trials, mean_df, sigma, gate_failures }
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn passed(&self) -> usize {
        self.trials.len() - self.gate_failures
    }

    /// CSV `trial,Df,R2,gate`; undefined values are left empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "trial,Df,R2,gate")?;
        for t in &self.trials {
            let df = t.df.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let r2 = t.r_squared.map(|v| format!("{v:.16e}")).unwrap_or_default();
            writeln!(w, "{},{df},{r2},{}", t.trial, if t.passed { "pass" } else { "fail" })?;
        }
        Ok(())
    }

    /// JSON `{mean_df, sigma, trials, gate_failures}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mean_df": self.mean_df,
            "sigma": self.sigma,
            "trials": self.n_trials(),
            "gate_failures": self.gate_failures,
        })
    }
}

/// Simulates and measures trial `trial`.
pub fn measure_trial(config: &SimConfig, options: &FractalOptions, trial: u64) -> Result<TrialResult, AnalysisError> {
    let traj = simulate_trajectory(config, trial)?;
    let truncated = matches!(traj.status, Status::Truncated { .. });
    let (fit, note) = match fractal_dimension_of_trajectory(&traj, config, options) {
        Ok(r) => (r.fit, None),
        Err(e @ (AnalysisError::InsufficientScales { .. } | AnalysisError::Degenerate(_))) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    Ok(TrialResult {
        trial,
        df: fit.map(|f| f.df),
        r_squared: fit.map(|f| f.r_squared),
        passed: fit.is_some_and(|f| f.passes_gate()),
        samples: traj.len(),
        truncated,
        note,
    })
}

/// Runs `config.trials` independent trajectories in parallel and aggregates
/// the gate-passing estimates. Results are ordered by trial index.
pub fn fractal_dimension_of_run(config: &SimConfig, options: &FractalOptions) -> Result<EnsembleStats, AnalysisError> {
    config.validate()?;
    let trials = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| measure_trial(config, options, trial))
        .collect::<Result<Vec<_>, _>>()?;
    let stats = EnsembleStats::from_trials(trials);
    if stats.mean_df.is_none() {
        return Err(AnalysisError::NoEstimate { trials: stats.n_trials() });
    }
    Ok(stats)
}
