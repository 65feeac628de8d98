//! Particle transport through the randomly reoriented dipole field.
//!
//! Each step draws a fresh direction `d̂`, advances the particle through the
//! frozen field `V(·, d̂)`, then applies the boundary protocol once. How far a
//! step reaches is set by [`Stepping`]: one adaptive RKF step per direction
//! (the default), or a fixed time interval covered by as many adaptive
//! substeps as needed.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{checked_unit, DipoleField, FieldError};
use crate::integrator::{self, ForcedAcceptance, IntegratorError, StepControl, FEHLBERG};
use crate::stochastic::DirectionSampler;
use crate::vector::{Dimension, Vector};

/// Displacement applied when a step lands exactly on the dipole.
const LANDING_NUDGE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Wrap every coordinate back into `[−L, L)`.
    Periodic,
    /// Return to `x₀` when any coordinate leaves `[−L, L]`.
    Reset,
    /// Stop the trajectory when any coordinate leaves `[−L, L]`.
    Absorbing,
}

impl FromStr for BoundaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "1" => Ok(BoundaryMode::Periodic),
            "reset" | "2" => Ok(BoundaryMode::Reset),
            "absorbing" => Ok(BoundaryMode::Absorbing),
            other => Err(format!("unknown boundary mode '{other}' (periodic, reset, absorbing)")),
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::Reset => "reset",
            BoundaryMode::Absorbing => "absorbing",
        })
    }
}

/// How much time one random direction is held for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Stepping {
    /// One accepted adaptive step per direction; the step size carries over
    /// between directions.
    Adaptive,
    /// The direction is held for `interval` time units, covered by adaptive
    /// substeps.
    FixedInterval { interval: f64 },
}

impl fmt::Display for Stepping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stepping::Adaptive => f.write_str("adaptive"),
            Stepping::FixedInterval { interval } => write!(f, "interval:{interval}"),
        }
    }
}

impl FromStr for Stepping {
    type Err = String;

    /// `adaptive`, `interval` (0.01) or `interval:<dt>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "adaptive" => Ok(Stepping::Adaptive),
            None if s == "interval" => Ok(Stepping::FixedInterval { interval: 0.01 }),
            Some(("interval", v)) => v
                .parse()
                .map(|interval| Stepping::FixedInterval { interval })
                .map_err(|e| format!("bad interval '{v}': {e}")),
            _ => Err(format!("unknown stepping '{s}' (adaptive, interval[:dt])")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dim: Dimension,
    /// Dipole moment `d_H`.
    pub moment: f64,
    /// Number of direction draws `N`.
    pub steps: usize,
    /// Half-width `L_f` of the domain `[−L_f, L_f]^D`.
    pub half_box: f64,
    pub x0: Vector,
    pub boundary: BoundaryMode,
    /// Radial cutoff `Δr`.
    pub cutoff: f64,
    pub control: StepControl,
    pub stepping: Stepping,
    pub seed: u64,
    pub trials: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dim: Dimension::Three,
            moment: 60.0,
            steps: 100_000,
            half_box: 0.1,
            x0: Vector::new(-0.02, 0.0, 0.0),
            boundary: BoundaryMode::Periodic,
            cutoff: 0.0,
            control: StepControl::default(),
            stepping: Stepping::Adaptive,
            seed: 1,
            trials: 150,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        DipoleField::new(self.dim, self.moment, self.cutoff)?;
        self.control.validate()?;
        if !(self.half_box > 0.0 && self.half_box.is_finite()) {
            return bad(format!("half_box must be positive, got {}", self.half_box));
        }
        let x0 = self.x0;
        if !x0.is_finite() || x0.0[self.dim.get()..].iter().any(|&c| c != 0.0) {
            return bad(format!("x0 {:?} must be finite with {} components", x0.0, self.dim));
        }
        if x0.is_zero() {
            return bad("x0 must not coincide with the dipole".into());
        }
        if x0.components(self.dim).iter().any(|c| c.abs() >= self.half_box) {
            return bad(format!("x0 {:?} must lie strictly inside the domain", x0.0));
        }
        if let Stepping::FixedInterval { interval } = self.stepping {
            if !(interval > 0.0 && interval.is_finite()) {
                return bad(format!("stepping interval must be positive, got {interval}"));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        Ok(())
    }

    pub fn field(&self) -> Result<DipoleField, SimError> {
        Ok(DipoleField::new(self.dim, self.moment, self.cutoff)?)
    }

    /// Lévy-flight number of this configuration, using the stepping interval
    /// or the maximum step as `δt`.
    pub fn levy_flight_number(&self) -> f64 {
        let dt = match self.stepping {
            Stepping::Adaptive => self.control.max_dt,
            Stepping::FixedInterval { interval } => interval,
        };
        levy_flight_condition(self.moment, dt, self.half_box, self.dim)
    }
}

/// `d_H δt / (2 L_f)^{D+1}`: of order one or more when a single step near the
/// dipole can throw the particle across the whole domain.
pub fn levy_flight_condition(moment: f64, dt: f64, half_box: f64, dim: Dimension) -> f64 {
    moment * dt / (2.0 * half_box).powi(dim.get() as i32 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Wrap,
    Reset,
    Absorbed,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Wrap => "wrap",
            Event::Reset => "reset",
            Event::Absorbed => "absorbed",
        }
    }
}

/// Boundary processing of a freshly integrated position.
pub fn apply_boundary(x: Vector, config: &SimConfig) -> (Vector, Option<Event>) {
    let l = config.half_box;
    let n = config.dim.get();
    match config.boundary {
        BoundaryMode::Periodic => {
            let mut y = x;
            let mut moved = false;
            for c in &mut y.0[..n] {
                if *c < -l || *c >= l {
                    let mut w = (*c + l).rem_euclid(2.0 * l) - l;
                    if w >= l {
                        w = -l;
                    }
                    *c = w;
                    moved = true;
                }
            }
            (y, moved.then_some(Event::Wrap))
        }
        BoundaryMode::Reset | BoundaryMode::Absorbing => {
            let outside = x.components(config.dim).iter().any(|c| c.abs() > l);
            match (outside, config.boundary) {
                (false, _) => (x, None),
                (true, BoundaryMode::Reset) => (config.x0, Some(Event::Reset)),
                (true, _) => (x, Some(Event::Absorbed)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub substeps: u64,
    pub rejections: u64,
    pub forced_converged: u64,
    pub forced_exhausted: u64,
    pub forced_min_step: u64,
}

impl StepStats {
    fn record(&mut self, step: &integrator::Step) {
        self.substeps += 1;
        self.rejections += step.rejections as u64;
        match step.forced {
            Some(ForcedAcceptance::Converged) => self.forced_converged += 1,
            Some(ForcedAcceptance::Exhausted) => self.forced_exhausted += 1,
            Some(ForcedAcceptance::MinStep) => self.forced_min_step += 1,
            None => {}
        }
    }

    pub fn forced(&self) -> u64 {
        self.forced_converged + self.forced_exhausted + self.forced_min_step
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Status {
    Completed,
    Absorbed {
        step: usize,
    },
    /// The integrator failed; samples up to `step` are valid.
    Truncated {
        step: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: Dimension,
    pub times: Vec<f64>,
    pub positions: Vec<Vector>,
    /// `(sample index, event)` for every sample produced by a boundary event.
    pub events: Vec<(usize, Event)>,
    pub status: Status,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Event attached to each sample, in sample order.
    pub fn event_column(&self) -> Vec<Option<Event>> {
        let mut col = vec![None; self.len()];
        for &(i, e) in &self.events {
            col[i] = Some(e);
        }
        col
    }

    /// CSV with header `step,t,x1,...,xD,event`. Floats carry 17 significant
    /// digits so they round-trip exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim.get();
        let mut header = String::from("step,t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header},event")?;
        for (i, ((t, x), e)) in self.times.iter().zip(&self.positions).zip(self.event_column()).enumerate() {
            write!(w, "{i},{t:.16e}")?;
            for c in x.components(self.dim) {
                write!(w, ",{c:.16e}")?;
            }
            writeln!(w, ",{}", e.map_or("", Event::as_str))?;
        }
        Ok(())
    }
}

/// Position advance for one direction draw, before boundary processing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub x: Vector,
    pub t: f64,
    pub dt_used: f64,
}

/// Integrator state carried along one trajectory.
#[derive(Debug, Clone)]
pub struct Stepper {
    field: DipoleField,
    control: StepControl,
    stepping: Stepping,
    dt: f64,
    pub stats: StepStats,
}

impl Stepper {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        Ok(Stepper {
            field: config.field()?,
            control: config.control,
            stepping: config.stepping,
            dt: config.control.initial_dt,
            stats: StepStats::default(),
        })
    }

    /// Moves `x` through the field frozen at direction `d_hat`.
    pub fn step_once(&mut self, x: Vector, t: f64, d_hat: Vector) -> Result<StepOutcome, SimError> {
        let d_hat = checked_unit(d_hat.truncated(self.field.dim()))?;
        if self.field.moment() == 0.0 {
            let dt_used = match self.stepping {
                Stepping::Adaptive => self.dt,
                Stepping::FixedInterval { interval } => interval,
            };
            return Ok(StepOutcome { x, t: t + dt_used, dt_used });
        }
        match self.stepping {
            Stepping::Adaptive => {
                let (x, dt_used) = self.substep(x, t, d_hat, self.dt)?;
                Ok(StepOutcome { x, t: t + dt_used, dt_used })
            }
            Stepping::FixedInterval { interval } => {
                let mut x = x;
                let mut elapsed = 0.0;
                // Restart from the carried step size each interval, trimmed to
                // land exactly on the interval end.
                while elapsed < interval {
                    let remaining = interval - elapsed;
                    let trial = self.dt.min(remaining);
                    let (next, used) = self.substep(x, t + elapsed, d_hat, trial)?;
                    x = next;
                    elapsed = if used >= remaining { interval } else { elapsed + used };
                }
                Ok(StepOutcome { x, t: t + interval, dt_used: interval })
            }
        }
    }

    fn substep(&mut self, x: Vector, t: f64, d_hat: Vector, dt: f64) -> Result<(Vector, f64), SimError> {
        let field = self.field;
        let step = integrator::advance(|z, _| field.velocity_unchecked(z, d_hat), x, t, dt, &self.control, &FEHLBERG)?;
        self.stats.record(&step);
        self.dt = step.next_dt;
        let mut x = step.x;
        if field.cutoff() == 0.0 && x.is_zero() {
            x = d_hat * LANDING_NUDGE;
        }
        Ok((x, step.dt_used))
    }
}

/// Runs a trajectory driven by an explicit direction sequence, calling `visit`
/// with `(sample index, time, position, event)` for every sample, starting
/// with `x₀`. Returns the final status and step statistics.
pub fn run_with<I, V>(config: &SimConfig, directions: I, mut visit: V) -> Result<(Status, StepStats), SimError>
where
    I: IntoIterator<Item = Vector>,
    V: FnMut(usize, f64, Vector, Option<Event>),
{
    config.validate()?;
    let mut stepper = Stepper::new(config)?;
    let mut x = config.x0;
    let mut t = 0.0;
    visit(0, t, x, None);
    let mut directions = directions.into_iter();
    for i in 1..=config.steps {
        let Some(d_hat) = directions.next() else {
            return Ok((
                Status::Truncated { step: i - 1, reason: "direction sequence exhausted".into() },
                stepper.stats,
            ));
        };
        let out = match stepper.step_once(x, t, d_hat) {
            Ok(out) => out,
            Err(SimError::Integrator(e)) => {
                return Ok((Status::Truncated { step: i - 1, reason: e.to_string() }, stepper.stats));
            }
            Err(e) => return Err(e),
        };
        let (next, event) = apply_boundary(out.x, config);
        x = next;
        t = out.t;
        visit(i, t, x, event);
        if event == Some(Event::Absorbed) {
            return Ok((Status::Absorbed { step: i }, stepper.stats));
        }
    }
    Ok((Status::Completed, stepper.stats))
}

/// Trajectory driven by an explicit direction sequence.
pub fn simulate_with_directions<I>(config: &SimConfig, directions: I) -> Result<Trajectory, SimError>
where
    I: IntoIterator<Item = Vector>,
{
    let mut times = Vec::with_capacity(config.steps + 1);
    let mut positions = Vec::with_capacity(config.steps + 1);
    let mut events = Vec::new();
    let (status, stats) = run_with(config, directions, |i, t, x, e| {
        times.push(t);
        positions.push(x);
        if let Some(e) = e {
            events.push((i, e));
        }
    })?;
    Ok(Trajectory { dim: config.dim, times, positions, events, status, stats })
}

/// Direction stream of trial `trial`.
pub fn directions(config: &SimConfig, trial: u64) -> impl Iterator<Item = Vector> {
    let mut sampler = DirectionSampler::for_trial(config.dim, config.seed, trial);
    std::iter::repeat_with(move || sampler.sample_direction())
}

/// Trajectory of trial `trial` of the ensemble described by `config`.
pub fn simulate_trajectory(config: &SimConfig, trial: u64) -> Result<Trajectory, SimError> {
    simulate_with_directions(config, directions(config, trial))
}
