//! Embedded Runge–Kutta–Fehlberg 4(5) stepping with error-per-unit-step control.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::Vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("non-finite velocity at stage {stage}, position {position:?}")]
    NonFiniteStage { stage: usize, position: [f64; 3] },
    #[error("step size collapsed: next step {next_dt:e} is below the minimum")]
    StepCollapse { next_dt: f64 },
    #[error("integration stalled at {position:?} with step {dt:e}")]
    Stalled { position: [f64; 3], dt: f64 },
    #[error("invalid step control: {0}")]
    InvalidControl(String),
}

/// A rational tableau entry `num/den`.
pub type Ratio = (i64, i64);

const fn q(r: Ratio) -> f64 {
    r.0 as f64 / r.1 as f64
}

/// Fehlberg's coefficients as exact rationals.
pub mod rational {
    use super::Ratio;

    pub const C: [Ratio; 6] = [(0, 1), (1, 4), (3, 8), (12, 13), (1, 1), (1, 2)];

    pub const A: [[Ratio; 5]; 6] = [
        [(0, 1); 5],
        [(1, 4), (0, 1), (0, 1), (0, 1), (0, 1)],
        [(3, 32), (9, 32), (0, 1), (0, 1), (0, 1)],
        [(1932, 2197), (-7200, 2197), (7296, 2197), (0, 1), (0, 1)],
        [(439, 216), (-8, 1), (3680, 513), (-845, 4104), (0, 1)],
        [(-8, 27), (2, 1), (-3544, 2565), (1859, 4104), (-11, 40)],
    ];

    pub const B4: [Ratio; 6] = [(25, 216), (0, 1), (1408, 2565), (2197, 4104), (-1, 5), (0, 1)];

    pub const B5: [Ratio; 6] = [(16, 135), (0, 1), (6656, 12825), (28561, 56430), (-9, 50), (2, 55)];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkfTableau {
    pub c: [f64; 6],
    pub a: [[f64; 5]; 6],
    /// Fourth-order weights; this solution is propagated.
    pub b4: [f64; 6],
    /// Fifth-order weights; used only for the error estimate.
    pub b5: [f64; 6],
}

const fn row5(r: [Ratio; 5]) -> [f64; 5] {
    [q(r[0]), q(r[1]), q(r[2]), q(r[3]), q(r[4])]
}

const fn row6(r: [Ratio; 6]) -> [f64; 6] {
    [q(r[0]), q(r[1]), q(r[2]), q(r[3]), q(r[4]), q(r[5])]
}

pub const FEHLBERG: RkfTableau = RkfTableau {
    c: row6(rational::C),
    a: [
        row5(rational::A[0]),
        row5(rational::A[1]),
        row5(rational::A[2]),
        row5(rational::A[3]),
        row5(rational::A[4]),
        row5(rational::A[5]),
    ],
    b4: row6(rational::B4),
    b5: row6(rational::B5),
};

/// Error control parameters.
///
/// A step of size `Δt` with local error `LE = |x5 − x4|` is accepted when
/// `LE < ε·Δt`; the next step is `safety·Δt·(ε/LE)^exponent`, clamped to
/// `[min_dt, max_dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControl {
    pub tolerance: f64,
    pub initial_dt: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    pub safety: f64,
    pub exponent: f64,
    /// Consecutive rejections allowed before a step is forced through.
    pub max_rejections: u32,
    /// Relative change of the proposed step below which the controller is
    /// considered converged and the current attempt is kept.
    pub fixed_point_tol: f64,
    /// Fail instead of forcing a step through when control cannot be met.
    pub strict: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            tolerance: 1e-4,
            initial_dt: 0.01,
            min_dt: 1e-12,
            max_dt: 0.01,
            safety: 0.8,
            exponent: 0.2,
            max_rejections: 50,
            fixed_point_tol: 0.05,
            strict: false,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidControl(m.to_string()));
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.min_dt > 0.0 && self.min_dt <= self.initial_dt && self.initial_dt <= self.max_dt)
            || !self.max_dt.is_finite()
        {
            return bad("need 0 < min_dt <= initial_dt <= max_dt");
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return bad("safety factor must lie in (0, 1]");
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return bad("exponent must be positive");
        }
        if self.fixed_point_tol.is_nan() || self.fixed_point_tol < 0.0 {
            return bad("fixed_point_tol must be non-negative");
        }
        Ok(())
    }

    /// Unclamped proposal for the next step size.
    fn proposal(&self, dt: f64, local_error: f64) -> f64 {
        self.safety * dt * (self.tolerance / local_error.max(1e-300)).powf(self.exponent)
    }
}

/// One embedded step. Returns `(x4, x5)` built from the same six stages.
pub fn rkf_step<F>(
    mut field: F,
    x: Vector,
    t: f64,
    dt: f64,
    tableau: &RkfTableau,
) -> Result<(Vector, Vector), IntegratorError>
where
    F: FnMut(Vector, f64) -> Vector,
{
    let mut k = [Vector::ZERO; 6];
    for s in 0..6 {
        let mut z = x;
        for j in 0..s {
            z += k[j] * (dt * tableau.a[s][j]);
        }
        let v = field(z, t + tableau.c[s] * dt);
        if !v.is_finite() {
            return Err(IntegratorError::NonFiniteStage { stage: s, position: z.0 });
        }
        k[s] = v;
    }
    let mut x4 = x;
    let mut x5 = x;
    for s in 0..6 {
        x4 += k[s] * (dt * tableau.b4[s]);
        x5 += k[s] * (dt * tableau.b5[s]);
    }
    Ok((x4, x5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptation {
    pub accepted: bool,
    pub next_dt: f64,
}

/// Accept/reject decision and next step size for a step of size `dt`.
pub fn adapt_dt(dt: f64, local_error: f64, control: &StepControl) -> Result<Adaptation, IntegratorError> {
    let raw = control.proposal(dt, local_error);
    if raw < control.min_dt {
        return Err(IntegratorError::StepCollapse { next_dt: raw });
    }
    Ok(Adaptation { accepted: local_error < control.tolerance * dt, next_dt: raw.min(control.max_dt) })
}

/// Why a step was kept although its error exceeded `ε·Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedAcceptance {
    /// The step-size update reached its fixed point; further rejections would
    /// retry essentially the same step.
    Converged,
    /// The rejection budget was exhausted.
    Exhausted,
    /// The step size is pinned at `min_dt`.
    MinStep,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub x: Vector,
    pub dt_used: f64,
    pub next_dt: f64,
    pub local_error: f64,
    pub rejections: u32,
    pub forced: Option<ForcedAcceptance>,
}

/// Takes one accepted step starting from a trial size `dt`, rejecting and
/// shrinking as needed.
///
/// When a stage lands on a singularity the step is cut tenfold and retried.
/// Unless `control.strict` is set, a step that cannot meet `LE < ε·Δt` is
/// forced through once the controller has converged, run out of rejections or
/// reached `min_dt`; the reason is reported in [`Step::forced`].
pub fn advance<F>(
    mut field: F,
    x: Vector,
    t: f64,
    dt: f64,
    control: &StepControl,
    tableau: &RkfTableau,
) -> Result<Step, IntegratorError>
where
    F: FnMut(Vector, f64) -> Vector,
{
    let mut dt = dt.clamp(control.min_dt, control.max_dt);
    let mut rejections = 0u32;
    loop {
        let (x4, x5) = match rkf_step(&mut field, x, t, dt, tableau) {
            Ok(pair) => pair,
            Err(err) => {
                if dt <= control.min_dt || rejections >= control.max_rejections {
                    return Err(match err {
                        IntegratorError::NonFiniteStage { .. } => err,
                        _ => IntegratorError::Stalled { position: x.0, dt },
                    });
                }
                dt = (dt * 0.1).max(control.min_dt);
                rejections += 1;
                continue;
            }
        };
        let local_error = (x5 - x4).norm();
        let raw = control.proposal(dt, local_error);
        let next_dt = raw.clamp(control.min_dt, control.max_dt);
        let step = |forced| Step { x: x4, dt_used: dt, next_dt, local_error, rejections, forced };
        if local_error < control.tolerance * dt {
            return Ok(step(None));
        }
        if control.strict {
            if raw < control.min_dt {
                return Err(IntegratorError::StepCollapse { next_dt: raw });
            }
            if rejections >= control.max_rejections {
                return Err(IntegratorError::Stalled { position: x.0, dt });
            }
        } else {
            let forced = if dt <= control.min_dt {
                Some(ForcedAcceptance::MinStep)
            } else if (next_dt / dt - 1.0).abs() < control.fixed_point_tol {
                Some(ForcedAcceptance::Converged)
            } else if rejections >= control.max_rejections {
                Some(ForcedAcceptance::Exhausted)
            } else {
                None
            };
            if forced.is_some() {
                return Ok(step(forced));
            }
        }
        dt = next_dt;
        rejections += 1;
    }
}
