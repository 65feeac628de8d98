//! Potential-flow velocity fields: point sources through the Laplacian Green's
//! function, and the dipole (doublet) limit that drives the simulations.

use thiserror::Error;

use crate::vector::{Dimension, Vector};

/// Directions closer than this to unit length are accepted as is.
pub const UNIT_TOLERANCE: f64 = 1e-12;
/// Directions within this distance of unit length are renormalized; beyond it
/// they are rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field is singular at {position:?}")]
    Singular { position: [f64; 3] },
    #[error("direction has norm {norm}, expected a unit vector")]
    NotUnit { norm: f64 },
    #[error("invalid field parameter: {0}")]
    InvalidParameter(String),
    #[error("source set is empty")]
    NoSources,
}

/// Velocity field of a single dipole of fixed magnitude at the origin, with an
/// optional radial cutoff `Δr` that softens the `1/r^D` singularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleField {
    dim: Dimension,
    moment: f64,
    cutoff: f64,
}

impl DipoleField {
    /// `moment` is the coefficient `d_H` that multiplies `1/(r+Δr)^D`. A zero
    /// moment is allowed and yields the still field.
    pub fn new(dim: Dimension, moment: f64, cutoff: f64) -> Result<Self, FieldError> {
        if !(moment.is_finite() && moment >= 0.0) {
            return Err(FieldError::InvalidParameter(format!(
                "dipole moment must be finite and non-negative, got {moment}"
            )));
        }
        if !(cutoff.is_finite() && cutoff >= 0.0) {
            return Err(FieldError::InvalidParameter(format!("cutoff must be finite and non-negative, got {cutoff}")));
        }
        Ok(DipoleField { dim, moment, cutoff })
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `d_H / (r+Δr)^D · (d̂ − D x̂ (x̂·d̂))`.
    ///
    /// `d_hat` must be a unit vector; tiny deviations (below 1e-6) are
    /// renormalized. At the origin the field is singular unless a cutoff is
    /// set, in which case `x̂` is taken as zero and only the `d̂` term remains.
    pub fn velocity(&self, x: Vector, d_hat: Vector) -> Result<Vector, FieldError> {
        let d_hat = checked_unit(d_hat.truncated(self.dim))?;
        let x = x.truncated(self.dim);
        if x.is_zero() && self.cutoff == 0.0 {
            return Err(FieldError::Singular { position: x.0 });
        }
        Ok(self.velocity_unchecked(x, d_hat))
    }

    /// Hot-path evaluation: no unit check, no singularity check. At `r = 0`
    /// without cutoff the result is non-finite, which the integrator reports as
    /// a failed stage.
    #[inline]
    pub fn velocity_unchecked(&self, x: Vector, d_hat: Vector) -> Vector {
        let r = x.norm();
        let scale = self.moment / self.dim.pow(r + self.cutoff);
        if r == 0.0 {
            if self.cutoff > 0.0 {
                return d_hat * scale;
            }
            return Vector([f64::NAN; 3]);
        }
        let x_hat = x * (1.0 / r);
        let along = self.dim.as_f64() * x_hat.dot(d_hat);
        (d_hat - x_hat * along) * scale
    }

    /// Signed central-difference divergence of the field at `x` with stencil
    /// half-width `h`.
    ///
    /// The field is linear in `d̂`, so the divergence for any direction is a
    /// combination of the divergences for the coordinate axes. The axis value
    /// of largest magnitude is returned.
    pub fn divergence_check(&self, x: Vector, h: f64) -> Result<f64, FieldError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(FieldError::InvalidParameter(format!("stencil width must be positive, got {h}")));
        }
        let x = x.truncated(self.dim);
        let n = self.dim.get();
        let mut worst = 0.0_f64;
        for axis in 0..n {
            let d_hat = Vector::axis(axis);
            let mut div = 0.0;
            for i in 0..n {
                let e = Vector::axis(i) * h;
                let plus = self.velocity(x + e, d_hat)?;
                let minus = self.velocity(x - e, d_hat)?;
                div += (plus[i] - minus[i]) / (2.0 * h);
            }
            if div.abs() > worst.abs() {
                worst = div;
            }
        }
        Ok(worst)
    }
}

/// Accepts unit vectors, renormalizes near-unit ones and rejects the rest.
pub fn checked_unit(d: Vector) -> Result<Vector, FieldError> {
    let norm = d.norm();
    let gap = (norm - 1.0).abs();
    if gap <= UNIT_TOLERANCE {
        Ok(d)
    } else if gap <= RENORMALIZE_TOLERANCE {
        Ok(d * (1.0 / norm))
    } else {
        Err(FieldError::NotUnit { norm })
    }
}

/// A point source of volume flux `charge` located at `location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Source {
    pub location: Vector,
    pub charge: f64,
}

/// Non-empty collection of point sources in a space of fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    dim: Dimension,
    sources: Vec<Source>,
}

impl SourceSet {
    pub fn new(dim: Dimension, sources: Vec<Source>) -> Result<Self, FieldError> {
        if sources.is_empty() {
            return Err(FieldError::NoSources);
        }
        for s in &sources {
            if !s.location.is_finite() || !s.charge.is_finite() {
                return Err(FieldError::InvalidParameter(format!(
                    "source must have finite location and charge: {s:?}"
                )));
            }
        }
        let sources = sources.into_iter().map(|s| Source { location: s.location.truncated(dim), ..s }).collect();
        Ok(SourceSet { dim, sources })
    }

    /// Sink of charge `−q` at `+offset` and source `+q` at `−offset`.
    ///
    /// As `|offset| → 0` with `2 q |offset| / S_{D-1}` held fixed this tends to
    /// the dipole field with that moment along `offset`.
    pub fn antipodal_pair(dim: Dimension, offset: Vector, charge: f64) -> Result<Self, FieldError> {
        SourceSet::new(dim, vec![Source { location: offset, charge: -charge }, Source { location: -offset, charge }])
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    /// `Σ Q_i ∇G(x − ζ_i)` with the free-space Green's function of the
    /// Laplacian, whose gradient is `(x−ζ) / (S_{D-1} |x−ζ|^D)` in both 2D
    /// (`G = ln r / 2π`) and 3D (`G = −1/(4π r)`).
    pub fn velocity(&self, x: Vector) -> Result<Vector, FieldError> {
        let x = x.truncated(self.dim);
        let area = self.dim.unit_sphere_area();
        let mut v = Vector::ZERO;
        for s in &self.sources {
            let rel = x - s.location;
            let r = rel.norm();
            if r == 0.0 {
                return Err(FieldError::Singular { position: x.0 });
            }
            v += rel * (s.charge / (area * self.dim.pow(r)));
        }
        Ok(v)
    }
}
