//! Small fixed-size vector type shared by the field, integrator and simulator.
//!
//! Positions are always stored with three components. Two-dimensional runs keep
//! the third component at zero, so norms and dot products need no branching on
//! the dimension.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Spatial dimension of a run. Only the plane and ordinary space are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn get(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.get() as f64
    }

    /// `r^D`, the denominator power of the dipole field.
    #[inline]
    pub fn pow(self, r: f64) -> f64 {
        match self {
            Dimension::Two => r * r,
            Dimension::Three => r * r * r,
        }
    }

    /// Surface area of the unit sphere `S^{D-1}`: 2π in the plane, 4π in space.
    pub fn unit_sphere_area(self) -> f64 {
        match self {
            Dimension::Two => 2.0 * std::f64::consts::PI,
            Dimension::Three => 4.0 * std::f64::consts::PI,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            other => Err(format!("dimension must be 2 or 3, got {other}")),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.get() as u8
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.get())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector(pub [f64; 3]);

impl Vector {
    pub const ZERO: Vector = Vector([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector([x, y, z])
    }

    pub const fn planar(x: f64, y: f64) -> Self {
        Vector([x, y, 0.0])
    }

    /// Builds a vector from a slice of at most three components.
    pub fn from_slice(c: &[f64]) -> Option<Self> {
        if c.len() > 3 {
            return None;
        }
        let mut v = [0.0; 3];
        v[..c.len()].copy_from_slice(c);
        Some(Vector(v))
    }

    /// Unit vector along coordinate axis `axis`.
    pub fn axis(axis: usize) -> Self {
        let mut v = [0.0; 3];
        v[axis] = 1.0;
        Vector(v)
    }

    #[inline]
    pub fn dot(self, other: Vector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(self) -> bool {
        self.0 == [0.0; 3]
    }

    /// Components that belong to a space of dimension `dim`.
    pub fn components(&self, dim: Dimension) -> &[f64] {
        &self.0[..dim.get()]
    }

    /// Copy with every component beyond `dim` zeroed.
    pub fn truncated(self, dim: Dimension) -> Self {
        let mut v = self;
        for c in v.0.iter_mut().skip(dim.get()) {
            *c = 0.0;
        }
        v
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vector {
    type Output = Vector;

    #[inline]
    fn add(self, o: Vector) -> Vector {
        Vector([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, o: Vector) {
        self.0[0] += o.0[0];
        self.0[1] += o.0[1];
        self.0[2] += o.0[2];
    }
}

impl Sub for Vector {
    type Output = Vector;

    #[inline]
    fn sub(self, o: Vector) -> Vector {
        Vector([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;

    #[inline]
    fn mul(self, s: f64) -> Vector {
        Vector([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;

    #[inline]
    fn mul(self, v: Vector) -> Vector {
        v * self
    }
}

impl Neg for Vector {
    type Output = Vector;

    #[inline]
    fn neg(self) -> Vector {
        Vector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_round_trips_through_u8() {
        assert_eq!(Dimension::try_from(2).unwrap(), Dimension::Two);
        assert_eq!(u8::from(Dimension::Three), 3);
        assert!(Dimension::try_from(4).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(Dimension::Two.unit_sphere_area(), 2.0 * std::f64::consts::PI);
        assert_eq!(Dimension::Three.unit_sphere_area(), 4.0 * std::f64::consts::PI);
    }

    #[test]
    fn from_slice_pads_with_zeros() {
        assert_eq!(Vector::from_slice(&[1.0, 2.0]), Some(Vector::new(1.0, 2.0, 0.0)));
        assert_eq!(Vector::from_slice(&[1.0, 2.0, 3.0, 4.0]), None);
    }
}
