//! Viscous energy dissipation outside a sphere of radius `r` around the dipole.
//!
//! The squared strain rate of the dipole field at distance `ρ`, with
//! `c = x̂·d̂`, is
//!
//! ```text
//! Σ_{αβ} (∂_α V_β + ∂_β V_α)² = 4 D² d_H² (2 + (D+1)(D−2) c²) / ρ^{2(D+1)}
//! ```
//!
//! Averaging over directions with `⟨c²⟩ = 1/2` and integrating over
//! `ρ > r` gives `ε_r = (ν/2) L_f^{−D} ∫ dᴰx Σ(…)²`, evaluated here both in
//! closed form and by quadrature.

use std::f64::consts::PI;

use super::AnalysisError;
use crate::vector::Dimension;

/// Mean of `(x̂·d̂)²` over dipole orientations used in the average.
pub const MEAN_COS_SQUARED: f64 = 0.5;

const R_MAX_FACTOR: f64 = 1e6;
const QUAD_RTOL: f64 = 1e-8;
const QUAD_MAX_DEPTH: u32 = 48;

fn check(nu: f64, moment: f64, half_box: f64, r: f64) -> Result<(), AnalysisError> {
    let ok = |v: f64| v.is_finite() && v >= 0.0;
    if !(ok(nu) && ok(moment) && half_box > 0.0 && half_box.is_finite() && r > 0.0 && r.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!(
            "need ν, d_H ≥ 0 and L_f, r > 0; got ν={nu}, d_H={moment}, L_f={half_box}, r={r}"
        )));
    }
    Ok(())
}

/// `Σ_{αβ} (∂_α V_β + ∂_β V_α)²` at distance `rho` for `c² = cos_squared`.
pub fn strain_rate_squared(dim: Dimension, moment: f64, rho: f64, cos_squared: f64) -> f64 {
    let d = dim.as_f64();
    let angular = 2.0 + (d + 1.0) * (d - 2.0) * cos_squared;
    4.0 * d * d * moment * moment * angular / rho.powi(2 * (dim.get() as i32 + 1))
}

/// Closed form: `8π ν d_H² / (L_f² r⁴)` in 2D and
/// `(288π/5) ν d_H² / (L_f³ r⁵)` in 3D.
pub fn dissipation_closed_form(
    nu: f64,
    moment: f64,
    half_box: f64,
    r: f64,
    dim: Dimension,
) -> Result<f64, AnalysisError> {
    check(nu, moment, half_box, r)?;
    let base = nu * moment * moment;
    Ok(match dim {
        Dimension::Two => 8.0 * PI * base / (half_box.powi(2) * r.powi(4)),
        Dimension::Three => 288.0 * PI / 5.0 * base / (half_box.powi(3) * r.powi(5)),
    })
}

/// The same quantity by adaptive Simpson quadrature in `ln ρ` from `r` to
/// `10⁶ r`.
pub fn dissipation_numeric(nu: f64, moment: f64, half_box: f64, r: f64, dim: Dimension) -> Result<f64, AnalysisError> {
    check(nu, moment, half_box, r)?;
    let area = dim.unit_sphere_area();
    let d = dim.get() as i32;
    // dᴰx = S ρ^{D−1} dρ = S ρ^D d(ln ρ)
    let integrand = |u: f64| {
        let rho = r * u.exp();
        area * rho.powi(d) * strain_rate_squared(dim, moment, rho, MEAN_COS_SQUARED)
    };
    let integral = adaptive_simpson(integrand, 0.0, R_MAX_FACTOR.ln(), QUAD_RTOL)?;
    Ok(0.5 * nu * integral / half_box.powi(d))
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rtol: f64) -> Result<f64, AnalysisError> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    if whole == 0.0 {
        return Ok(0.0);
    }
    // Absolute target from a coarse magnitude estimate.
    let tol = rtol * whole.abs().max(f64::MIN_POSITIVE);
    recurse(&f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, AnalysisError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || !delta.is_finite() {
        return Err(AnalysisError::Quadrature { interval: (a, b), estimate: left + right });
    }
    Ok(recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
