//! Box-counting dimension on dyadic grids over `[−L, L]^D`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::regression::linear_fit;
use super::AnalysisError;
use crate::vector::{Dimension, Vector};

/// Estimates with `R²` at or below this value are gated out.
pub const R_SQUARED_GATE: f64 = 0.8;

/// Which grid levels enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScaleSelection {
    /// Every level `k = 0..=depth`.
    All,
    /// Levels up to the last one whose count is at most `max_fraction` of the
    /// number of points; finer grids only resolve individual samples.
    SampleLimited { max_fraction: f64 },
    /// Levels whose cell edge is at least `finest_edge`.
    Resolution { finest_edge: f64 },
    /// Levels neither saturated (`n_k > max_occupancy · 2^{kD}`) nor sparse
    /// (`n_k < min_count`).
    Occupancy { max_occupancy: f64, min_count: u64 },
}

impl Default for ScaleSelection {
    fn default() -> Self {
        ScaleSelection::SampleLimited { max_fraction: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionFit {
    pub df: f64,
    pub r_squared: f64,
    pub stderr: f64,
}

impl DimensionFit {
    pub fn passes_gate(&self) -> bool {
        self.r_squared > R_SQUARED_GATE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountResult {
    pub dim: Dimension,
    pub half_box: f64,
    pub n_points: usize,
    /// Cell edge `2L/2^k` of level `k`.
    pub edges: Vec<f64>,
    /// Occupied cells per level.
    pub counts: Vec<u64>,
    /// Levels used by the regression.
    pub retained: Vec<usize>,
    pub fit: Option<DimensionFit>,
}

impl BoxCountResult {
    pub fn depth(&self) -> usize {
        self.counts.len() - 1
    }

    /// Fitted dimension if the `R²` gate is passed.
    pub fn dimension(&self) -> Option<f64> {
        self.fit.filter(DimensionFit::passes_gate).map(|f| f.df)
    }

    /// CSV `scale,count`, one row per level.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "scale,count")?;
        for (e, n) in self.edges.iter().zip(&self.counts) {
            writeln!(w, "{e:.16e},{n}")?;
        }
        Ok(())
    }
}

/// Default grid depth: 10 levels in the plane, 8 in space.
pub fn default_depth(dim: Dimension) -> usize {
    match dim {
        Dimension::Two => 10,
        Dimension::Three => 8,
    }
}

/// Largest depth whose interleaved cell keys fit in 64 bits.
pub fn max_depth(dim: Dimension) -> usize {
    63 / dim.get()
}

/// Occupied-cell counts for `k = 0..=depth`.
///
/// Cells are half-open except on the upper face of the domain, which belongs
/// to the last cell. Points are located once at the finest level; their cell
/// coordinates are bit-interleaved so that coarser cells are key prefixes and
/// every level is counted from one sorted key list.
pub fn box_count(
    points: &[Vector],
    dim: Dimension,
    half_box: f64,
    depth: usize,
) -> Result<BoxCountResult, AnalysisError> {
    if !(half_box > 0.0 && half_box.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("half_box must be positive, got {half_box}")));
    }
    if depth < 3 || depth > max_depth(dim) {
        return Err(AnalysisError::InvalidInput(format!(
            "depth must be in 3..={} for dimension {dim}, got {depth}",
            max_depth(dim)
        )));
    }
    if points.is_empty() {
        return Err(AnalysisError::InvalidInput("no points to count".into()));
    }
    let n = dim.get();
    let cells = 1u64 << depth;
    let fine_edge = 2.0 * half_box / cells as f64;
    let mut keys = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let mut key = 0u64;
        for axis in 0..n {
            let c = p[axis];
            if !(c >= -half_box && c <= half_box) {
                return Err(AnalysisError::PointOutside { index, position: p.0 });
            }
            let cell = (((c + half_box) / fine_edge) as u64).min(cells - 1);
            key |= spread(cell, n) << axis;
        }
        keys.push(key);
    }
    keys.sort_unstable();
    keys.dedup();

    let mut counts = vec![0u64; depth + 1];
    for (k, count) in counts.iter_mut().enumerate() {
        let shift = (n * (depth - k)) as u32;
        let mut last = None;
        for &key in &keys {
            let parent = key.checked_shr(shift).unwrap_or(0);
            if last != Some(parent) {
                *count += 1;
                last = Some(parent);
            }
        }
    }
    let edges = (0..=depth).map(|k| 2.0 * half_box / (1u64 << k) as f64).collect();
    Ok(BoxCountResult { dim, half_box, n_points: points.len(), edges, counts, retained: Vec::new(), fit: None })
}

/// Spreads the bits of `v` so that bit `b` lands at position `b·stride`.
fn spread(v: u64, stride: usize) -> u64 {
    let mut out = 0u64;
    let mut b = 0;
    let mut v = v;
    while v != 0 {
        out |= (v & 1) << (b * stride);
        v >>= 1;
        b += 1;
    }
    out
}

/// Levels kept by `selection`.
pub fn select_scales(result: &BoxCountResult, selection: ScaleSelection) -> Vec<usize> {
    let levels = 0..=result.depth();
    match selection {
        ScaleSelection::All => levels.collect(),
        ScaleSelection::SampleLimited { max_fraction } => {
            let limit = max_fraction * result.n_points as f64;
            levels.take_while(|&k| result.counts[k] as f64 <= limit).collect()
        }
        ScaleSelection::Resolution { finest_edge } => levels.filter(|&k| result.edges[k] >= finest_edge).collect(),
        ScaleSelection::Occupancy { max_occupancy, min_count } => levels
            .filter(|&k| {
                let n = result.counts[k];
                let grid = 2f64.powi((k * result.dim.get()) as i32);
                n >= min_count && (n as f64) <= max_occupancy * grid
            })
            .collect(),
    }
}

/// Slope of `ln n_k` against `ln(1/δL_k)` over the selected levels.
///
/// Fewer than three usable levels is an error; a fit with `R² ≤ 0.8` is
/// returned but fails [`DimensionFit::passes_gate`].
pub fn regress_dimension(
    mut result: BoxCountResult,
    selection: ScaleSelection,
) -> Result<BoxCountResult, AnalysisError> {
    let retained = select_scales(&result, selection);
    if retained.len() < 3 {
        return Err(AnalysisError::InsufficientScales { retained: retained.len() });
    }
    let xs: Vec<f64> = retained.iter().map(|&k| (1.0 / result.edges[k]).ln()).collect();
    let ys: Vec<f64> = retained.iter().map(|&k| (result.counts[k] as f64).ln()).collect();
    let fit = linear_fit(&xs, &ys).ok_or(AnalysisError::InsufficientScales { retained: retained.len() })?;
    result.retained = retained;
    result.fit = Some(DimensionFit { df: fit.slope, r_squared: fit.r_squared, stderr: fit.slope_stderr });
    Ok(result)
}

/// Box count followed by regression.
pub fn estimate_dimension(
    points: &[Vector],
    dim: Dimension,
    half_box: f64,
    depth: usize,
    selection: ScaleSelection,
) -> Result<BoxCountResult, AnalysisError> {
    regress_dimension(box_count(points, dim, half_box, depth)?, selection)
}
