//! Step-length statistics and Lévy-type tail fits.
//!
//! The fitted density is
//!
//! ```text
//! p(x) = A · exp(−σ / (2(x − μ))) / (x − μ)^{1+α},   x > μ
//! ```
//!
//! which behaves as `(x − μ)^{−(1+α)}` far out in the tail and is cut off
//! smoothly below `μ + σ`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::regression::weighted_least_squares;
use super::AnalysisError;
use crate::simulator::{BoundaryMode, Event, SimConfig, Trajectory};

/// Tail exponents above this are not treated as Lévy-like.
pub const LEVY_ALPHA_LIMIT: f64 = 5.0;
/// Fewest non-empty bins a fit will accept.
pub const MIN_FIT_BINS: usize = 10;

/// Per-step displacement magnitudes.
///
/// Periodic runs use the minimum-image displacement, so wraps do not count as
/// jumps across the box. Steps that end in a reset are skipped: the jump back
/// to `x₀` is part of the protocol, not particle motion.
pub fn step_lengths(traj: &Trajectory, boundary: BoundaryMode, half_box: f64) -> Vec<f64> {
    let events = traj.event_column();
    let period = 2.0 * half_box;
    let n = traj.dim.get();
    traj.positions
        .windows(2)
        .zip(&events[1..])
        .filter(|(_, e)| **e != Some(Event::Reset))
        .map(|(w, _)| {
            let mut d = w[1] - w[0];
            if boundary == BoundaryMode::Periodic {
                for c in &mut d.0[..n] {
                    *c -= period * (*c / period).round();
                }
            }
            d.norm()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin boundaries, logarithmically spaced; `edges.len() = counts.len() + 1`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Counts divided by bin width and by the number of positive samples.
    pub density: Vec<f64>,
    /// Samples that were exactly zero and therefore not binned.
    pub zero_count: u64,
}

impl Histogram {
    /// Log-spaced histogram of the positive samples over `[min, max]`.
    pub fn log_binned(samples: &[f64], bins: usize) -> Result<Histogram, AnalysisError> {
        if bins == 0 {
            return Err(AnalysisError::InvalidInput("need at least one bin".into()));
        }
        if samples.is_empty() {
            return Err(AnalysisError::InvalidInput("no samples".into()));
        }
        if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(AnalysisError::InvalidInput(format!("sample {bad} is not a finite length")));
        }
        let positive: Vec<f64> = samples.iter().copied().filter(|&v| v > 0.0).collect();
        let zero_count = (samples.len() - positive.len()) as u64;
        let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = positive.iter().copied().fold(0.0, f64::max);
        if positive.is_empty() || lo == hi {
            return Err(AnalysisError::Degenerate(format!(
                "{} zero and {} positive samples spanning no range",
                zero_count,
                positive.len()
            )));
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        let width = (lhi - llo) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| (llo + width * i as f64).exp()).collect();
        edges[0] = lo;
        edges[bins] = hi;
        let mut counts = vec![0u64; bins];
        for v in &positive {
            let i = (((v.ln() - llo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let total = positive.len() as f64;
        let density = counts.iter().zip(edges.windows(2)).map(|(&c, e)| c as f64 / (total * (e[1] - e[0]))).collect();
        Ok(Histogram { edges, counts, density, zero_count })
    }

    /// Geometric bin centres.
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| (e[0] * e[1]).sqrt()).collect()
    }

    /// `Σ density · width`; one up to rounding.
    pub fn integral(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }

    /// Index of the bin containing `x`, if any.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.edges[0] || x > *self.edges.last()? {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x).saturating_sub(1).min(self.counts.len() - 1))
    }

    /// CSV `bin_center,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_center,density")?;
        for (c, d) in self.centers().iter().zip(&self.density) {
            writeln!(w, "{c:.16e},{d:.16e}")?;
        }
        Ok(())
    }
}

/// Histogram of a trajectory's step lengths.
pub fn step_length_histogram(traj: &Trajectory, config: &SimConfig, bins: usize) -> Result<Histogram, AnalysisError> {
    if traj.len() < 2 {
        return Err(AnalysisError::InvalidInput("trajectory has no steps".into()));
    }
    Histogram::log_binned(&step_lengths(traj, config.boundary, config.half_box), bins)
}

/// Ratio between the empirical density at the 99th percentile and the density
/// a Gaussian matched to the bulk (median and interquartile range) predicts
/// there. Large values signal a heavy tail.
pub fn heavy_tail_ratio(samples: &[f64], hist: &Histogram) -> Result<f64, AnalysisError> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|&v| v > 0.0).collect();
    if sorted.len() < 4 {
        return Err(AnalysisError::Degenerate("too few positive samples".into()));
    }
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
    let median = q(0.5);
    let sd = (q(0.75) - q(0.25)) / 1.348_979_5;
    let x99 = q(0.99);
    let bin = hist.bin_of(x99).ok_or_else(|| AnalysisError::Degenerate("99th percentile outside histogram".into()))?;
    if sd <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let z = (x99 - median) / sd;
    let gauss = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    Ok(hist.density[bin] / gauss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyFit {
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    /// `ln A`.
    pub log_amplitude: f64,
    /// Smallest and largest bin centre used.
    pub fit_range: (f64, f64),
    /// Count-weighted `R²` of the log-density fit.
    pub goodness: f64,
    pub bins_used: usize,
}

impl LevyFit {
    pub fn is_levy(&self) -> bool {
        self.alpha > 0.0 && self.alpha <= LEVY_ALPHA_LIMIT
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let u = x - self.mu;
        self.log_amplitude - self.sigma / (2.0 * u) - (1.0 + self.alpha) * u.ln()
    }

    /// JSON summary `{alpha, mu, sigma, goodness}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha": self.alpha,
            "mu": self.mu,
            "sigma": self.sigma,
            "goodness": self.goodness,
            "fit_range": [self.fit_range.0, self.fit_range.1],
            "bins_used": self.bins_used,
        })
    }
}

struct Candidate {
    mu: f64,
    log_amplitude: f64,
    sigma: f64,
    beta: f64,
    rss: f64,
}

/// Weighted log-space fit for a fixed location `mu`. `σ` is constrained to be
/// non-negative.
fn fit_at(mu: f64, xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<Candidate> {
    let u: Vec<f64> = xs.iter().map(|x| x - mu).collect();
    if u.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let rows: Vec<[f64; 3]> = u.iter().map(|&v| [1.0, -0.5 / v, -v.ln()]).collect();
    let (c, sigma, beta) = match weighted_least_squares(&rows, ys, ws) {
        Some([c, s, b]) if s >= 0.0 => (c, s, b),
        _ => {
            let rows: Vec<[f64; 2]> = u.iter().map(|&v| [1.0, -v.ln()]).collect();
            let [c, b] = weighted_least_squares(&rows, ys, ws)?;
            (c, 0.0, b)
        }
    };
    let rss = u
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((&v, &y), &w)| {
            let r = y - (c - sigma / (2.0 * v) - beta * v.ln());
            w * r * r
        })
        .sum();
    Some(Candidate { mu, log_amplitude: c, sigma, beta, rss })
}

fn search_location(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<Candidate> {
    let first = xs[0];
    let last = *xs.last()?;
    // Offsets g = first − μ, log-spaced from just below the first bin to far
    // below it, then refined by golden-section search around the best point.
    let (g_lo, g_hi) = (1e-4 * first, 10.0 * last);
    let n = 240;
    let offset = |i: f64| g_lo * (g_hi / g_lo).powf(i / n as f64);
    let eval = |i: f64| fit_at(first - offset(i), xs, ys, ws);
    let mut best_i = None;
    let mut best_rss = f64::INFINITY;
    for i in 0..=n {
        if let Some(c) = eval(i as f64) {
            if c.rss < best_rss {
                best_rss = c.rss;
                best_i = Some(i);
            }
        }
    }
    let bi = best_i? as f64;
    let (mut a, mut b) = ((bi - 1.0).max(0.0), (bi + 1.0).min(n as f64));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let rss = |i: f64| eval(i).map_or(f64::INFINITY, |c| c.rss);
    for _ in 0..60 {
        let m1 = b - phi * (b - a);
        let m2 = a + phi * (b - a);
        if rss(m1) <= rss(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let refined = eval(0.5 * (a + b))?;
    let coarse = eval(bi)?;
    Some(if refined.rss <= coarse.rss { refined } else { coarse })
}

/// Fits the Lévy form to the non-empty bins of `hist`.
///
/// For each trial location the problem is linear in `(ln A, σ, 1+α)` and is
/// solved by count-weighted least squares on `ln p`; the location is then
/// chosen by a one-dimensional search over `μ` below the first bin.
pub fn fit_levy(hist: &Histogram) -> Result<LevyFit, AnalysisError> {
    let centers = hist.centers();
    let bins: Vec<(f64, f64, f64)> = centers
        .iter()
        .zip(&hist.density)
        .zip(&hist.counts)
        .filter(|(_, &c)| c > 0)
        .map(|((&x, &d), &c)| (x, d.ln(), c as f64))
        .collect();
    if bins.len() < MIN_FIT_BINS {
        return Err(AnalysisError::FitFailure {
            reason: format!("{} non-empty bins, need {MIN_FIT_BINS}", bins.len()),
            residual: f64::NAN,
        });
    }
    let xs: Vec<f64> = bins.iter().map(|b| b.0).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.1).collect();
    let ws: Vec<f64> = bins.iter().map(|b| b.2).collect();
    let cand = search_location(&xs, &ys, &ws)
        .ok_or_else(|| AnalysisError::FitFailure { reason: "no admissible location".into(), residual: f64::NAN })?;
    let wsum: f64 = ws.iter().sum();
    let ymean = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let tss: f64 = ys.iter().zip(&ws).map(|(y, w)| w * (y - ymean).powi(2)).sum();
    let goodness = if tss > 0.0 { 1.0 - cand.rss / tss } else { 1.0 };
    let alpha = cand.beta - 1.0;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AnalysisError::FitFailure {
            reason: format!("fitted tail exponent {alpha} is not positive"),
            residual: cand.rss,
        });
    }
    Ok(LevyFit {
        alpha,
        mu: cand.mu,
        sigma: cand.sigma,
        log_amplitude: cand.log_amplitude,
        fit_range: (xs[0], *xs.last().unwrap()),
        goodness,
        bins_used: xs.len(),
    })
}

/// Box-counting dimension implied by a stable law of index `alpha`.
pub fn df_from_alpha(alpha: f64) -> f64 {
    1.0 / alpha
}
