//! Named presets, parameter sweeps and the cutoff comparison.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fractal_dimension_of_run, AnalysisError, EnsembleStats, FractalOptions};
use crate::simulator::{BoundaryMode, SimConfig};
use crate::vector::{Dimension, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// Dipole moment `d_H`.
    Dh,
    /// Step count `N`.
    N,
    /// Half box `L_f`.
    Lf,
    /// First coordinate of the initial position.
    X0,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Dh => "dh",
            SweepParam::N => "n",
            SweepParam::Lf => "lf",
            SweepParam::X0 => "x0",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig, SweepError> {
        let mut c = base.clone();
        match self {
            SweepParam::Dh => c.moment = value,
            SweepParam::N => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= 1e9) {
                    return Err(SweepError::InvalidGrid(format!("step count {value} is not a whole number")));
                }
                c.steps = value as usize;
            }
            SweepParam::Lf => c.half_box = value,
            SweepParam::X0 => c.x0 = Vector::new(value, 0.0, 0.0),
        }
        Ok(c)
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dh" | "d_h" | "moment" => Ok(SweepParam::Dh),
            "n" | "steps" => Ok(SweepParam::N),
            "lf" | "l_f" | "half_box" => Ok(SweepParam::Lf),
            "x0" => Ok(SweepParam::X0),
            other => Err(format!("unknown sweep parameter '{other}' (dh, n, lf, x0)")),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Parses `a:b:logN`, `a:b:linN` or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}"));
    match parts.as_slice() {
        [single] => single.split(',').map(num).collect(),
        [a, b, spec] => {
            let (a, b) = (num(a)?, num(b)?);
            let (log, count) = if let Some(n) = spec.strip_prefix("log") {
                (true, n)
            } else if let Some(n) = spec.strip_prefix("lin") {
                (false, n)
            } else {
                return Err(format!("grid spacing must be logN or linN, got '{spec}'"));
            };
            let n: usize = count.parse().map_err(|e| format!("bad point count '{count}': {e}"))?;
            if n == 0 {
                return Err("grid needs at least one point".into());
            }
            if log && !(a > 0.0 && b > 0.0) {
                return Err("log grid needs positive end points".into());
            }
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n)
                .map(|i| {
                    let f = i as f64 / (n - 1) as f64;
                    if i == n - 1 {
                        b
                    } else if log {
                        (a.ln() + f * (b.ln() - a.ln())).exp()
                    } else {
                        a + f * (b - a)
                    }
                })
                .collect())
        }
        _ => Err(format!("cannot parse grid '{s}'")),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one grid point. It depends on the value, not its position in the
/// grid, so reordering a grid reorders rows without changing them.
pub fn point_seed(base: u64, param: SweepParam, value: f64) -> u64 {
    let tag = param.as_str().bytes().fold(0u64, |h, b| h.rotate_left(8) ^ b as u64);
    splitmix64(splitmix64(base ^ tag) ^ value.to_bits())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub base: SimConfig,
    #[serde(default)]
    pub options: FractalOptions,
}

impl SweepSpec {
    /// Configuration run at one grid value.
    pub fn config_for(&self, value: f64) -> Result<SimConfig, SweepError> {
        let mut c = self.param.apply(&self.base, value)?;
        c.seed = point_seed(self.base.seed, self.param, value);
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.values.is_empty() {
            return Err(SweepError::InvalidGrid("grid is empty".into()));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(SweepError::InvalidGrid(format!("grid value {v} is not finite")));
            }
            self.config_for(v)?
                .validate()
                .map_err(|e| SweepError::InvalidGrid(format!("{} = {v}: {e}", self.param)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub mean_df: Option<f64>,
    pub sigma: Option<f64>,
    pub gate_failures: usize,
    pub trials: usize,
    /// Set when no estimate could be made at this grid point.
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(param: SweepParam, value: f64, trials: usize, r: Result<EnsembleStats, AnalysisError>) -> Self {
        match r {
            Ok(s) => SweepRow {
                param,
                value,
                mean_df: s.mean_df,
                sigma: s.sigma,
                gate_failures: s.gate_failures,
                trials: s.n_trials(),
                error: None,
            },
            Err(e) => SweepRow {
                param,
                value,
                mean_df: None,
                sigma: None,
                gate_failures: if matches!(e, AnalysisError::NoEstimate { .. }) { trials } else { 0 },
                trials,
                error: Some(e.to_string()),
            },
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Rows written as `param,value,mean_df,sigma,ngate_fail,ntrials`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "param,value,mean_df,sigma,ngate_fail,ntrials")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{},{},{},{}",
            r.param,
            r.value,
            opt(r.mean_df),
            opt(r.sigma),
            r.gate_failures,
            r.trials
        )?;
    }
    Ok(())
}

/// One ensemble per grid value, in grid order. A grid point without an
/// estimate yields a row carrying the error rather than aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    spec.values
        .par_iter()
        .map(|&value| {
            let config = spec.config_for(value)?;
            match fractal_dimension_of_run(&config, &spec.options) {
                Err(AnalysisError::Simulation(e)) => Err(AnalysisError::Simulation(e).into()),
                r => Ok(SweepRow::from_result(spec.param, value, config.trials, r)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffRow {
    pub value: f64,
    pub a: SweepRow,
    pub b: SweepRow,
    pub difference: Option<f64>,
    pub combined_sigma: Option<f64>,
    /// `|D_f(a) − D_f(b)| ≤ √(σ_a² + σ_b²)`.
    pub within_one_sigma: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffTable {
    pub param: SweepParam,
    pub cutoffs: (f64, f64),
    pub rows: Vec<CutoffRow>,
}

impl CutoffTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "param,value,cutoff_a,mean_df_a,sigma_a,cutoff_b,mean_df_b,sigma_b,difference,combined_sigma,within_1sigma"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{},{:.16e},{},{},{},{},{}",
                self.param,
                r.value,
                self.cutoffs.0,
                opt(r.a.mean_df),
                opt(r.a.sigma),
                self.cutoffs.1,
                opt(r.b.mean_df),
                opt(r.b.sigma),
                opt(r.difference),
                opt(r.combined_sigma),
                r.within_one_sigma.map(|b| b.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

/// Runs `spec` once per cutoff with identical seeds and pairs the rows.
pub fn run_cutoff_comparison(spec: &SweepSpec, cutoffs: (f64, f64)) -> Result<CutoffTable, SweepError> {
    let arm = |cutoff: f64| {
        let mut s = spec.clone();
        s.base.cutoff = cutoff;
        run_sweep(&s)
    };
    let (a, b) = rayon::join(|| arm(cutoffs.0), || arm(cutoffs.1));
    let rows = a?
        .into_iter()
        .zip(b?)
        .map(|(a, b)| {
            let difference = a.mean_df.zip(b.mean_df).map(|(x, y)| x - y);
            let combined_sigma = a.sigma.zip(b.sigma).map(|(x, y)| x.hypot(y));
            let within_one_sigma = difference.zip(combined_sigma).map(|(d, s)| d.abs() <= s);
            CutoffRow { value: a.value, a, b, difference, combined_sigma, within_one_sigma }
        })
        .collect();
    Ok(CutoffTable { param: spec.param, cutoffs, rows })
}

/// A frozen named configuration and the grid it sweeps over.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub description: &'static str,
    pub config: SimConfig,
    pub sweep: Option<(SweepParam, Vec<f64>)>,
}

impl Preset {
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|(param, values)| SweepSpec {
            param: *param,
            values: values.clone(),
            base: self.config.clone(),
            options: FractalOptions::default(),
        })
    }
}

fn origin_offset(dim: Dimension, x: f64) -> Vector {
    match dim {
        Dimension::Two => Vector::planar(x, 0.0),
        Dimension::Three => Vector::new(x, 0.0, 0.0),
    }
}

/// Steps used by the survival presets: 2^17.
pub const SURVIVAL_STEPS: usize = 1 << 17;

fn condition_base(dim: Dimension, condition: u8) -> SimConfig {
    let (boundary, half_box) = match condition {
        1 => (BoundaryMode::Periodic, 0.1),
        _ => (BoundaryMode::Reset, 1.0),
    };
    SimConfig {
        dim,
        moment: 60.0,
        steps: 100_000,
        half_box,
        x0: origin_offset(dim, -0.02),
        boundary,
        ..SimConfig::default()
    }
}

/// Every preset name, in display order.
pub fn preset_names() -> Vec<String> {
    presets().into_iter().map(|p| p.name).collect()
}

/// Looks up a preset. `fig6-2d`/`fig6-3d` are accepted for the survival runs.
pub fn preset(name: &str) -> Option<Preset> {
    let name = match name {
        "fig6-2d" => "fig6-survival-2d",
        "fig6-3d" => "fig6-survival-3d",
        other => other,
    };
    presets().into_iter().find(|p| p.name == name)
}

pub fn presets() -> Vec<Preset> {
    use Dimension::{Three, Two};
    let lf_grid = parse_grid("0.025:0.5:log8").expect("static grid");
    let mut out = Vec::new();
    let panels: [(&'static str, Dimension, u8); 4] =
        [("cond1-2d", Two, 1), ("cond1-3d", Three, 1), ("cond2-2d", Two, 2), ("cond2-3d", Three, 2)];
    for (suffix, dim, cond) in panels {
        let base = condition_base(dim, cond);
        out.push(Preset {
            name: (format!("fig3-{suffix}")),
            description: "fractal dimension against dipole moment",
            config: base.clone(),
            sweep: Some((SweepParam::Dh, vec![5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0])),
        });
        // Condition 2 in 2D keeps the small box for the step-count sweep.
        let fig4 = if cond == 2 && dim == Two { SimConfig { half_box: 0.1, ..base.clone() } } else { base.clone() };
        out.push(Preset {
            name: (format!("fig4-{suffix}")),
            description: "fractal dimension against step count",
            config: fig4,
            sweep: Some((SweepParam::N, vec![25_000.0, 50_000.0, 100_000.0, 200_000.0, 500_000.0])),
        });
        out.push(Preset {
            name: (format!("fig5-{suffix}")),
            description: "fractal dimension against box size",
            config: base.clone(),
            sweep: Some((SweepParam::Lf, lf_grid.clone())),
        });
        out.push(Preset {
            name: (format!("fig8-{suffix}")),
            description: "box-size sweep compared between cutoffs 0 and 0.001",
            config: base,
            sweep: Some((SweepParam::Lf, lf_grid.clone())),
        });
    }
    for (name, dim) in [("fig6-survival-2d", Two), ("fig6-survival-3d", Three)] {
        out.push(Preset {
            name: name.to_string(),
            description: "surviving particles without recovery",
            config: SimConfig {
                dim,
                moment: 1.0,
                steps: SURVIVAL_STEPS,
                half_box: 3.0,
                x0: origin_offset(dim, 1.0),
                boundary: BoundaryMode::Absorbing,
                ..SimConfig::default()
            },
            sweep: None,
        });
    }
    for (name, moment, half_box) in [("fig7a", 60.0, 0.2), ("fig7b", 6.0e4, 2.0), ("fig7c", 1.0e5, 2.0)] {
        let grid = parse_grid(&format!("{}:{}:lin8", -0.9 * half_box, -0.005 * half_box / 0.2)).expect("static grid");
        out.push(Preset {
            name: name.to_string(),
            description: "fractal dimension against initial position, reset boundary, 3D",
            config: SimConfig {
                dim: Three,
                moment,
                half_box,
                boundary: BoundaryMode::Reset,
                ..condition_base(Three, 2)
            },
            sweep: Some((SweepParam::X0, grid)),
        });
    }
    out
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub preset: Option<String>,
    pub config: SimConfig,
    pub seed: u64,
    pub timestamp: String,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, preset: Option<&str>, config: &SimConfig) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            preset: preset.map(str::to_string),
            config: config.clone(),
            seed: config.seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }
}
