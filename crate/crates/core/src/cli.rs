//! Command-line front end.
//!
//! Configuration is layered: built-in defaults, then a named preset, then a
//! flat JSON file whose keys mirror the flag names, then the flags themselves.
//! Exit status is 0 on success, 1 when a run fails and 2 for usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{
    dissipation_closed_form, dissipation_numeric, fit_levy, fractal_dimension_of_run, heavy_tail_ratio,
    step_length_histogram, step_lengths, survival_experiment, AnalysisError, FractalOptions, ScalePolicy,
};
use crate::experiments::{
    parse_grid, preset, preset_names, run_cutoff_comparison, run_sweep, write_sweep_csv, Preset, RunManifest,
    SweepError, SweepParam, SweepSpec,
};
use crate::simulator::{simulate_trajectory, BoundaryMode, SimConfig, SimError, Stepping};
use crate::vector::{Dimension, Vector};

pub const WORKERS_ENV: &str = "DIPOLE_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::Field(_) => CliError::Usage(e.to_string()),
            SimError::Integrator(crate::integrator::IntegratorError::InvalidControl(_)) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Simulation(s) => s.into(),
            AnalysisError::InvalidInput(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidGrid(_) => CliError::Usage(e.to_string()),
            SweepError::Analysis(a) => a.into(),
            SweepError::Io(io) => CliError::Runtime(io.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dipole-flow", version, about = "Particles in a randomly reoriented dipole flow")]
pub struct Cli {
    /// Worker threads (default: DIPOLE_WORKERS, else all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Box-counting dimension over an ensemble of trajectories.
    Fracdim(FracdimArgs),
    /// Ensemble dimension along a parameter grid.
    Sweep(SweepArgs),
    /// Surviving particle count under absorbing walls.
    Survival(SurvivalArgs),
    /// Step-length histogram and Lévy-tail fit of one trajectory.
    Levy(LevyArgs),
    /// Dissipation rate outside radius r, closed form and quadrature.
    Dissipation(DissipationArgs),
}

/// Simulation parameters shared by the run commands.
#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Named preset (see --preset list).
    #[arg(long)]
    pub preset: Option<String>,
    /// Flat JSON file with keys named like the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spatial dimension, 2 or 3.
    #[arg(long)]
    pub dim: Option<u8>,
    /// Dipole moment d_H.
    #[arg(long)]
    pub dh: Option<f64>,
    /// Half-width L_f of the domain [-L_f, L_f]^D.
    #[arg(long)]
    pub lf: Option<f64>,
    /// Number of steps N.
    #[arg(long)]
    pub steps: Option<usize>,
    /// periodic, reset or absorbing.
    #[arg(long)]
    pub boundary: Option<String>,
    /// Initial position as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Radial cutoff Δr.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// adaptive, or interval[:dt] to hold each direction for a fixed time.
    #[arg(long)]
    pub stepping: Option<String>,
    /// Local error tolerance ε.
    #[arg(long)]
    pub eps: Option<f64>,
}

/// The JSON configuration layer.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub preset: Option<String>,
    pub dim: Option<u8>,
    pub dh: Option<f64>,
    pub lf: Option<f64>,
    pub steps: Option<usize>,
    pub boundary: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub cutoff: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub stepping: Option<String>,
    pub eps: Option<f64>,
}

fn parse_x0(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad --x0 component '{t}': {e}"))))
        .collect()
}

impl SimArgs {
    fn as_flat(&self) -> Result<FlatConfig, CliError> {
        Ok(FlatConfig {
            preset: self.preset.clone(),
            dim: self.dim,
            dh: self.dh,
            lf: self.lf,
            steps: self.steps,
            boundary: self.boundary.clone(),
            x0: self.x0.as_deref().map(parse_x0).transpose()?,
            cutoff: self.cutoff,
            seed: self.seed,
            trials: self.trials,
            stepping: self.stepping.clone(),
            eps: self.eps,
        })
    }
}

impl FlatConfig {
    fn apply(&self, c: &mut SimConfig) -> Result<(), CliError> {
        if let Some(d) = self.dim {
            let dim = Dimension::try_from(d).map_err(CliError::Usage)?;
            if dim != c.dim {
                c.dim = dim;
                c.x0 = c.x0.truncated(dim);
            }
        }
        if let Some(v) = self.dh {
            c.moment = v;
        }
        if let Some(v) = self.lf {
            c.half_box = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(b) = &self.boundary {
            c.boundary = b.parse().map_err(CliError::Usage)?;
        }
        if let Some(x) = &self.x0 {
            c.x0 = Vector::from_slice(x).ok_or_else(|| CliError::Usage("x0 has more than three components".into()))?;
        }
        if let Some(v) = self.cutoff {
            c.cutoff = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(s) = &self.stepping {
            c.stepping = s.parse::<Stepping>().map_err(CliError::Usage)?;
        }
        if let Some(v) = self.eps {
            c.control.tolerance = v;
        }
        Ok(())
    }
}

fn lookup_preset(name: &str) -> Result<Preset, CliError> {
    preset(name).ok_or_else(|| {
        CliError::Usage(format!("unknown preset '{name}'; known presets: {}", preset_names().join(", ")))
    })
}

/// Configuration after all layers, with the preset that was used.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: SimConfig,
    pub preset: Option<Preset>,
}

/// Applies defaults, preset, JSON file and flags in that order.
pub fn resolve(args: &SimArgs) -> Result<Resolved, CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str::<FlatConfig>(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
        }
        None => FlatConfig::default(),
    };
    let flags = args.as_flat()?;
    let preset_name = flags.preset.clone().or_else(|| file.preset.clone());
    let preset = preset_name.as_deref().map(lookup_preset).transpose()?;
    if preset.is_none() && file.dh.is_none() && flags.dh.is_none() {
        return Err(CliError::Usage("--dh is required unless a preset or config file supplies it".into()));
    }
    let mut config = preset.as_ref().map(|p| p.config.clone()).unwrap_or_default();
    file.apply(&mut config)?;
    flags.apply(&mut config)?;
    config.validate()?;
    Ok(Resolved { config, preset })
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Trajectory CSV.
    #[arg(short, long, default_value = "trajectory.csv")]
    pub output: PathBuf,
    /// Which trial of the ensemble to run.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Manifest path (default: <output>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BoxArgs {
    /// Grid depth (default 10 in 2D, 8 in 3D).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Finest box edge as a multiple of the median step length.
    #[arg(long, default_value_t = 0.2)]
    pub scale_factor: f64,
}

impl BoxArgs {
    fn options(&self) -> Result<FractalOptions, CliError> {
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(CliError::Usage("--scale-factor must be positive".into()));
        }
        Ok(FractalOptions { depth: self.depth, policy: ScalePolicy::StepResolution { factor: self.scale_factor } })
    }
}

#[derive(Debug, Args)]
pub struct FracdimArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub boxes: BoxArgs,
    /// Per-trial CSV.
    #[arg(short, long, default_value = "fracdim.csv")]
    pub output: PathBuf,
    /// Summary JSON (default: <output>.summary.json).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub boxes: BoxArgs,
    /// Parameter to sweep: dh, n, lf or x0 (default: the preset's).
    #[arg(long)]
    pub param: Option<String>,
    /// Grid as a:b:logN, a:b:linN or a comma list (default: the preset's).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Run the sweep at two cutoffs and compare, e.g. 0,0.001.
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(short, long, default_value = "sweep.csv")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(short, long, default_value = "survival.csv")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LevyArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Histogram CSV.
    #[arg(short, long, default_value = "levy.csv")]
    pub output: PathBuf,
    /// Fit summary JSON (default: <output>.summary.json).
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DissipationArgs {
    #[arg(long)]
    pub dim: u8,
    /// Kinematic viscosity ν.
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub dh: f64,
    #[arg(long)]
    pub lf: f64,
    /// Inner radius.
    #[arg(long)]
    pub r: f64,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

fn finish_manifest(
    mut manifest: RunManifest,
    path: Option<PathBuf>,
    output: &Path,
    mut outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    let path = path.unwrap_or_else(|| sibling(output, ".manifest.json"));
    outputs.push(path.clone());
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    write_json(&path, &manifest)
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let r = resolve(&a.sim)?;
    let traj = simulate_trajectory(&r.config, a.trial)?;
    write_with(&a.output, |w| traj.write_csv(w))?;
    let mut m = RunManifest::new("simulate", r.preset.as_ref().map(|p| p.name.as_str()), &r.config);
    m.extra = serde_json::json!({ "trial": a.trial, "status": traj.status, "stats": traj.stats });
    finish_manifest(m, a.manifest, &a.output, vec![a.output.clone()])?;
    eprintln!("wrote {} samples to {}", traj.len(), a.output.display());
    Ok(())
}

fn cmd_fracdim(a: FracdimArgs) -> Result<(), CliError> {
    let r = resolve(&a.sim)?;
    let options = a.boxes.options()?;
    let stats = fractal_dimension_of_run(&r.config, &options)?;
    write_with(&a.output, |w| stats.write_csv(w))?;
    let summary_path = a.summary.unwrap_or_else(|| sibling(&a.output, ".summary.json"));
    let summary = stats.summary_json();
    write_json(&summary_path, &summary)?;
    let mut m = RunManifest::new("fracdim", r.preset.as_ref().map(|p| p.name.as_str()), &r.config);
    m.extra = serde_json::json!({ "options": options, "summary": summary });
    finish_manifest(m, a.manifest, &a.output, vec![a.output.clone(), summary_path])?;
    println!("{summary}");
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let r = resolve(&a.sim)?;
    let preset_sweep = r.preset.as_ref().and_then(|p| p.sweep.clone());
    let param = match (&a.param, &preset_sweep) {
        (Some(p), _) => p.parse::<SweepParam>().map_err(CliError::Usage)?,
        (None, Some((p, _))) => *p,
        (None, None) => return Err(CliError::Usage("--param is required without a sweep preset".into())),
    };
    let values = match (&a.grid, preset_sweep) {
        (Some(g), _) => parse_grid(g).map_err(CliError::Usage)?,
        (None, Some((p, v))) if p == param => v,
        _ => return Err(CliError::Usage("--grid is required for this parameter".into())),
    };
    let spec = SweepSpec { param, values, base: r.config.clone(), options: a.boxes.options()? };
    let mut m = RunManifest::new("sweep", r.preset.as_ref().map(|p| p.name.as_str()), &r.config);
    match &a.cutoffs {
        None => {
            let rows = run_sweep(&spec)?;
            write_with(&a.output, |w| write_sweep_csv(&rows, w))?;
            m.extra = serde_json::json!({ "param": param, "values": spec.values, "options": spec.options });
        }
        Some(c) => {
            let v = parse_grid(c).map_err(CliError::Usage)?;
            let [x, y] = v[..] else {
                return Err(CliError::Usage("--cutoffs takes exactly two values".into()));
            };
            let table = run_cutoff_comparison(&spec, (x, y))?;
            write_with(&a.output, |w| table.write_csv(w))?;
            m.extra = serde_json::json!({
                "param": param, "values": spec.values, "options": spec.options, "cutoffs": [x, y]
            });
        }
    }
    finish_manifest(m, a.manifest, &a.output, vec![a.output.clone()])?;
    eprintln!("wrote {} grid points to {}", spec.values.len(), a.output.display());
    Ok(())
}

fn cmd_survival(a: SurvivalArgs) -> Result<(), CliError> {
    let r = resolve(&a.sim)?;
    if r.config.boundary != BoundaryMode::Absorbing {
        return Err(CliError::Usage("survival needs --boundary absorbing (or a fig6 preset)".into()));
    }
    let curve = survival_experiment(&r.config)?;
    write_with(&a.output, |w| curve.write_csv(w))?;
    let mut m = RunManifest::new("survival", r.preset.as_ref().map(|p| p.name.as_str()), &r.config);
    m.extra = serde_json::json!({
        "decay_rate": curve.decay_rate,
        "r_squared": curve.r_squared,
        "log_step_slope": curve.log_step_slope,
        "log_step_r_squared": curve.log_step_r_squared,
        "truncated": curve.truncated
    });
    finish_manifest(m, a.manifest, &a.output, vec![a.output.clone()])?;
    println!("decay_rate {:.6e} r_squared {:.6}", curve.decay_rate, curve.r_squared);
    println!("log_step_slope {:.6e} log_step_r_squared {:.6}", curve.log_step_slope, curve.log_step_r_squared);
    Ok(())
}

fn cmd_levy(a: LevyArgs) -> Result<(), CliError> {
    let r = resolve(&a.sim)?;
    let traj = simulate_trajectory(&r.config, a.trial)?;
    let hist = step_length_histogram(&traj, &r.config, a.bins)?;
    write_with(&a.output, |w| hist.write_csv(w))?;
    let samples = step_lengths(&traj, r.config.boundary, r.config.half_box);
    let tail_ratio = heavy_tail_ratio(&samples, &hist).ok();
    let mut summary = match fit_levy(&hist) {
        Ok(fit) => fit.summary_json(),
        Err(e) => {
            serde_json::json!({ "alpha": null, "mu": null, "sigma": null, "goodness": null, "error": e.to_string() })
        }
    };
    summary["heavy_tail_ratio"] = serde_json::json!(tail_ratio);
    if let Some(alpha) = summary["alpha"].as_f64() {
        summary["df_from_alpha"] = serde_json::json!(crate::analysis::df_from_alpha(alpha));
    }
    let summary_path = a.summary.unwrap_or_else(|| sibling(&a.output, ".summary.json"));
    write_json(&summary_path, &summary)?;
    let mut m = RunManifest::new("levy", r.preset.as_ref().map(|p| p.name.as_str()), &r.config);
    m.extra = serde_json::json!({ "trial": a.trial, "bins": a.bins, "summary": summary });
    finish_manifest(m, a.manifest, &a.output, vec![a.output.clone(), summary_path])?;
    println!("{summary}");
    Ok(())
}

fn cmd_dissipation(a: DissipationArgs) -> Result<(), CliError> {
    let dim = Dimension::try_from(a.dim).map_err(CliError::Usage)?;
    let closed = dissipation_closed_form(a.nu, a.dh, a.lf, a.r, dim)?;
    let numeric = dissipation_numeric(a.nu, a.dh, a.lf, a.r, dim)?;
    let gap = ((numeric - closed) / closed).abs();
    if a.json {
        println!("{}", serde_json::json!({ "closed_form": closed, "numeric": numeric, "relative_gap": gap }));
    } else {
        println!("closed_form {closed:.16e}");
        println!("numeric {numeric:.16e}");
        println!("relative_gap {gap:.3e}");
    }
    Ok(())
}

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse().map_err(|e| CliError::Usage(format!("{WORKERS_ENV}={v}: {e}"))),
        Err(_) => Ok(0),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(cli.workers)?)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fracdim(a) => cmd_fracdim(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Survival(a) => cmd_survival(a),
        Command::Levy(a) => cmd_levy(a),
        Command::Dissipation(a) => cmd_dissipation(a),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("run with --help for usage");
            }
            e.exit_code()
        }
    }
}
