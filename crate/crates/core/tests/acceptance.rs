//! Acceptance suite.
//!
//! Runs every criterion, prints one PASS/FAIL line each and exits non-zero if
//! any failed. Tolerances are fixed here and must not be loosened to make a
//! run pass.
//!
//! The fractal-dimension criteria run full 150-trial ensembles; expect a few
//! minutes per core.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::LazyLock;
use std::time::Instant;

use dipole_flow::analysis::{
    dissipation_closed_form, dissipation_numeric, estimate_dimension, fit_levy, fractal_dimension_of_run,
    heavy_tail_ratio, step_length_histogram, step_lengths, survival_experiment, EnsembleStats, FractalOptions,
    ScaleSelection,
};
use dipole_flow::experiments::{preset, preset_names};
use dipole_flow::integrator::rkf_step;
use dipole_flow::{simulate_trajectory, Dimension, DipoleField, DirectionSampler, SimConfig, Vector, FEHLBERG};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COND1_3D_BAND: (f64, f64) = (2.5, 2.9);
const COND1_2D_BAND: (f64, f64) = (1.75, 2.0);
const COND2_2D_BAND: (f64, f64) = (1.35, 1.65);
const COND2_3D_BAND: (f64, f64) = (1.45, 2.0);
const SURVIVAL_MIN_R2: f64 = 0.9;
const ORDER_STEPS: [f64; 3] = [0.1, 0.05, 0.025];
const ORDER4_FACTOR: f64 = 1.5;
const ORDER5_FACTOR: f64 = 2.0;
const LINE_DF: (f64, f64) = (1.0, 0.05);
const PLANE_DF: (f64, f64) = (2.0, 0.1);
const SIERPINSKI_TOL: f64 = 0.05;
const SAMPLER_DRAWS: usize = 1_000_000;
const SAMPLER_MEAN_TOL: f64 = 0.005;
const SAMPLER_COV_TOL: f64 = 0.005;
const DISSIPATION_RTOL: f64 = 1e-4;
const DISSIPATION_RADII: [f64; 3] = [0.1, 1.0, 10.0];
const CUTOFF: f64 = 0.001;
const DIVERGENCE_RTOL: f64 = 1e-6;
const DIVERGENCE_POINTS: usize = 100;
const HEAVY_TAIL_MIN: f64 = 10.0;
const LEVY_TARGETS: [(&str, f64); 3] = [("alpha", 2.0), ("mu", 0.14), ("sigma", 0.9)];
const LEVY_REL_TOL: f64 = 0.5;
const LEVY_BINS: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(name: &str) -> SimConfig {
    preset(name).unwrap_or_else(|| panic!("preset {name}")).config
}

fn ensemble(config: &SimConfig) -> EnsembleStats {
    fractal_dimension_of_run(config, &FractalOptions::default()).expect("ensemble estimate")
}

// Condition 2 ensembles serve both the band check and the cutoff comparison.
static COND2_2D: LazyLock<EnsembleStats> = LazyLock::new(|| ensemble(&config("fig3-cond2-2d")));
static COND2_3D: LazyLock<EnsembleStats> = LazyLock::new(|| ensemble(&config("fig3-cond2-3d")));

fn in_band(stats: &EnsembleStats, band: (f64, f64)) -> (bool, String) {
    let mean = stats.mean_df.unwrap_or(f64::NAN);
    let pass = mean >= band.0 && mean <= band.1;
    let detail = format!(
        "mean D_f {mean:.4} ± {:.4} (σ, n = {}, gate failures {}) in [{}, {}]",
        stats.sigma.unwrap_or(f64::NAN),
        stats.passed(),
        stats.gate_failures,
        band.0,
        band.1
    );
    (pass, detail)
}

fn fractal_band(name: &str, band: (f64, f64)) -> Outcome {
    let (pass, detail) = in_band(&ensemble(&config(name)), band);
    outcome(pass, detail)
}

fn condition_two() -> Outcome {
    let (p2, s2) = in_band(&COND2_2D, COND2_2D_BAND);
    let (p3, s3) = in_band(&COND2_3D, COND2_3D_BAND);
    outcome(p2 && p3, format!("2D {s2}; 3D {s3}"))
}

fn survival() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["fig6-survival-3d", "fig6-survival-2d"] {
        let c = config(name);
        let s = survival_experiment(&c).expect("survival run");
        pass &= s.r_squared > SURVIVAL_MIN_R2;
        parts.push(format!(
            "{}D: R² {:.3} (λ {:.3e}/step, {} of {} left at step {}; ln-count vs log₂ step R² {:.3})",
            c.dim,
            s.r_squared,
            s.decay_rate,
            s.counts.last().unwrap(),
            s.trials,
            s.checkpoints.last().unwrap(),
            s.log_step_r_squared
        ));
    }
    outcome(pass, format!("{}; need R² > {SURVIVAL_MIN_R2}", parts.join("; ")))
}

/// Global error at t = 1 of fixed steps on `dx/dt = −x`, for the fourth- and
/// fifth-order weights.
fn decay_errors(dt: f64) -> (f64, f64) {
    let n = (1.0 / dt).round() as usize;
    let (mut x4, mut x5) = (1.0, 1.0);
    for i in 0..n {
        let t = i as f64 * dt;
        x4 = rkf_step(|x, _| -x, Vector::new(x4, 0.0, 0.0), t, dt, &FEHLBERG).unwrap().0[0];
        x5 = rkf_step(|x, _| -x, Vector::new(x5, 0.0, 0.0), t, dt, &FEHLBERG).unwrap().1[0];
    }
    let exact = (-1.0f64).exp();
    ((x4 - exact).abs(), (x5 - exact).abs())
}

fn integrator_order() -> Outcome {
    let errs: Vec<(f64, f64)> = ORDER_STEPS.iter().map(|&dt| decay_errors(dt)).collect();
    let mut pass = true;
    let mut ratios = Vec::new();
    for w in errs.windows(2) {
        let (r4, r5) = (w[0].0 / w[1].0, w[0].1 / w[1].1);
        pass &= (16.0 / ORDER4_FACTOR..=16.0 * ORDER4_FACTOR).contains(&r4);
        pass &= (32.0 / ORDER5_FACTOR..=32.0 * ORDER5_FACTOR).contains(&r5);
        ratios.push(format!("{r4:.2}/{r5:.2}"));
    }
    let errs: Vec<String> = errs.iter().map(|(a, b)| format!("{a:.3e}/{b:.3e}")).collect();
    outcome(
        pass,
        format!(
            "errors (4th/5th) at Δt {ORDER_STEPS:?}: {}; halving ratios {} vs 16 (×{ORDER4_FACTOR}) and 32 (×{ORDER5_FACTOR})",
            errs.join(", "),
            ratios.join(", ")
        ),
    )
}

fn chaos_game(n: usize) -> Vec<Vector> {
    let corners = [Vector::planar(-0.9, -0.8), Vector::planar(0.9, -0.8), Vector::planar(0.0, 0.76)];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = corners[0];
    (0..n + 100)
        .map(|_| {
            p = (p + corners[rng.random_range(0..3)]) * 0.5;
            p
        })
        .skip(100)
        .collect()
}

fn box_count_oracles() -> Outcome {
    let df = |pts: &[Vector]| {
        estimate_dimension(pts, Dimension::Two, 1.0, 10, ScaleSelection::default())
            .expect("box count")
            .dimension()
            .unwrap_or(f64::NAN)
    };
    let n = 1_000_000;
    let line: Vec<Vector> =
        (0..n).map(|i| i as f64 / n as f64).map(|s| Vector::planar(-0.9 + 1.7 * s, -0.3 + 0.9 * s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plane: Vec<Vector> =
        (0..n).map(|_| Vector::planar(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let (l, p, s) = (df(&line), df(&plane), df(&chaos_game(n)));
    let sierpinski = 3f64.ln() / 2f64.ln();
    let pass = (l - LINE_DF.0).abs() <= LINE_DF.1
        && (p - PLANE_DF.0).abs() <= PLANE_DF.1
        && (s - sierpinski).abs() <= SIERPINSKI_TOL;
    outcome(
        pass,
        format!(
            "line {l:.4} (1 ± {}), plane {p:.4} (2 ± {}), Sierpinski {s:.4} ({sierpinski:.4} ± {SIERPINSKI_TOL})",
            LINE_DF.1, PLANE_DF.1
        ),
    )
}

fn sampler_moments() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for dim in [Dimension::Two, Dimension::Three] {
        let n = dim.get();
        let mut s = DirectionSampler::new(dim, 12345);
        let mut mean = [0.0; 3];
        let mut cov = [[0.0; 3]; 3];
        for _ in 0..SAMPLER_DRAWS {
            let d = s.sample_direction();
            for i in 0..n {
                mean[i] += d[i];
                for j in 0..n {
                    cov[i][j] += d[i] * d[j];
                }
            }
        }
        let k = SAMPLER_DRAWS as f64;
        let worst_mean = (0..n).map(|i| (mean[i] / k).abs()).fold(0.0, f64::max);
        let worst_cov = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (cov[i][j] / k - if i == j { 1.0 / n as f64 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        pass &= worst_mean < SAMPLER_MEAN_TOL && worst_cov < SAMPLER_COV_TOL;
        parts.push(format!("{dim}: max |mean| {worst_mean:.2e}, max cov deviation {worst_cov:.2e}"));
    }
    outcome(pass, format!("{} (limits {SAMPLER_MEAN_TOL}, {SAMPLER_COV_TOL})", parts.join("; ")))
}

fn dissipation() -> Outcome {
    let mut pass = true;
    let mut worst = 0.0f64;
    let coefficients = [
        dissipation_closed_form(1.0, 1.0, 1.0, 1.0, Dimension::Two).unwrap() / (8.0 * PI),
        dissipation_closed_form(1.0, 1.0, 1.0, 1.0, Dimension::Three).unwrap() / (288.0 * PI / 5.0),
    ];
    pass &= coefficients.iter().all(|c| (c - 1.0).abs() < 1e-12);
    for dim in [Dimension::Two, Dimension::Three] {
        for r in DISSIPATION_RADII {
            let closed = dissipation_closed_form(1.0, 1.0, 1.0, r, dim).unwrap();
            let numeric = dissipation_numeric(1.0, 1.0, 1.0, r, dim).unwrap();
            let gap = (numeric / closed - 1.0).abs();
            worst = worst.max(gap);
            pass &= gap < DISSIPATION_RTOL;
        }
    }
    outcome(
        pass,
        format!(
            "unit coefficients / (8π, 288π/5) = {:.12}, {:.12}; worst relative gap {worst:.2e} over r {DISSIPATION_RADII:?} (limit {DISSIPATION_RTOL})",
            coefficients[0], coefficients[1]
        ),
    )
}

fn cutoff_insensitivity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, at_zero) in [("fig3-cond2-2d", &*COND2_2D), ("fig3-cond2-3d", &*COND2_3D)] {
        let c = SimConfig { cutoff: CUTOFF, ..config(name) };
        let with_cutoff = ensemble(&c);
        let (a, b) = (at_zero.mean_df.unwrap_or(f64::NAN), with_cutoff.mean_df.unwrap_or(f64::NAN));
        let sigma = at_zero.sigma.unwrap_or(f64::NAN).hypot(with_cutoff.sigma.unwrap_or(f64::NAN));
        let diff = (a - b).abs();
        pass &= diff <= sigma;
        parts.push(format!("{}D: D_f {a:.4} at Δr=0 vs {b:.4} at Δr={CUTOFF}, |Δ| {diff:.4} vs σ {sigma:.4}", c.dim));
    }
    outcome(pass, parts.join("; "))
}

fn divergence_free() -> Outcome {
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for dim in [Dimension::Two, Dimension::Three] {
        let field = DipoleField::new(dim, 60.0, 0.0).unwrap();
        let mut directions = DirectionSampler::new(dim, 98);
        for _ in 0..DIVERGENCE_POINTS {
            let r = rng.random_range(0.01..1.0);
            let x = directions.sample_direction() * r;
            let div = field.divergence_check(x, 1e-5 * r).unwrap();
            // A single velocity gradient component is of size d_H/r^{D+1}.
            worst = worst.max(div.abs() * dim.pow(r) * r / field.moment());
        }
    }
    outcome(
        worst < DIVERGENCE_RTOL,
        format!("worst |div V| relative to d_H/r^(D+1): {worst:.2e} over {DIVERGENCE_POINTS} points per D (limit {DIVERGENCE_RTOL})"),
    )
}

fn cli_csv(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out =
        Command::new(env!("CARGO_BIN_EXE_dipole-flow")).args(args).current_dir(dir).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(dir.join("out.csv")).expect("csv written")
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut differing = Vec::new();
    let names = preset_names();
    for name in &names {
        let steps = config(name).steps.min(20_000).to_string();
        let args = ["simulate", "--preset", name, "--steps", &steps, "--seed", "2024", "-o", "out.csv"];
        if cli_csv(a.path(), &args) != cli_csv(b.path(), &args) {
            differing.push(name.clone());
        }
    }
    let ensemble_args = ["fracdim", "--preset", "fig3-cond2-3d", "--trials", "8", "--seed", "5", "-o", "out.csv"];
    if cli_csv(a.path(), &ensemble_args) != cli_csv(b.path(), &ensemble_args) {
        differing.push("fracdim fig3-cond2-3d".into());
    }
    outcome(
        differing.is_empty(),
        format!("{} preset trajectories and one ensemble table compared; differing: {differing:?}", names.len()),
    )
}

fn levy_tail() -> Outcome {
    let c = config("fig3-cond1-3d");
    let traj = simulate_trajectory(&c, 0).expect("trajectory");
    let hist = step_length_histogram(&traj, &c, LEVY_BINS).expect("histogram");
    let ratio = heavy_tail_ratio(&step_lengths(&traj, c.boundary, c.half_box), &hist).expect("tail ratio");
    let mut pass = ratio >= HEAVY_TAIL_MIN;
    let fit = match fit_levy(&hist) {
        Ok(fit) => {
            let got = [fit.alpha, fit.mu, fit.sigma];
            let parts: Vec<String> = LEVY_TARGETS
                .iter()
                .zip(got)
                .map(|(&(name, want), v)| {
                    let ok = (v - want).abs() <= LEVY_REL_TOL * want;
                    pass &= ok;
                    format!(
                        "{name} {v:.4} (target {want} ± {:.0}%{})",
                        LEVY_REL_TOL * 100.0,
                        if ok { "" } else { ", outside" }
                    )
                })
                .collect();
            parts.join(", ")
        }
        Err(e) => {
            pass = false;
            format!("fit failed: {e}")
        }
    };
    outcome(pass, format!("tail ratio {ratio:.3e} (need ≥ {HEAVY_TAIL_MIN}); {fit}"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut record = |n: u8, title: &'static str, run: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = run();
        println!(
            "criterion {n:>2} {}  {title}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((n, title, o));
    };

    record(1, "condition 1, 3D fractal dimension", &|| fractal_band("fig3-cond1-3d", COND1_3D_BAND));
    record(2, "condition 1, 2D fractal dimension", &|| fractal_band("fig3-cond1-2d", COND1_2D_BAND));
    record(3, "condition 2 fractal dimension", &condition_two);
    record(4, "survival decay is exponential", &survival);
    record(5, "integrator convergence order", &integrator_order);
    record(6, "box-count oracles", &box_count_oracles);
    record(7, "direction sampler moments", &sampler_moments);
    record(8, "dissipation closed form vs quadrature", &dissipation);
    record(9, "cutoff insensitivity, condition 2", &cutoff_insensitivity);
    record(10, "divergence-free field", &divergence_free);
    record(11, "seeded runs are byte-identical", &determinism);
    record(12, "Lévy tail of the step lengths", &levy_tail);

    let failed: Vec<u8> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} passed in {:.0}s{}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!("; failed {failed:?}") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
