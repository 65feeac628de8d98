use dipole_flow::analysis::{fractal_dimension_of_run, FractalOptions};
use dipole_flow::experiments::{preset, run_cutoff_comparison, run_sweep, write_sweep_csv, SweepParam, SweepSpec};
use dipole_flow::{Dimension, SimConfig};
use proptest::prelude::*;

/// Small, quick ensembles: enough samples for a box count, few trials.
fn quick(dim: Dimension) -> SimConfig {
    SimConfig { dim, steps: 3_000, trials: 4, x0: SimConfig::default().x0.truncated(dim), ..SimConfig::default() }
}

fn spec(param: SweepParam, values: Vec<f64>) -> SweepSpec {
    SweepSpec { param, values, base: quick(Dimension::Two), options: FractalOptions::default() }
}

fn csv(spec: &SweepSpec) -> Vec<u8> {
    let mut buf = Vec::new();
    write_sweep_csv(&run_sweep(spec).unwrap(), &mut buf).unwrap();
    buf
}

#[test]
fn one_point_sweep_is_one_ensemble() {
    let s = spec(SweepParam::Dh, vec![40.0]);
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 1);
    let direct = fractal_dimension_of_run(&s.config_for(40.0).unwrap(), &s.options).unwrap();
    assert_eq!(rows[0].mean_df, direct.mean_df);
    assert_eq!(rows[0].sigma, direct.sigma);
    assert_eq!(rows[0].gate_failures, direct.gate_failures);
}

#[test]
fn sweep_bytes_repeat() {
    let s = spec(SweepParam::Lf, vec![0.05, 0.1, 0.2]);
    assert_eq!(csv(&s), csv(&s));
}

#[test]
fn equal_cutoffs_give_equal_arms() {
    let t = run_cutoff_comparison(&spec(SweepParam::Dh, vec![20.0, 60.0]), (0.001, 0.001)).unwrap();
    for r in &t.rows {
        assert_eq!(r.a.mean_df, r.b.mean_df);
        assert_eq!(r.difference, Some(0.0));
        assert_eq!(r.within_one_sigma, Some(true));
    }
}

#[test]
fn huge_cutoff_is_recorded_not_fatal() {
    let s = spec(SweepParam::Lf, vec![0.1]);
    let t = run_cutoff_comparison(&s, (0.0, 1.0)).unwrap();
    assert_eq!(t.rows.len(), 1);
    let b = &t.rows[0].b;
    assert_eq!(b.trials, s.base.trials);
    assert!(b.error.is_some() || b.mean_df.is_some_and(f64::is_finite), "{b:?}");
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

#[test]
fn invalid_grids_are_rejected_up_front() {
    assert!(run_sweep(&spec(SweepParam::Dh, vec![])).is_err());
    assert!(run_sweep(&spec(SweepParam::N, vec![1.5])).is_err());
    assert!(run_sweep(&spec(SweepParam::Lf, vec![-1.0])).is_err());
}

#[test]
fn presets_run_end_to_end() {
    let p = preset("fig3-cond1-2d").unwrap();
    let mut s = p.sweep_spec().unwrap();
    s.values.truncate(2);
    s.base.steps = 2_000;
    s.base.trials = 2;
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![5.0, 10.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn permuting_the_grid_permutes_rows(rotation in 1usize..4) {
        let values = vec![10.0, 30.0, 60.0, 90.0];
        let rows = run_sweep(&spec(SweepParam::Dh, values.clone())).unwrap();
        let mut permuted = values.clone();
        permuted.rotate_left(rotation);
        let other = run_sweep(&spec(SweepParam::Dh, permuted.clone())).unwrap();
        for (row, v) in other.iter().zip(&permuted) {
            let i = values.iter().position(|x| x == v).unwrap();
            prop_assert_eq!(row, &rows[i]);
        }
    }
}
