use dipole_flow::analysis::survival_experiment;
use dipole_flow::experiments::preset;
use dipole_flow::SimConfig;

// Stronger kicks eject particles sooner. With fewer than ~150 particles the
// d_H = 1 and 2 rates are within noise of each other.
#[test]
fn decay_rate_grows_with_moment() {
    let base = preset("fig6-survival-3d").unwrap().config;
    let rates: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&moment| {
            let c = SimConfig { moment, ..base.clone() };
            survival_experiment(&c).unwrap().decay_rate
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] > w[0]), "{rates:?}");
}
