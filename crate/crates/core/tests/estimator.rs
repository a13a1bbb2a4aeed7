use bridgefpt::estimator::{
    covariance_diagnostic, estimate_density, estimate_rate, linspace, ou_rate_estimator,
    rate_bounds, uniform_grid, Reference, DEFAULT_KAPPA_SEARCH,
};
use bridgefpt::model::{bm_fpt_density, ou_fpt_density, ou_rate};
use bridgefpt::{build_model, BridgeEnsemble};

#[test]
fn zero_drift_is_exact_for_any_ensemble() {
    for &(n, m, seed, x) in &[(2, 2, 0u64, 1.0), (37, 10, 5, 0.3), (500, 100, 99, 2.0)] {
        let model = build_model("0", x).unwrap();
        let grid = uniform_grid(8.0, 40);
        let est =
            estimate_density(&model, &grid, &BridgeEnsemble::new(n, m, seed).unwrap()).unwrap();
        for (j, &t) in grid.iter().enumerate() {
            assert_eq!(est.p_hat[j], bm_fpt_density(x, t));
            assert_eq!(est.std_err[j], 0.0);
        }
    }
}

#[test]
fn ou_density_within_four_standard_errors() {
    let model = build_model("-z", 1.0).unwrap();
    let grid = linspace(0.1, 7.0, 140);
    let est = estimate_density(
        &model,
        &grid,
        &BridgeEnsemble::new(10_000, 1000, 2024).unwrap(),
    )
    .unwrap();
    let inside = grid
        .iter()
        .enumerate()
        .filter(|&(j, &t)| {
            (est.p_hat[j] - ou_fpt_density(t).unwrap()).abs() <= 4.0 * est.std_err[j]
        })
        .count();
    assert!(
        inside as f64 >= 0.95 * grid.len() as f64,
        "{inside}/140 inside"
    );
    let at_one = estimate_density(
        &model,
        &[1.0],
        &BridgeEnsemble::new(10_000, 1000, 2024).unwrap(),
    )
    .unwrap();
    assert!((at_one.p_hat[0] - 0.441466).abs() <= 3.0 * at_one.std_err[0]);
}

#[test]
fn quadrupling_paths_halves_the_standard_error() {
    let model = build_model("-z", 1.0).unwrap();
    let grid = [0.5, 1.0, 2.0, 4.0];
    let small =
        estimate_density(&model, &grid, &BridgeEnsemble::new(2_000, 100, 1).unwrap()).unwrap();
    let large =
        estimate_density(&model, &grid, &BridgeEnsemble::new(8_000, 100, 2).unwrap()).unwrap();
    for (j, t) in grid.iter().enumerate() {
        let ratio = large.std_err[j] / small.std_err[j];
        assert!((ratio - 0.5).abs() <= 0.1, "t = {t}: ratio {ratio}");
    }
}

#[test]
fn positive_and_lipschitz_on_refined_grids() {
    let model = build_model("-z", 1.0).unwrap();
    let ensemble = BridgeEnsemble::new(300, 100, 8).unwrap();
    let mut jumps = Vec::new();
    for &points in &[100, 200, 400, 800] {
        let grid = uniform_grid(6.0, points);
        let est = estimate_density(&model, &grid, &ensemble).unwrap();
        assert!(est.p_hat.iter().all(|&p| p > 0.0));
        let max_jump = est
            .p_hat
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        jumps.push(max_jump);
    }
    // Halving the step should roughly halve the largest jump.
    for w in jumps.windows(2) {
        let ratio = w[1] / w[0];
        assert!((0.4..=0.6).contains(&ratio), "jumps {jumps:?}");
    }
}

#[test]
fn z_scores_are_calibrated() {
    let model = build_model("-z", 1.0).unwrap();
    let diag = covariance_diagnostic(
        &model,
        &[(1.0, 1.0), (1.0, 2.0), (2.0, 2.0)],
        1_000,
        100,
        100,
        17,
        &Reference::ornstein_uhlenbeck(),
    )
    .unwrap();
    let j = diag.times.iter().position(|&t| t == 1.0).unwrap();
    let z95 = diag.z_quantile(j, 0.95);
    assert!(z95 <= 2.3, "95th percentile {z95}");
    assert!(diag.empirical_gamma.iter().step_by(2).all(|&g| g > 0.0));
}

#[test]
fn rate_sandwich_and_routes() {
    let model = build_model("-z", 1.0).unwrap();
    let grid = linspace(0.1, 7.0, 70);
    let ensemble = BridgeEnsemble::new(10_000, 200, 4).unwrap();
    let rate = estimate_rate(&model, &grid, &ensemble).unwrap();
    let min = rate
        .lambda_hat
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(min >= -0.5 - 0.05, "min rate {min}");
    assert_eq!(rate.lower_bound, -0.5);
    for (t, l) in grid.iter().zip(&rate.lambda_hat) {
        if (3.0..=7.0).contains(t) {
            assert!(*l <= 3.03 + 0.05, "t = {t}: {l}");
            assert!(*l <= rate.upper_bound);
        }
    }
    let other = ou_rate_estimator(&model, &grid, &ensemble).unwrap();
    for (a, b) in rate.lambda_hat.iter().zip(&other.lambda_hat) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    let bounds = rate_bounds(&model, DEFAULT_KAPPA_SEARCH).unwrap();
    assert_eq!(bounds.upper, rate.upper_bound);
}

#[test]
fn raw_rate_grows_for_small_samples() {
    let model = build_model("-z", 1.0).unwrap();
    let rate = ou_rate_estimator(
        &model,
        &[10.0, 20.0],
        &BridgeEnsemble::new(100, 200, 3).unwrap(),
    )
    .unwrap();
    let (early, late) = (rate.lambda_hat[0], rate.lambda_hat[1]);
    assert!(late > early, "{early} {late}");
    let true_change = ou_rate(20.0).unwrap() - ou_rate(10.0).unwrap();
    assert!(
        late - early > true_change,
        "{early} {late} vs {true_change}"
    );
    assert!(late > ou_rate(20.0).unwrap());
}
