//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use bridgefpt::baseline::{compare_methods, Bandwidth, ComparisonConfig};
use bridgefpt::bridge::bessel_max_cdf;
use bridgefpt::estimator::{
    convergence_scaling, estimate_density, estimate_rate, linspace, uniform_grid, Reference,
};
use bridgefpt::model::{bm_fpt_density, ou_fpt_density, ou_rate};
use bridgefpt::tail::{
    build_tail, check_liouville, eigen_ladder, evaluate_mixture, mixture_local_rate,
    principal_eigenvalue, DEFAULT_MESH,
};
use bridgefpt::{build_model, BridgeEnsemble, DriftModel};

type Outcome = Result<(bool, String), bridgefpt::Error>;
type Criterion = (&'static str, fn() -> Outcome);

fn ou() -> DriftModel {
    build_model("-z", 1.0).unwrap()
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn zero_drift_exactness() -> Outcome {
    let start = Instant::now();
    let mut exact = true;
    for &(n, m, seed, x) in &[
        (2, 2, 0u64, 1.0),
        (100, 50, 1, 0.5),
        (1000, 200, 42, 1.0),
        (257, 64, u64::MAX, 3.0),
    ] {
        let model = build_model("0", x)?;
        let grid = uniform_grid(10.0, 100);
        let est = estimate_density(&model, &grid, &BridgeEnsemble::new(n, m, seed)?)?;
        for (j, &t) in grid.iter().enumerate() {
            exact &= est.p_hat[j] == bm_fpt_density(x, t) && est.std_err[j] == 0.0;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        exact && secs < 1.0,
        format!("exact = {exact}, runtime {secs:.3} s (< 1 s)"),
    ))
}

fn ou_oracle() -> Outcome {
    let start = Instant::now();
    let grid = linspace(0.1, 7.0, 140);
    let est = estimate_density(&ou(), &grid, &BridgeEnsemble::new(10_000, 1000, 1)?)?;
    let secs = start.elapsed().as_secs_f64();
    let mut inside = 0;
    for (j, &t) in grid.iter().enumerate() {
        if (est.p_hat[j] - ou_fpt_density(t)?).abs() <= 4.0 * est.std_err[j] {
            inside += 1;
        }
    }
    let frac = inside as f64 / grid.len() as f64;
    Ok((
        frac >= 0.95 && secs < 60.0,
        format!(
            "{inside}/140 within 4 SE ({:.1}% >= 95%), runtime {secs:.1} s (< 60 s)",
            100.0 * frac
        ),
    ))
}

fn figure_reproduction() -> Outcome {
    let grid = uniform_grid(10.0, 200);
    let truth: Vec<f64> = grid
        .iter()
        .map(|&t| ou_fpt_density(t))
        .collect::<Result<_, _>>()?;
    let peak = max_abs(truth.iter().copied());
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let est = estimate_density(&ou(), &grid, &BridgeEnsemble::new(100, 1000, seed)?)?;
        let err = max_abs(est.p_hat.iter().zip(&truth).map(|(p, q)| p - q));
        ratios.push(err / peak);
    }
    let good = ratios.iter().filter(|&&r| r <= 0.08).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    Ok((
        good >= 9,
        format!(
            "{good}/10 seeds with relative max error <= 0.08 [{}]",
            shown.join(", ")
        ),
    ))
}

fn small_t_rate() -> Outcome {
    let rate = estimate_rate(&ou(), &[0.05], &BridgeEnsemble::new(10_000, 1000, 2)?)?;
    let l = rate.lambda_hat[0];
    Ok((
        (-0.38..=-0.28).contains(&l),
        format!(
            "lambda_hat(0.05) = {l:.4} in [-0.38, -0.28]; limit {:.4}",
            rate.small_t_limit
        ),
    ))
}

fn rate_blow_up() -> Outcome {
    let rate = estimate_rate(&ou(), &[10.0, 20.0], &BridgeEnsemble::new(100, 1000, 7)?)?;
    let raw = rate.lambda_hat[1] - rate.lambda_hat[0];
    let truth = ou_rate(20.0)? - ou_rate(10.0)?;
    Ok((
        raw > 0.5 && truth.abs() < 0.1,
        format!("estimated change {raw:.3} (> 0.5); closed-form change {truth:.3} (< 0.1)"),
    ))
}

fn convergence_rate() -> Outcome {
    let table = convergence_scaling(
        &ou(),
        &linspace(0.1, 5.0, 50),
        &[100, 1_000, 10_000],
        200,
        30,
        3,
        &Reference::ornstein_uhlenbeck(),
    )?;
    let rmse: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{:.2e}", r.rmse))
        .collect();
    Ok((
        (-0.62..=-0.38).contains(&table.slope),
        format!(
            "slope {:.3} in [-0.62, -0.38]; RMSE [{}]",
            table.slope,
            rmse.join(", ")
        ),
    ))
}

/// Max of the normalized Brownian excursion (same law as the 3D Bessel
/// bridge maximum).
fn excursion_max_cdf(y: f64) -> f64 {
    (1..50).fold(1.0, |s, k| {
        let k2y2 = (k * k) as f64 * y * y;
        s + 2.0 * (1.0 - 4.0 * k2y2) * (-2.0 * k2y2).exp()
    })
}

fn bridge_law() -> Outcome {
    let ensemble = BridgeEnsemble::new(10_000, 2000, 4)?;
    let maxima: Vec<f64> = ensemble.paths().map(|p| p.max_norm()).collect();
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for &y in &[0.8, 1.0, 1.2, 1.5] {
        let empirical = maxima.iter().filter(|&&m| m <= y).count() as f64 / maxima.len() as f64;
        let series = bessel_max_cdf(y, 1000)?;
        worst = worst.max((empirical - series).abs());
        cells.push(format!("{y}: {empirical:.4}/{series:.4}"));
    }
    let at_one = bessel_max_cdf(1.0, 1000)?;
    let oracle_ok =
        (at_one - 0.17792).abs() <= 1e-4 && (at_one - excursion_max_cdf(1.0)).abs() <= 1e-4;
    Ok((
        worst <= 0.015 && oracle_ok,
        format!(
            "max |F_emp - F| = {worst:.4} (<= 0.015) [{}]; series(1) = {at_one:.5}",
            cells.join(", ")
        ),
    ))
}

fn eigenvalues() -> Outcome {
    let zero = principal_eigenvalue(&build_model("0", 1.0)?, 1.0, DEFAULT_MESH)?.mu1;
    let zero_ok = (zero - PI * PI / 2.0).abs() <= 1e-6;
    let ladder: Vec<f64> = eigen_ladder(&ou(), 4.0, DEFAULT_MESH, 3)?
        .iter()
        .map(|e| e.mu1)
        .collect();
    let ordered = ladder[0] > ladder[1] && ladder[1] > ladder[2];
    let near_one = (ladder[2] - 1.0).abs() <= 1e-3;
    let liouville = check_liouville(&ou(), 16.0, 2 * DEFAULT_MESH).is_ok()
        && check_liouville(&build_model("0", 1.0)?, 1.0, 2 * DEFAULT_MESH).is_ok();
    Ok((
        zero_ok && ordered && near_one && liouville,
        format!(
            "zero drift {zero:.9} ({zero_ok}); mu(4,8,16) = {:.12}, {:.12}, {:.12} (strictly decreasing: {ordered}, mu(16) within 1e-3 of 1: {near_one}); Liouville {liouville}",
            ladder[0], ladder[1], ladder[2]
        ),
    ))
}

fn mixture_tail() -> Outcome {
    let model = ou();
    let est = estimate_density(
        &model,
        &uniform_grid(10.0, 200),
        &BridgeEnsemble::new(10_000, 1000, 5)?,
    )?;
    let tm = build_tail(&model, &est, 6.0, 8.0, DEFAULT_MESH)?;
    let ratio = evaluate_mixture(&tm, 12.0)? / ou_fpt_density(12.0)?;
    let mut worst: f64 = 0.0;
    for k in 0..=120 {
        let t = 8.0 + 0.1 * k as f64;
        worst = worst.max((mixture_local_rate(&tm, t, 1e-3)? - 1.0).abs());
    }
    let raw = estimate_rate(&model, &[10.0, 20.0], &BridgeEnsemble::new(100, 1000, 7)?)?;
    Ok((
        (0.5..=2.0).contains(&ratio) && worst <= 0.05,
        format!(
            "mixture(12)/p_1(12) = {ratio:.4} in [0.5, 2]; max |rate - 1| on [8, 20] = {worst:.2e} (<= 0.05); raw N=100 change {:.3}",
            raw.lambda_hat[1] - raw.lambda_hat[0]
        ),
    ))
}

fn baseline_contrast() -> Outcome {
    let config = ComparisonConfig {
        n_paths: 10_000,
        grid_size: 1000,
        seed: 6,
        euler_steps: vec![0.01],
        n_euler: None,
        bridge_correction: true,
        bandwidth: Bandwidth::Silverman,
    };
    let result = compare_methods(
        &ou(),
        &linspace(0.1, 7.0, 70),
        |t| ou_fpt_density(t).unwrap(),
        &config,
    )?;
    let (direct, euler) = (&result.rows[0], &result.rows[1]);
    Ok((
        direct.max_abs_error < euler.max_abs_error,
        format!(
            "direct {:.3e} ({} paths, {:.1} s) vs Euler+KDE {:.3e} ({} paths, {:.1} s)",
            direct.max_abs_error,
            direct.n_paths,
            direct.wall_time,
            euler.max_abs_error,
            euler.n_paths,
            euler.wall_time
        ),
    ))
}

fn run_estimate(threads: usize, dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_bridgefpt"))
        .args([
            "--threads",
            &threads.to_string(),
            "--seed",
            "11",
            "--out-dir",
        ])
        .arg(dir)
        .args([
            "estimate", "--drift", "-z", "--x", "1", "--t-max", "8", "--n", "2000", "--m", "200",
        ])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(run_estimate(1, a.path()) && run_estimate(3, b.path())) {
        return Ok((false, "estimate did not run".into()));
    }
    let same = ["density.csv", "rate.csv"]
        .iter()
        .all(|f| std::fs::read(a.path().join(f)).ok() == std::fs::read(b.path().join(f)).ok());
    Ok((
        same,
        format!("density.csv and rate.csv byte-identical for --threads 1 and 3: {same}"),
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("zero-drift exactness", zero_drift_exactness),
        ("OU density oracle", ou_oracle),
        ("Fig. 1(a) at N = 100", figure_reproduction),
        ("rate small-t limit", small_t_rate),
        ("rate blow-up", rate_blow_up),
        ("1/sqrt(N) convergence", convergence_rate),
        ("bridge maximum law", bridge_law),
        ("eigenvalues", eigenvalues),
        ("mixture tail", mixture_tail),
        ("baseline contrast", baseline_contrast),
        ("thread determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.1} s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
