use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bridgefpt::baseline::{compare_methods, Bandwidth, ComparisonConfig};
use bridgefpt::bridge::{bessel_max_cdf, BridgeEnsemble};
use bridgefpt::estimator::{
    convergence_scaling, covariance_diagnostic, estimate_density, linspace, rate_from_density,
    Reference,
};
use bridgefpt::model::{bm_fpt_density, check_assumptions, ou_fpt_density, DEFAULT_PROBE_MAX};
use bridgefpt::tail::{
    build_tail, default_domain, default_splice_time, eigen_ladder, evaluate_mixture, DEFAULT_MESH,
    DEFAULT_RELATIVE_ERROR,
};
use bridgefpt::{DriftModel, GeneralDiffusionSpec};
use clap::Args;
use serde::Serialize;

use crate::config::{ConfigArgs, Settings, DEFAULT_EULER_STEPS};
use crate::output::{rows, write_csv, write_json};
use crate::CliError;

type CliResult<T = ()> = Result<T, CliError>;

fn config_err<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Config(e.into())
}

fn numeric<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Numeric(e.into())
}

fn prepare(
    args: &ConfigArgs,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> CliResult<(Settings, DriftModel, PathBuf)> {
    let settings = args.resolve(seed, out_dir).map_err(config_err)?;
    let model = settings.model().map_err(config_err)?;
    if let Ok(report) = check_assumptions(&model, DEFAULT_PROBE_MAX) {
        if let Some(w) = &report.warning {
            eprintln!("warning: {w}");
        }
    }
    let dir = settings
        .config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(config_err)?;
    Ok((settings, model, dir))
}

/// Closed-form density for the models that have one.
fn oracle(model: &DriftModel) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
    let x = model.x();
    if model.is_zero_drift() {
        Some(Box::new(move |t| bm_fpt_density(x, t)))
    } else if x == 1.0 && model.check_ornstein_uhlenbeck().is_ok() {
        Some(Box::new(|t| ou_fpt_density(t).unwrap_or(0.0)))
    } else {
        None
    }
}

pub fn estimate(args: &ConfigArgs, seed: Option<u64>, out_dir: Option<&Path>) -> CliResult {
    let (s, model, dir) = prepare(args, seed, out_dir)?;
    let grid = s.t_grid();
    let ensemble = BridgeEnsemble::new(s.n_paths, s.grid_size, s.seed).map_err(config_err)?;
    let est = estimate_density(&model, &grid, &ensemble).map_err(numeric)?;
    let rate = rate_from_density(&model, &est).map_err(numeric)?;

    let density = rows(&[&est.t_grid, &est.p_hat, &est.std_err, &rate.lambda_hat]);
    write_csv(
        &dir.join("density.csv"),
        "t,p_hat,std_err,lambda_hat",
        density.iter().map(Vec::as_slice),
    )
    .map_err(numeric)?;
    let n = grid.len();
    let rate_rows = rows(&[
        &rate.t_grid,
        &rate.lambda_hat,
        &vec![rate.lower_bound; n],
        &vec![rate.upper_bound; n],
        &vec![rate.small_t_limit; n],
    ]);
    write_csv(
        &dir.join("rate.csv"),
        "t,lambda_hat,lower_bound,upper_bound,small_t_limit",
        rate_rows.iter().map(Vec::as_slice),
    )
    .map_err(numeric)?;
    write_json(&dir.join("meta.json"), &s.config).map_err(numeric)?;
    println!(
        "wrote {} grid points to {} (N = {}, M = {}, seed = {})",
        n,
        dir.display(),
        s.n_paths,
        s.grid_size,
        s.seed
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Reference density CSV with columns `t,p` for models without a closed form.
    #[arg(long, env = "FPT_REFERENCE")]
    pub reference: Option<PathBuf>,
    /// Replications for the coverage and scaling checks; 0 skips them.
    #[arg(long, default_value_t = 30, env = "FPT_REPLICATIONS")]
    pub replications: usize,
    /// Paths for the bridge-maximum check.
    #[arg(long = "bessel-paths", default_value_t = 10_000)]
    pub bessel_paths: usize,
}

struct Check {
    name: String,
    value: String,
    pass: bool,
}

fn read_reference(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut ts, mut ps) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate().skip(1) {
        let mut cols = line.split(',');
        let mut next = || -> anyhow::Result<f64> {
            cols.next()
                .ok_or_else(|| anyhow!("line {}: expected `t,p`", k + 1))?
                .trim()
                .parse()
                .with_context(|| format!("line {}", k + 1))
        };
        ts.push(next()?);
        ps.push(next()?);
    }
    Ok((ts, ps))
}

fn coverage_check(name: &str, p_hat: &[f64], std_err: &[f64], reference: &[f64]) -> Check {
    let inside = p_hat
        .iter()
        .zip(std_err)
        .zip(reference)
        .filter(|((p, se), r)| (*p - *r).abs() <= 4.0 * *se)
        .count();
    let frac = inside as f64 / p_hat.len() as f64;
    Check {
        name: name.into(),
        value: format!("{inside}/{} within 4 SE", p_hat.len()),
        pass: frac >= 0.95,
    }
}

pub fn validate(args: &ValidateArgs, seed: Option<u64>, out_dir: Option<&Path>) -> CliResult {
    let (s, model, _) = prepare(&args.config, seed, out_dir)?;
    let mut checks = Vec::new();
    let ensemble = |n: usize| BridgeEnsemble::new(n, s.grid_size, s.seed).map_err(config_err);
    let is_ou = model.x() == 1.0 && model.check_ornstein_uhlenbeck().is_ok();

    if model.is_zero_drift() {
        let grid = s.t_grid();
        let est = estimate_density(&model, &grid, &ensemble(s.n_paths)?).map_err(numeric)?;
        let exact = grid
            .iter()
            .enumerate()
            .all(|(j, &t)| est.p_hat[j] == bm_fpt_density(model.x(), t) && est.std_err[j] == 0.0);
        checks.push(Check {
            name: "zero drift reproduces q_x exactly".into(),
            value: if exact {
                "exact".into()
            } else {
                "mismatch".into()
            },
            pass: exact,
        });
    } else if is_ou {
        let grid = linspace(0.1, 7.0, 140);
        let est = estimate_density(&model, &grid, &ensemble(s.n_paths)?).map_err(numeric)?;
        let reference: Vec<f64> = grid.iter().map(|&t| ou_fpt_density(t).unwrap()).collect();
        checks.push(coverage_check(
            "OU density on [0.1, 7]",
            &est.p_hat,
            &est.std_err,
            &reference,
        ));
        if args.replications > 0 {
            let reps = args
                .replications
                .max(bridgefpt::estimator::MIN_REPLICATIONS);
            let cov = covariance_diagnostic(
                &model,
                &[(1.0, 1.0)],
                s.n_paths,
                s.grid_size,
                reps,
                s.seed,
                &Reference::ornstein_uhlenbeck(),
            )
            .map_err(numeric)?;
            let z95 = cov.z_quantile(0, 0.95);
            checks.push(Check {
                name: "OU z-score 95th percentile at t = 1".into(),
                value: format!("{z95:.3} (R = {reps})"),
                pass: z95 <= 2.3,
            });
            let n_list: Vec<usize> = [100, 10, 1]
                .iter()
                .map(|d| (s.n_paths / d).max(2))
                .collect();
            let table = convergence_scaling(
                &model,
                &linspace(0.1, 5.0, 50),
                &n_list,
                s.grid_size,
                args.replications,
                s.seed,
                &Reference::ornstein_uhlenbeck(),
            )
            .map_err(numeric)?;
            checks.push(Check {
                name: format!("RMSE slope over N = {n_list:?}"),
                value: format!("{:.3}", table.slope),
                pass: (-0.62..=-0.38).contains(&table.slope),
            });
        }
    } else if let Some(path) = &args.reference {
        let (ts, ps) = read_reference(path).map_err(config_err)?;
        let est = estimate_density(&model, &ts, &ensemble(s.n_paths)?).map_err(config_err)?;
        checks.push(coverage_check(
            "density against reference CSV",
            &est.p_hat,
            &est.std_err,
            &ps,
        ));
    } else {
        return Err(config_err(anyhow!(
            "no oracle for this drift: use a = 0, a = -z with x = 1, or pass --reference"
        )));
    }

    let bessel = BridgeEnsemble::new(args.bessel_paths, 2000, s.seed).map_err(config_err)?;
    let maxima: Vec<f64> = bessel.paths().map(|p| p.max_norm()).collect();
    let mut worst: f64 = 0.0;
    for y in [0.8, 1.0, 1.2, 1.5] {
        let empirical = maxima.iter().filter(|&&m| m <= y).count() as f64 / maxima.len() as f64;
        let series = bessel_max_cdf(y, 1000).map_err(numeric)?;
        worst = worst.max((empirical - series).abs());
    }
    checks.push(Check {
        name: "bridge maximum CDF at y = 0.8, 1.0, 1.2, 1.5".into(),
        value: format!("max deviation {worst:.4}"),
        pass: worst <= 0.015,
    });

    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        println!(
            "{:<width$}  {:<28}  {}",
            c.name,
            c.value,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if checks.iter().all(|c| c.pass) {
        Ok(())
    } else {
        Err(CliError::ChecksFailed)
    }
}

#[derive(Serialize)]
struct LadderEntry {
    n: f64,
    mesh: usize,
    mu1: f64,
    mu_mesh: f64,
    mu_refined: f64,
}

#[derive(Serialize)]
struct TailSidecar {
    #[serde(rename = "T")]
    t_splice: f64,
    lambda: f64,
    c_star: f64,
    n: f64,
    mesh: usize,
    /// Raw rate estimate at the right end of the grid, reported next to `lambda`.
    lambda_hat_at_t_max: f64,
}

pub fn tail(args: &ConfigArgs, seed: Option<u64>, out_dir: Option<&Path>) -> CliResult {
    let (s, model, dir) = prepare(args, seed, out_dir)?;
    let tc = s.tail();
    if tc.enabled == Some(false) {
        return Err(config_err(anyhow!("tail is disabled in the configuration")));
    }
    let grid = s.t_grid();
    let ensemble = BridgeEnsemble::new(s.n_paths, s.grid_size, s.seed).map_err(config_err)?;
    let est = estimate_density(&model, &grid, &ensemble).map_err(numeric)?;
    let t_splice = match tc.t_splice {
        Some(t) => t,
        None => default_splice_time(&est, DEFAULT_RELATIVE_ERROR).unwrap_or(s.t_max),
    };
    let n = tc.n.unwrap_or_else(|| default_domain(model.x()));
    let mesh = tc.mesh.unwrap_or(DEFAULT_MESH);

    let ladder = eigen_ladder(&model, n, mesh, 3).map_err(numeric)?;
    let tm = build_tail(&model, &est, t_splice, n, mesh).map_err(|e| match e {
        bridgefpt::Error::InvalidArgument(_) => config_err(e),
        e => numeric(e),
    })?;

    let ladder_json: Vec<LadderEntry> = ladder
        .iter()
        .map(|e| LadderEntry {
            n: e.n,
            mesh: e.mesh,
            mu1: e.mu1,
            mu_mesh: e.mu_mesh,
            mu_refined: e.mu_refined,
        })
        .collect();
    write_json(
        &dir.join("eigen.json"),
        &serde_json::json!({ "ladder": ladder_json }),
    )
    .map_err(numeric)?;

    let horizon = tc.horizon.unwrap_or(2.0 * s.t_max);
    let points = ((horizon / s.t_max) * s.grid_points as f64).round() as usize;
    let out_grid: Vec<f64> = (1..=points)
        .map(|k| s.t_max * k as f64 / s.grid_points as f64)
        .collect();
    let values = out_grid
        .iter()
        .map(|&t| evaluate_mixture(&tm, t))
        .collect::<bridgefpt::Result<Vec<_>>>()
        .map_err(numeric)?;
    let mixture = rows(&[&out_grid, &values]);
    write_csv(
        &dir.join("density_mixture.csv"),
        "t,p_mixture",
        mixture.iter().map(Vec::as_slice),
    )
    .map_err(numeric)?;
    let rate_end = -est.log_mean.last().unwrap() / s.t_max;
    write_json(
        &dir.join("tail.json"),
        &TailSidecar {
            t_splice: tm.t_splice,
            lambda: tm.lambda,
            c_star: tm.c_star,
            n,
            mesh,
            lambda_hat_at_t_max: rate_end,
        },
    )
    .map_err(numeric)?;
    for e in &ladder {
        println!("n = {:<8} mu1 = {:.10}", e.n, e.mu1);
    }
    println!(
        "T = {}, lambda = {:.10}, c_star = {:.6e}; raw rate at t = {}: {:.6}",
        tm.t_splice, tm.lambda, tm.c_star, s.t_max, rate_end
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareMeta {
    h: Vec<f64>,
    #[serde(rename = "N_e")]
    n_euler: Vec<usize>,
    correction: bool,
    bandwidth: Vec<f64>,
    rows: Vec<bridgefpt::baseline::ComparisonRow>,
}

pub fn compare(args: &ConfigArgs, seed: Option<u64>, out_dir: Option<&Path>) -> CliResult {
    let (s, model, dir) = prepare(args, seed, out_dir)?;
    let bc = s.baseline();
    if bc.enabled == Some(false) {
        return Err(config_err(anyhow!(
            "baseline is disabled in the configuration"
        )));
    }
    let reference = oracle(&model).ok_or_else(|| {
        config_err(anyhow!(
            "compare needs a closed-form oracle: a = 0, or a = -z with x = 1"
        ))
    })?;
    let config = ComparisonConfig {
        n_paths: s.n_paths,
        grid_size: s.grid_size,
        seed: s.seed,
        euler_steps: bc.h.clone().unwrap_or_else(|| DEFAULT_EULER_STEPS.to_vec()),
        n_euler: bc.n_euler,
        bridge_correction: bc.correction.unwrap_or(true),
        bandwidth: bc.bandwidth.map_or(Bandwidth::Silverman, Bandwidth::Fixed),
    };
    let grid = s.t_grid();
    let result = compare_methods(&model, &grid, reference, &config).map_err(numeric)?;

    println!(
        "{:<22} {:>10} {:>10} {:>14} {:>14}",
        "method", "paths", "wall [s]", "max abs err", "mean abs err"
    );
    for r in &result.rows {
        println!(
            "{:<22} {:>10} {:>10.3} {:>14.6e} {:>14.6e}",
            r.method, r.n_paths, r.wall_time, r.max_abs_error, r.mean_abs_error
        );
    }
    for curves in &result.euler {
        let cdf = rows(&[&grid, &curves.cdf]);
        write_csv(
            &dir.join(format!("euler_cdf_h{}.csv", curves.h)),
            "t,cdf_hat",
            cdf.iter().map(Vec::as_slice),
        )
        .map_err(numeric)?;
        let kde = rows(&[&grid, &curves.kde.values]);
        write_csv(
            &dir.join(format!("euler_kde_h{}.csv", curves.h)),
            "t,kde_hat",
            kde.iter().map(Vec::as_slice),
        )
        .map_err(numeric)?;
    }
    write_json(
        &dir.join("compare.json"),
        &CompareMeta {
            h: config.euler_steps.clone(),
            n_euler: result.euler.iter().map(|c| c.n_paths).collect(),
            correction: config.bridge_correction,
            bandwidth: result.euler.iter().map(|c| c.kde.bandwidth).collect(),
            rows: result.rows,
        },
    )
    .map_err(numeric)?;
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct LampertiArgs {
    /// Drift b(y).
    #[arg(long, env = "FPT_B", allow_hyphen_values = true)]
    pub b: String,
    /// Diffusion coefficient sigma(y) > 0.
    #[arg(long, env = "FPT_SIGMA", allow_hyphen_values = true)]
    pub sigma: String,
    /// Barrier level.
    #[arg(long, env = "FPT_LEVEL", allow_hyphen_values = true)]
    pub level: f64,
    /// Start, above the level.
    #[arg(long, env = "FPT_START", allow_hyphen_values = true)]
    pub start: f64,
    /// Sample the transformed drift on [0, z_max] (default max(10, x)).
    #[arg(long = "z-max")]
    pub z_max: Option<f64>,
    /// Samples of the transformed drift.
    #[arg(long, default_value_t = 21)]
    pub samples: usize,
}

pub fn lamperti(args: &LampertiArgs) -> CliResult {
    let spec = GeneralDiffusionSpec::parse(&args.b, &args.sigma, args.level, args.start)
        .map_err(config_err)?;
    let result = bridgefpt::lamperti_transform(&spec).map_err(|e| match e {
        bridgefpt::Error::NonPositiveSigma { .. } | bridgefpt::Error::InvalidArgument(_) => {
            config_err(e)
        }
        e => numeric(e),
    })?;
    let z_max = args.z_max.unwrap_or(result.x.max(10.0));
    let samples = args.samples.max(1);
    let drift: Vec<[f64; 2]> = (0..=samples)
        .map(|k| {
            let z = z_max * k as f64 / samples as f64;
            [z, result.model.a(z)]
        })
        .collect();
    let out = serde_json::json!({ "x": result.x, "drift": drift });
    println!("{}", serde_json::to_string_pretty(&out).map_err(numeric)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(drift: &str, n: usize) -> ConfigArgs {
        ConfigArgs {
            drift: Some(drift.into()),
            x: Some(1.0),
            t_max: Some(5.0),
            grid_points: Some(50),
            n_paths: Some(n),
            grid_size: Some(100),
            ..Default::default()
        }
    }

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    fn column(csv: &str, j: usize) -> Vec<f64> {
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').nth(j).unwrap().parse().unwrap())
            .collect()
    }

    #[test]
    fn zero_drift_density_is_the_brownian_density() {
        let dir = tempfile::tempdir().unwrap();
        estimate(&args("0", 1000), Some(7), Some(dir.path())).unwrap();
        let csv = read(dir.path(), "density.csv");
        assert!(csv.starts_with("t,p_hat,std_err,lambda_hat\n"));
        assert!(!csv.contains('\r'));
        for ((t, p), se) in column(&csv, 0)
            .iter()
            .zip(column(&csv, 1))
            .zip(column(&csv, 2))
        {
            assert_eq!(p, bm_fpt_density(1.0, *t));
            assert_eq!(se, 0.0);
        }
        assert!(column(&read(dir.path(), "rate.csv"), 1)
            .iter()
            .all(|&l| l == 0.0));
    }

    #[test]
    fn outputs_do_not_depend_on_threads_and_meta_reproduces_the_run() {
        let run = |threads: usize, dir: &Path| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate(&args("-z", 300), Some(11), Some(dir)).unwrap())
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(1, a.path());
        run(3, b.path());
        for name in ["density.csv", "rate.csv", "meta.json"] {
            assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
        }

        let c = tempfile::tempdir().unwrap();
        let from_meta = ConfigArgs {
            config: Some(a.path().join("meta.json")),
            ..Default::default()
        };
        estimate(&from_meta, None, Some(c.path())).unwrap();
        for name in ["density.csv", "rate.csv", "meta.json"] {
            assert_eq!(read(a.path(), name), read(c.path(), name), "{name}");
        }
    }

    #[test]
    fn errors_are_classified() {
        let dir = tempfile::tempdir().unwrap();
        let unknown = estimate(&args("-w", 100), None, Some(dir.path()));
        assert!(matches!(unknown, Err(CliError::Config(_))));
        let missing = ConfigArgs {
            config: Some(dir.path().join("absent.json")),
            ..Default::default()
        };
        assert!(matches!(
            estimate(&missing, None, Some(dir.path())),
            Err(CliError::Config(_))
        ));
        // log(12 - z) fails once a radius reaches 12.
        let blowup = ConfigArgs {
            t_max: Some(400.0),
            ..args("log(12 - z)", 100)
        };
        assert!(matches!(
            estimate(&blowup, None, Some(dir.path())),
            Err(CliError::Numeric(_))
        ));
        let no_oracle = ConfigArgs {
            x: Some(2.0),
            ..args("-z", 100)
        };
        assert!(matches!(
            compare(&no_oracle, None, Some(dir.path())),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn mixture_is_continuous_at_the_splice() {
        let dir = tempfile::tempdir().unwrap();
        let a = ConfigArgs {
            tail_t: Some(3.0),
            tail_n: Some(8.0),
            mesh: Some(500),
            ..args("-z", 500)
        };
        tail(&a, Some(5), Some(dir.path())).unwrap();
        let csv = read(dir.path(), "density_mixture.csv");
        let (t, p) = (column(&csv, 0), column(&csv, 1));
        assert_eq!(*t.last().unwrap(), 10.0);
        let j = t.iter().position(|&v| (v - 3.0).abs() < 1e-12).unwrap();

        let est = estimate_density(
            &bridgefpt::build_model("-z", 1.0).unwrap(),
            &bridgefpt::estimator::uniform_grid(5.0, 50),
            &BridgeEnsemble::new(500, 100, 5).unwrap(),
        )
        .unwrap();
        assert_eq!(p[j], est.p_hat[est.index_of(3.0).unwrap()]);
        assert_eq!(p[j - 1], est.p_hat[est.index_of(t[j - 1]).unwrap()]);
        let side: serde_json::Value = serde_json::from_str(&read(dir.path(), "tail.json")).unwrap();
        let lambda = side["lambda"].as_f64().unwrap();
        let expected = p[j]
            * (bm_fpt_density(1.0, t[j + 1]) / bm_fpt_density(1.0, t[j]))
            * (-lambda * (t[j + 1] - t[j])).exp();
        assert!((p[j + 1] - expected).abs() < 1e-12 * expected);
        let eigen: serde_json::Value =
            serde_json::from_str(&read(dir.path(), "eigen.json")).unwrap();
        assert_eq!(eigen["ladder"].as_array().unwrap().len(), 3);
    }
}
