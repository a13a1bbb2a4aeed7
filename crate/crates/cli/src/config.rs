//! Run configuration: a JSON file, overridden field by field by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bridgefpt::{DriftModel, ModelSpec};
use clap::Args;
use serde::{Deserialize, Serialize};

pub const DEFAULT_T: f64 = 10.0;
pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_N: usize = 10_000;
pub const DEFAULT_M: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_EULER_STEPS: [f64; 2] = [0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralConfig {
    pub b: String,
    pub sigma: String,
    pub level: f64,
    pub start: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    /// Splice time; chosen from the relative standard error when absent.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_splice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<usize>,
    /// Right end of the mixture output grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    /// Euler path count; matched to the direct estimator's wall time when absent.
    #[serde(rename = "N_e", default, skip_serializing_if = "Option::is_none")]
    pub n_euler: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub general: Option<GeneralConfig>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    /// Not written to `meta.json`, so outputs do not depend on where they land.
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

/// Flags shared by every run subcommand. Each mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, env = "FPT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Drift a(z) of the unit-diffusion process (key `drift`).
    #[arg(long, env = "FPT_DRIFT", allow_hyphen_values = true)]
    pub drift: Option<String>,
    /// Start level x > 0 (key `x`).
    #[arg(long, env = "FPT_X")]
    pub x: Option<f64>,
    /// Drift b(y) of a general diffusion (key `general.b`).
    #[arg(long, env = "FPT_B", allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Diffusion coefficient sigma(y) (key `general.sigma`).
    #[arg(long, env = "FPT_SIGMA", allow_hyphen_values = true)]
    pub sigma: Option<String>,
    /// Barrier level of the general diffusion (key `general.level`).
    #[arg(long, env = "FPT_LEVEL", allow_hyphen_values = true)]
    pub level: Option<f64>,
    /// Start of the general diffusion (key `general.start`).
    #[arg(long, env = "FPT_START", allow_hyphen_values = true)]
    pub start: Option<f64>,
    /// Right end of the time grid (key `T`).
    #[arg(long = "t-max", env = "FPT_T_MAX")]
    pub t_max: Option<f64>,
    /// Number of grid times on (0, T] (key `grid_points`).
    #[arg(long = "grid-points", env = "FPT_GRID_POINTS")]
    pub grid_points: Option<usize>,
    /// Number of bridge paths (key `N`).
    #[arg(long = "n", env = "FPT_N")]
    pub n_paths: Option<usize>,
    /// Bridge grid size, even (key `M`).
    #[arg(long = "m", env = "FPT_M")]
    pub grid_size: Option<usize>,
    /// Splice time for the tail (key `tail.T`).
    #[arg(long = "tail-t", env = "FPT_TAIL_T")]
    pub tail_t: Option<f64>,
    /// Eigenproblem domain length (key `tail.n`).
    #[arg(long = "tail-n", env = "FPT_TAIL_N")]
    pub tail_n: Option<f64>,
    /// Eigenproblem mesh (key `tail.mesh`).
    #[arg(long, env = "FPT_MESH")]
    pub mesh: Option<usize>,
    /// Right end of the mixture output grid (key `tail.horizon`).
    #[arg(long = "tail-horizon", env = "FPT_TAIL_HORIZON")]
    pub tail_horizon: Option<f64>,
    /// Euler step(s) for the baseline (key `baseline.h`).
    #[arg(long = "h", env = "FPT_H", value_delimiter = ',')]
    pub h: Option<Vec<f64>>,
    /// Euler path count (key `baseline.N_e`).
    #[arg(long = "n-e", env = "FPT_N_E")]
    pub n_euler: Option<usize>,
    /// Bridge crossing correction in the Euler scheme (key `baseline.correction`).
    #[arg(long, env = "FPT_CORRECTION")]
    pub correction: Option<bool>,
    /// Fixed kernel bandwidth; Silverman's rule when absent (key `baseline.bandwidth`).
    #[arg(long, env = "FPT_BANDWIDTH")]
    pub bandwidth: Option<f64>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub config: RunConfig,
    pub model_spec: ModelSpec,
    pub t_max: f64,
    pub grid_points: usize,
    pub n_paths: usize,
    pub grid_size: usize,
    pub seed: u64,
}

impl Settings {
    pub fn model(&self) -> bridgefpt::Result<DriftModel> {
        self.model_spec.build()
    }

    pub fn t_grid(&self) -> Vec<f64> {
        bridgefpt::estimator::uniform_grid(self.t_max, self.grid_points)
    }

    pub fn tail(&self) -> TailConfig {
        self.config.tail.clone().unwrap_or_default()
    }

    pub fn baseline(&self) -> BaselineConfig {
        self.config.baseline.clone().unwrap_or_default()
    }
}

pub fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

impl ConfigArgs {
    /// File values first, then flag overrides, then defaults; validated.
    pub fn resolve(&self, seed: Option<u64>, out_dir: Option<&Path>) -> anyhow::Result<Settings> {
        let mut c = match &self.config {
            Some(path) => read_config(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = Some(v);
                }
            };
        }
        set!(c.drift, self.drift);
        set!(c.x, self.x);
        set!(c.t_max, self.t_max);
        set!(c.grid_points, self.grid_points);
        set!(c.n_paths, self.n_paths);
        set!(c.grid_size, self.grid_size);
        set!(c.seed, seed);
        if let Some(dir) = out_dir {
            c.out_dir = Some(dir.to_path_buf());
        }
        if self.b.is_some() || self.sigma.is_some() || self.level.is_some() || self.start.is_some()
        {
            let g = c.general.take();
            let pick = |flag: &Option<String>, file: Option<&String>, name: &str| {
                flag.clone()
                    .or_else(|| file.cloned())
                    .with_context(|| format!("general diffusion needs --{name}"))
            };
            let pick_f = |flag: Option<f64>, file: Option<f64>, name: &str| {
                flag.or(file)
                    .with_context(|| format!("general diffusion needs --{name}"))
            };
            c.general = Some(GeneralConfig {
                b: pick(&self.b, g.as_ref().map(|g| &g.b), "b")?,
                sigma: pick(&self.sigma, g.as_ref().map(|g| &g.sigma), "sigma")?,
                level: pick_f(self.level, g.as_ref().map(|g| g.level), "level")?,
                start: pick_f(self.start, g.as_ref().map(|g| g.start), "start")?,
            });
        }
        if self.tail_t.is_some()
            || self.tail_n.is_some()
            || self.mesh.is_some()
            || self.tail_horizon.is_some()
        {
            let t = c.tail.get_or_insert_with(TailConfig::default);
            set!(t.t_splice, self.tail_t);
            set!(t.n, self.tail_n);
            set!(t.mesh, self.mesh);
            set!(t.horizon, self.tail_horizon);
        }
        if self.h.is_some()
            || self.n_euler.is_some()
            || self.correction.is_some()
            || self.bandwidth.is_some()
        {
            let b = c.baseline.get_or_insert_with(BaselineConfig::default);
            set!(b.h, self.h);
            set!(b.n_euler, self.n_euler);
            set!(b.correction, self.correction);
            set!(b.bandwidth, self.bandwidth);
        }
        finish(c)
    }
}

fn finish(mut c: RunConfig) -> anyhow::Result<Settings> {
    let model_spec = match (&c.drift, &c.general) {
        (Some(drift), None) => {
            let x = c.x.context("`x` is required with `drift`")?;
            ModelSpec::Drift {
                drift: drift.clone(),
                x,
            }
        }
        (None, Some(g)) => {
            if c.x.is_some() {
                bail!("`x` is derived from the general diffusion; do not set it");
            }
            ModelSpec::General {
                b: g.b.clone(),
                sigma: g.sigma.clone(),
                level: g.level,
                start: g.start,
            }
        }
        (Some(_), Some(_)) => bail!("give either `drift` + `x` or `general`, not both"),
        (None, None) => bail!("no model: give `drift` + `x` or `general`"),
    };
    let t_max = *c.t_max.get_or_insert(DEFAULT_T);
    let grid_points = *c.grid_points.get_or_insert(DEFAULT_GRID_POINTS);
    let n_paths = *c.n_paths.get_or_insert(DEFAULT_N);
    let grid_size = *c.grid_size.get_or_insert(DEFAULT_M);
    let seed = *c.seed.get_or_insert(DEFAULT_SEED);
    if !(t_max > 0.0 && t_max.is_finite()) {
        bail!("`T` must be positive, got {t_max}");
    }
    if grid_points == 0 {
        bail!("`grid_points` must be at least 1");
    }
    if n_paths < 2 {
        bail!("`N` must be at least 2, got {n_paths}");
    }
    if grid_size < 2 || !grid_size.is_multiple_of(2) {
        bail!("`M` must be even and at least 2, got {grid_size}");
    }
    if let Some(t) = &c.tail {
        if let Some(mesh) = t.mesh {
            if mesh < bridgefpt::tail::MIN_MESH {
                bail!("`tail.mesh` must be at least {}", bridgefpt::tail::MIN_MESH);
            }
        }
        if t.n.is_some_and(|n| !(n > 0.0)) {
            bail!("`tail.n` must be positive");
        }
        if t.t_splice.is_some_and(|s| !(s > 0.0 && s <= t_max)) {
            bail!("`tail.T` must lie in (0, T]");
        }
    }
    if let Some(b) = &c.baseline {
        if let Some(hs) = &b.h {
            if hs.is_empty() || hs.iter().any(|h| !(*h > 0.0)) {
                bail!("`baseline.h` must be a nonempty list of positive steps");
            }
        }
        if b.bandwidth.is_some_and(|w| !(w > 0.0)) {
            bail!("`baseline.bandwidth` must be positive");
        }
    }
    Ok(Settings {
        config: c,
        model_spec,
        t_max,
        grid_points,
        n_paths,
        grid_size,
        seed,
    })
}
