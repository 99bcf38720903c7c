//! TOML configuration shared by every subcommand.

use std::path::PathBuf;

use serde::Deserialize;

use dptraj::config::RunConfig;
use dptraj::data::SdeSpec;
use dptraj::init::ClusterOptions;
use dptraj::TimeGrid;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    /// Root seed; `--seed` overrides it.
    pub seed: u64,
    pub simulate: Option<SimulateSection>,
    pub init: InitSection,
    pub run: RunConfig,
    pub privacy: PrivacySection,
    pub subsample: Option<SubsampleSection>,
    pub sample: SampleSection,
    pub eval: EvalSection,
}

impl CliConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.run.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Observation grid: `times` uniform points on `[0, 1]`, or an explicit `grid`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub times: Option<usize>,
    pub grid: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid, CliError> {
        match (&self.times, &self.grid) {
            (Some(t), None) => TimeGrid::uniform(*t, 0.0, 1.0).map_err(|e| CliError::Config(e.to_string())),
            (None, Some(g)) => TimeGrid::new(g.clone()).map_err(|e| CliError::Config(e.to_string())),
            _ => Err(CliError::Config("give exactly one of `times` or `grid`".into())),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateSection {
    /// Three-branch planar benchmark.
    Multimodal {
        #[serde(default = "default_n_per_mode")]
        n_per_mode: usize,
        #[serde(default = "default_noise_var")]
        noise_var: f64,
        #[serde(default)]
        times: Option<usize>,
        #[serde(default)]
        grid: Option<Vec<f64>>,
    },
    /// Euler–Maruyama simulation of an SDE from the drift registry.
    Sde {
        sde: SdeSpec,
        n_paths: usize,
        #[serde(default)]
        times: Option<usize>,
        #[serde(default)]
        grid: Option<Vec<f64>>,
        #[serde(default = "default_steps")]
        steps_per_gap: usize,
        #[serde(default = "default_true")]
        one_point_per_person: bool,
    },
    /// Raw `{id, s, x}` records binned onto the grid.
    Raw {
        path: PathBuf,
        #[serde(default)]
        times: Option<usize>,
        #[serde(default)]
        grid: Option<Vec<f64>>,
        #[serde(default)]
        arc_length: bool,
    },
}

impl SimulateSection {
    pub fn grid_spec(&self) -> GridSpec {
        let (times, grid) = match self {
            SimulateSection::Multimodal { times, grid, .. }
            | SimulateSection::Sde { times, grid, .. }
            | SimulateSection::Raw { times, grid, .. } => (times, grid),
        };
        GridSpec {
            times: *times,
            grid: grid.clone(),
        }
    }
}

fn default_n_per_mode() -> usize {
    1000
}

fn default_noise_var() -> f64 {
    0.005
}

fn default_steps() -> usize {
    10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSection {
    /// Data-independent `N(mean, variance I)` particles; `mean` defaults to the origin.
    Gaussian {
        #[serde(default)]
        mean: Option<Vec<f64>>,
        #[serde(default = "default_variance")]
        variance: f64,
    },
    /// Data-independent uniform particles in `[lo, hi]`.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Private per-marginal mean.
    Mean {
        eps: f64,
        delta: f64,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
    /// Private k-means with noisy weights.
    Cluster {
        eps: f64,
        delta: f64,
        #[serde(default = "default_jitter")]
        jitter: f64,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_lloyd")]
        lloyd_iters: usize,
        #[serde(default = "default_cells")]
        seed_cells: usize,
    },
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection::Gaussian {
            mean: None,
            variance: default_variance(),
        }
    }
}

fn default_k() -> usize {
    ClusterOptions::default().k
}

fn default_lloyd() -> usize {
    ClusterOptions::default().lloyd_iters
}

fn default_cells() -> usize {
    ClusterOptions::default().seed_cells
}

fn default_variance() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacySection {
    /// δ values at which the report converts the composed guarantee.
    pub deltas: Vec<f64>,
    /// Choose the subsampling rate so the descent phase alone meets this budget.
    pub calibrate: Option<Budget>,
}

impl Default for PrivacySection {
    fn default() -> Self {
        Self {
            deltas: vec![1e-5],
            calibrate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub eps: f64,
    pub delta: f64,
}

/// Fit on `z` of the `T` observation times.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsampleSection {
    pub z: usize,
    #[serde(default = "default_true")]
    pub keep_endpoints: bool,
    /// Points materialized for each privatized endpoint snapshot.
    #[serde(default = "default_endpoint_points")]
    pub endpoint_points: usize,
}

fn default_endpoint_points() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    #[default]
    Entropic,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    pub n_paths: usize,
    /// `"grid"` or a comma-separated list of times.
    pub times: String,
    pub plans: PlanKind,
    /// Allowed disagreement between consecutive plans on their shared marginal.
    pub chain_tol: f64,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            n_paths: 50,
            times: "grid".into(),
            plans: PlanKind::Entropic,
            chain_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    W2,
    Df,
    Hellinger,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::W2 => "w2",
            Metric::Df => "df",
            Metric::Hellinger => "hellinger",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub metrics: Vec<Metric>,
    /// Points per side for W₂.
    pub max_points: usize,
    /// Smoothing bandwidth for DF and Hellinger; defaults to `run.sigma`.
    pub sigma: Option<f64>,
    pub cells: usize,
    /// Quadrature box padding in units of `sigma`.
    pub margin: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::W2],
            max_points: 200,
            sigma: None,
            cells: 200,
            margin: 6.0,
        }
    }
}
