//! Subcommands of the `dptraj` binary as library functions.
//!
//! Every command reads and writes plain files in a directory:
//! `dataset.jsonl` + `grid.json` for observations, `particles.jsonl` +
//! `grid.json` + `plans.json` + `ledger.json` + `privacy.json` for a fit,
//! `trajectories.jsonl` for sampled paths and `metrics.csv` for evaluations.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dptraj::data::{arc_length_reparametrize, bin_raw, make_multimodal, marginalize, simulate_sde};
use dptraj::eot::compose_plans;
use dptraj::eval::{data_fit_value, hellinger_smoothed, w2_over_time, QuadratureGrid};
use dptraj::init::{
    cluster_ledger, gaussian_init, materialize_particles, mean_ledger, private_cluster_init, private_mean_init,
    uniform_box_init, ClusterOptions, WarmStart,
};
use dptraj::io::{self, MetricRow, PlansFile};
use dptraj::mfld::{run, RunOptions};
use dptraj::privacy::{calibrate_rho, ledger_compose, LedgerEntry, PrivacyLedger, PrivacyReport};
use dptraj::rng::RngKey;
use dptraj::sampler::{sample_exact_chain, sample_paths, to_trajectory_set};
use dptraj::subsample::{restrict_dataset, subsample_grid, PrivateEndpoints};
use dptraj::{Error, ParticleSystem, PointCloud, TemporalDataset, TimeGrid};

pub use config::{CliConfig, InitSection, Metric, PlanKind, SimulateSection};

pub const DATASET: &str = "dataset.jsonl";
pub const GRID: &str = "grid.json";
pub const TRUTH: &str = "truth.jsonl";
pub const PARTICLES: &str = "particles.jsonl";
pub const PLANS: &str = "plans.json";
pub const LEDGER: &str = "ledger.json";
pub const PRIVACY: &str = "privacy.json";
pub const WARM_START: &str = "warm_start.json";
pub const TRAJECTORIES: &str = "trajectories.jsonl";
pub const METRICS: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoint";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

// Stream roots under the run seed.
const KEY_DATA: u64 = 0;
const KEY_INIT: u64 = 1;
const KEY_JITTER: u64 = 2;
const KEY_RUN: u64 = 3;
const KEY_SAMPLE: u64 = 4;
const KEY_EVAL: u64 = 5;
const KEY_GRID: u64 = 6;
const KEY_ENDPOINTS: u64 = 7;

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> dptraj::Result<()>) -> CliResult<()> {
    let mut w = io::create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_grid(dir: &Path) -> CliResult<TimeGrid> {
    Ok(io::read_grid(io::open(&dir.join(GRID))?)?)
}

pub fn read_dataset_dir(dir: &Path) -> CliResult<TemporalDataset> {
    let grid = read_grid(dir)?;
    Ok(io::read_dataset(io::open(&dir.join(DATASET))?, &grid)?)
}

pub fn read_particles_dir(dir: &Path) -> CliResult<ParticleSystem> {
    let grid = read_grid(dir)?;
    Ok(io::read_particles(io::open(&dir.join(PARTICLES))?, &grid)?)
}

/// Writes `dataset.jsonl`, `grid.json` and, when known, `truth.jsonl`.
pub fn cmd_simulate(cfg: &CliConfig, out: &Path) -> CliResult<()> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    let grid = sim.grid_spec().build()?;
    let key = RngKey::root(cfg.seed).child(KEY_DATA);
    let (dataset, truth) = match sim {
        SimulateSection::Multimodal { n_per_mode, noise_var, .. } => {
            let mm = make_multimodal::<f64>(*n_per_mode, &grid, *noise_var, &key)?;
            (mm.dataset, Some(mm.truth))
        }
        SimulateSection::Sde {
            sde,
            n_paths,
            steps_per_gap,
            one_point_per_person,
            ..
        } => {
            let trajs = simulate_sde::<f64>(sde, *n_paths, &grid, *steps_per_gap, &key.child(0))?;
            let ds = marginalize(&trajs, &grid, *one_point_per_person, &key.child(1))?;
            (ds, Some(trajs))
        }
        SimulateSection::Raw { path, arc_length, .. } => {
            let mut raw = io::read_raw(io::open(path)?)?;
            if *arc_length {
                raw = arc_length_reparametrize(&raw)?;
            }
            (bin_raw(&raw, &grid, &key)?, None)
        }
    };
    fs::create_dir_all(out)?;
    write_file(&out.join(GRID), |w| io::write_grid(w, &grid))?;
    write_file(&out.join(DATASET), |w| io::write_dataset(w, &dataset))?;
    if let Some(t) = truth {
        write_file(&out.join(TRUTH), |w| io::write_trajectories(w, &t))?;
    }
    Ok(())
}

fn partitions(t: usize) -> Vec<String> {
    (0..t).map(|i| format!("t{i}")).collect()
}

/// Run settings after applying the seed and the optional budget calibration.
/// `t` is the number of observation times before any time subsampling.
pub fn effective_run_config(cfg: &CliConfig, t: usize) -> CliResult<dptraj::config::RunConfig> {
    let mut run = cfg.run.clone();
    run.seed = cfg.seed;
    if let Some(b) = cfg.privacy.calibrate {
        let schedule = run.schedule();
        if schedule.len() != 1 || !(schedule[0].tau > 0.0) {
            return Err(CliError::Config(
                "privacy.calibrate needs a single phase with tau > 0".into(),
            ));
        }
        let amp = amplification(cfg, t);
        let rho = calibrate_rho(schedule[0].iterations, schedule[0].tau, b.eps, b.delta)? / amp.unwrap_or(1.0);
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(CliError::Config(format!("calibrated subsample rate {rho} is outside (0, 1]")));
        }
        run.subsample_rate = rho;
    }
    run.validate()?;
    Ok(run)
}

fn amplification(cfg: &CliConfig, t: usize) -> Option<f64> {
    cfg.subsample.as_ref().map(|sub| sub.z as f64 / t as f64)
}

/// Ledger the fit would record, without touching data. `t` only labels partitions.
pub fn planned_ledger(cfg: &CliConfig, t: usize) -> CliResult<PrivacyLedger> {
    let run = effective_run_config(cfg, t)?;
    let mut ledger = PrivacyLedger::new();
    match &cfg.init {
        InitSection::Mean { eps, delta, .. } => ledger.extend(mean_ledger(t, *eps, *delta)),
        InitSection::Cluster { eps, delta, k, .. } => ledger.extend(cluster_ledger(t, *eps, *delta, *k)?),
        InitSection::Gaussian { .. } | InitSection::UniformBox { .. } => {}
    }
    let amp = amplification(cfg, t);
    for (p, phase) in run.schedule().iter().enumerate() {
        if phase.iterations == 0 {
            continue;
        }
        let noisy = run.inject_noise && phase.tau > 0.0;
        ledger.push(LedgerEntry::dpsgd(
            format!("phase{p}"),
            partitions(t),
            run.subsample_rate,
            phase.iterations,
            if noisy { phase.tau } else { 0.0 },
            amp,
        )?);
    }
    Ok(ledger)
}

fn warm_start(cfg: &CliConfig, ds: &TemporalDataset, key: &RngKey) -> CliResult<Option<(WarmStart, f64)>> {
    let radius = cfg.run.radius;
    Ok(match &cfg.init {
        InitSection::Mean { eps, delta, jitter } => Some((private_mean_init(ds, radius, *eps, *delta, key)?, *jitter)),
        InitSection::Cluster {
            eps,
            delta,
            jitter,
            k,
            lloyd_iters,
            seed_cells,
        } => {
            let opts = ClusterOptions {
                k: *k,
                lloyd_iters: *lloyd_iters,
                seed_cells: *seed_cells,
            };
            Some((private_cluster_init(ds, radius, *eps, *delta, &opts, key)?, *jitter))
        }
        _ => None,
    })
}

fn restrict_warm_start(ws: &WarmStart, subset: &[usize]) -> WarmStart {
    WarmStart {
        times: subset.iter().map(|&i| ws.times[i]).collect(),
        marginals: subset.iter().map(|&i| ws.marginals[i].clone()).collect(),
        ledger: ws.ledger.clone(),
    }
}

fn compose_report(ledger: &PrivacyLedger, deltas: &[f64]) -> CliResult<PrivacyReport> {
    Ok(ledger_compose(ledger, deltas)?)
}

/// Summary of a finished fit.
#[derive(Debug, Clone)]
pub struct FitSummary {
    pub particles: ParticleSystem,
    pub report: PrivacyReport,
    pub iterations: usize,
}

/// Initializes, runs every phase and writes the fit directory.
///
/// On a runtime failure the ledger of the phases already started is still
/// written, and the error names the checkpoint directory when checkpoints
/// are enabled.
pub fn cmd_fit(cfg: &CliConfig, data_dir: &Path, out: &Path, deltas: Option<&[f64]>) -> CliResult<FitSummary> {
    let full = read_dataset_dir(data_dir)?;
    let run_cfg = effective_run_config(cfg, full.len())?;
    let root = RngKey::root(cfg.seed);
    let deltas = deltas.unwrap_or(&cfg.privacy.deltas).to_vec();
    let mut ledger = PrivacyLedger::new();

    let ws = warm_start(cfg, &full, &root.child(KEY_INIT))?;
    if let Some((w, _)) = &ws {
        ledger.extend(w.ledger.clone());
    }

    let (dataset, ws, amp) = match &cfg.subsample {
        Some(sub) => {
            let subset = subsample_grid(full.len(), sub.z, sub.keep_endpoints, &root.child(KEY_GRID))?;
            let endpoints = ws.as_ref().map(|(w, jitter)| PrivateEndpoints {
                warm_start: w,
                m: sub.endpoint_points,
                jitter_std: *jitter,
                key: root.child(KEY_ENDPOINTS),
            });
            let ds = restrict_dataset(&full, &subset, endpoints.as_ref(), true)?;
            let ws = ws.map(|(w, j)| (restrict_warm_start(&w, &subset), j));
            (ds, ws, amplification(cfg, full.len()))
        }
        None => (full, ws, None),
    };

    let grid = dataset.grid().clone();
    let m = run_cfg.particles;
    let init = match (&cfg.init, &ws) {
        (_, Some((w, jitter))) => materialize_particles::<f64>(w, m, *jitter, &root.child(KEY_JITTER))?,
        (InitSection::Gaussian { mean, variance }, None) => {
            let mean = mean.clone().unwrap_or_else(|| vec![0.0; dataset.dim()]);
            gaussian_init::<f64>(&grid, m, &mean, *variance, &root.child(KEY_INIT))?
        }
        (InitSection::UniformBox { lo, hi }, None) => uniform_box_init::<f64>(&grid, m, lo, hi, &root.child(KEY_INIT))?,
        _ => unreachable!("private initializers always produce a warm start"),
    };

    fs::create_dir_all(out)?;
    if let Some((w, _)) = &ws {
        write_file(&out.join(WARM_START), |wr| io::write_json(wr, w))?;
    }
    let checkpoint = (run_cfg.checkpoint_every > 0).then(|| out.join(CHECKPOINT_DIR));
    if let Some(dir) = &checkpoint {
        fs::create_dir_all(dir)?;
    }
    let result = run(
        &dataset,
        &run_cfg,
        init,
        &root.child(KEY_RUN),
        &mut ledger,
        RunOptions {
            checkpoint_dir: checkpoint.clone(),
            amplification: amp,
            ..RunOptions::default()
        },
    );
    write_file(&out.join(LEDGER), |w| io::write_json(w, &ledger))?;
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            let at = checkpoint.map_or_else(
                || "no checkpoint written (checkpoint_every = 0)".to_string(),
                |d| format!("last checkpoint in {}", d.display()),
            );
            return Err(CliError::Runtime(format!("{e}; {at}")));
        }
    };

    let report = compose_report(&ledger, &deltas)?;
    write_file(&out.join(GRID), |w| io::write_grid(w, &grid))?;
    write_file(&out.join(PARTICLES), |w| io::write_particles(w, &output.particles))?;
    let plans = PlansFile {
        times: grid.times().to_vec(),
        bridge_tau: output.bridge_tau,
        plans: output.plans,
    };
    write_file(&out.join(PLANS), |w| io::write_json(w, &plans))?;
    write_file(&out.join(PRIVACY), |w| io::write_json(w, &report))?;
    Ok(FitSummary {
        particles: output.particles,
        report,
        iterations: output.iterations,
    })
}

/// Parses `"grid"` or a comma-separated list of times.
pub fn parse_times(spec: &str, grid: &TimeGrid) -> CliResult<Vec<f64>> {
    if spec.trim() == "grid" {
        return Ok(grid.times().to_vec());
    }
    let mut times = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad time `{s}` in --times")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    times.sort_by(f64::total_cmp);
    Ok(times)
}

/// Samples `n_paths` trajectories from a fit directory and writes `trajectories.jsonl`.
pub fn cmd_sample(
    cfg: &CliConfig,
    fit_dir: &Path,
    out: &Path,
    times: Option<&str>,
    plans: Option<PlanKind>,
) -> CliResult<dptraj::TrajectorySet> {
    let particles = read_particles_dir(fit_dir)?;
    let file: PlansFile = io::read_json(io::open(&fit_dir.join(PLANS))?)?;
    let times = parse_times(times.unwrap_or(&cfg.sample.times), particles.grid())?;
    let key = RngKey::root(cfg.seed).child(KEY_SAMPLE);
    let n = cfg.sample.n_paths;
    let mut trajs = match plans.unwrap_or(cfg.sample.plans) {
        PlanKind::Exact => sample_exact_chain(&particles, n, file.bridge_tau, &key)?,
        PlanKind::Entropic => {
            let chain = compose_plans(&file.plans, cfg.sample.chain_tol)?;
            sample_paths(&chain, &particles, n, file.bridge_tau, &key)?
        }
    };
    let set = to_trajectory_set(&mut trajs, &times)?;
    fs::create_dir_all(out)?;
    write_file(&out.join(TRAJECTORIES), |w| io::write_trajectories(w, &set))?;
    Ok(set)
}

/// Marginals to evaluate: a fit directory, a trajectory file or a snapshot file.
fn load_candidate(input: &Path, data_grid: &TimeGrid) -> CliResult<(Vec<usize>, Vec<PointCloud>)> {
    if input.is_dir() {
        let ps = read_particles_dir(input)?;
        let idx = ps
            .grid()
            .times()
            .iter()
            .map(|&t| {
                data_grid
                    .times()
                    .iter()
                    .position(|&s| (s - t).abs() <= 1e-12)
                    .ok_or_else(|| CliError::Runtime(format!("fitted time {t} is not on the data grid")))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let (_, clouds) = ps.into_parts();
        return Ok((idx, clouds));
    }
    let text = fs::read_to_string(input)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let all: Vec<usize> = (0..data_grid.len()).collect();
    if first.contains("\"traj_id\"") {
        let set: dptraj::TrajectorySet = io::read_trajectories(text.as_bytes())?;
        Ok((all, set.marginals_at(data_grid.times())?))
    } else {
        let ds: TemporalDataset = io::read_dataset(text.as_bytes(), data_grid)?;
        Ok((all, ds.snapshots().to_vec()))
    }
}

/// Compares `input` against the observations in `data_dir` and writes `metrics.csv`.
pub fn cmd_eval(
    cfg: &CliConfig,
    data_dir: &Path,
    input: &Path,
    out: &Path,
    metrics: Option<&[Metric]>,
) -> CliResult<Vec<MetricRow>> {
    let data = read_dataset_dir(data_dir)?;
    let (idx, fitted) = load_candidate(input, data.grid())?;
    let observed: Vec<PointCloud> = idx.iter().map(|&i| data.snapshot(i).clone()).collect();
    let ev = &cfg.eval;
    let sigma = ev.sigma.unwrap_or(cfg.run.sigma);
    let key = RngKey::root(cfg.seed).child(KEY_EVAL);
    let mut rows = Vec::new();
    for &metric in metrics.unwrap_or(&ev.metrics) {
        let per: Vec<f64> = match metric {
            Metric::W2 => w2_over_time(&fitted, &observed, ev.max_points, &key)?.0,
            Metric::Df => fitted
                .iter()
                .zip(&observed)
                .map(|(a, b)| data_fit_value(a, b, sigma))
                .collect::<dptraj::Result<_>>()?,
            Metric::Hellinger => fitted
                .iter()
                .zip(&observed)
                .map(|(a, b)| {
                    let q = QuadratureGrid::covering(a, b, sigma, ev.margin, ev.cells);
                    hellinger_smoothed(a, b, sigma, &q)
                })
                .collect::<dptraj::Result<_>>()?,
        };
        for (&i, v) in idx.iter().zip(&per) {
            rows.push(MetricRow {
                time_index: Some(i),
                metric: metric.name().into(),
                value: *v,
            });
        }
        rows.push(MetricRow {
            time_index: None,
            metric: metric.name().into(),
            value: per.iter().sum::<f64>() / per.len() as f64,
        });
    }
    fs::create_dir_all(out)?;
    write_file(&out.join(METRICS), |w| io::write_metrics(w, &rows))?;
    Ok(rows)
}

/// Where `account` reads its ledger from.
pub enum LedgerSource<'a> {
    File(&'a Path),
    /// Rebuild from the config; `t` labels partitions.
    Planned(usize),
}

/// Composes a ledger and writes `privacy.json`.
pub fn cmd_account(cfg: &CliConfig, source: LedgerSource<'_>, out: &Path, deltas: Option<&[f64]>) -> CliResult<PrivacyReport> {
    let ledger: PrivacyLedger = match source {
        LedgerSource::File(p) => io::read_json(io::open(p)?)?,
        LedgerSource::Planned(t) => planned_ledger(cfg, t)?,
    };
    let report = compose_report(&ledger, deltas.unwrap_or(&cfg.privacy.deltas))?;
    fs::create_dir_all(out)?;
    write_file(&out.join(PRIVACY), |w| io::write_json(w, &report))?;
    Ok(report)
}

/// Number of observation times implied by the config, if any.
pub fn config_time_count(cfg: &CliConfig) -> Option<usize> {
    cfg.simulate.as_ref().and_then(|s| s.grid_spec().build().ok()).map(|g| g.len())
}

/// Applies `DPTRAJ_THREADS` to the global thread pool.
pub fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("DPTRAJ_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("DPTRAJ_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub fn default_out() -> PathBuf {
    PathBuf::from("out")
}
