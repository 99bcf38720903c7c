use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::step::{mfld_step, GradientReport, StepIndex, StepParams};
use crate::config::RunConfig;
use crate::dataset::{ParticleSystem, TemporalDataset};
use crate::eot::{solve_plan, SinkhornOptions, TransportPlan};
use crate::error::{Error, Result};
use crate::io;
use crate::privacy::{LedgerEntry, PrivacyLedger};
use crate::rng::RngKey;
use crate::scalar::Real;

/// Plans between consecutive marginals with regularization `tau · Δt_i`.
///
/// `tau == 0` gives exact plans. `warm` supplies starting duals.
pub fn solve_plans<T: Real>(
    state: &ParticleSystem<T>,
    tau: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&[TransportPlan<T>]>,
) -> Result<Vec<TransportPlan<T>>> {
    let gaps = state.grid().gaps();
    (0..gaps.len())
        .into_par_iter()
        .map(|i| {
            let duals = warm.and_then(|w| w.get(i)).and_then(|p| p.duals.clone());
            let opts = SinkhornOptions::new(T::lit(tol), max_iter).with_warm_start(duals);
            let plan = solve_plan(state.marginal(i), state.marginal(i + 1), T::lit(tau) * gaps[i], &opts)?;
            if !plan.converged {
                log::warn!(
                    "interval {i}: Sinkhorn stopped after {} iterations with residual {}",
                    plan.iterations,
                    plan.residual
                );
            }
            Ok(plan)
        })
        .collect()
}

/// State handed to a run observer after each step.
pub struct Observation<'a, T> {
    pub at: StepIndex,
    pub global_iteration: usize,
    /// Particles before the step.
    pub state: &'a ParticleSystem<T>,
    /// Plans solved at `state`.
    pub plans: &'a [TransportPlan<T>],
    pub report: &'a GradientReport<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    /// Position of the next step to run.
    pub phase: usize,
    pub iteration: usize,
    pub global_iteration: usize,
    pub times: Vec<f64>,
}

pub const CHECKPOINT_PARTICLES: &str = "checkpoint_particles.jsonl";
pub const CHECKPOINT_META: &str = "checkpoint.json";

pub fn write_checkpoint<T: Real>(dir: &Path, state: &ParticleSystem<T>, meta: &CheckpointMeta) -> Result<()> {
    let mut w = io::create(&dir.join(CHECKPOINT_PARTICLES))?;
    io::write_particles(&mut w, state)?;
    let mut w = io::create(&dir.join(CHECKPOINT_META))?;
    io::write_json(&mut w, meta)
}

pub fn load_checkpoint<T: Real>(dir: &Path) -> Result<(ParticleSystem<T>, CheckpointMeta)> {
    let meta: CheckpointMeta = io::read_json(io::open(&dir.join(CHECKPOINT_META))?)?;
    let grid = crate::grid::TimeGrid::new(meta.times.iter().map(|&t| T::lit(t)).collect())?;
    let state = io::read_particles(io::open(&dir.join(CHECKPOINT_PARTICLES))?, &grid)?;
    Ok((state, meta))
}

#[derive(Default)]
pub struct RunOptions<'a, T> {
    pub observer: Option<&'a mut dyn FnMut(&Observation<'_, T>)>,
    /// Directory for checkpoints, written every `checkpoint_every` iterations.
    pub checkpoint_dir: Option<PathBuf>,
    /// Start from this position instead of the beginning (for resumed runs).
    pub resume: Option<StepIndex>,
    /// Heuristic time-subsampling factor applied to `rho` in the ledger.
    pub amplification: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub particles: ParticleSystem<T>,
    /// Plans solved at the final particles with the last phase's `tau`.
    pub plans: Vec<TransportPlan<T>>,
    pub bridge_tau: f64,
    pub iterations: usize,
}

/// Runs every phase of the schedule from `init`.
///
/// Each iteration re-solves all plans (warm-started from the previous
/// iteration) and then takes one step. One ledger entry per non-empty phase
/// is appended to `ledger` before the phase starts, so a failed run leaves
/// the entries of every phase it touched.
pub fn run<T: Real>(
    dataset: &TemporalDataset<T>,
    cfg: &RunConfig,
    init: ParticleSystem<T>,
    key: &RngKey,
    ledger: &mut PrivacyLedger,
    mut options: RunOptions<'_, T>,
) -> Result<RunOutput<T>> {
    cfg.validate()?;
    if init.len() != dataset.len() || init.dim() != dataset.dim() {
        return Err(Error::Schema(format!(
            "initialization has {} marginals of dimension {}, dataset has {} of dimension {}",
            init.len(),
            init.dim(),
            dataset.len(),
            dataset.dim()
        )));
    }
    if init.grid() != dataset.grid() {
        return Err(Error::Schema("initialization and dataset use different grids".into()));
    }
    let partitions: Vec<String> = (0..dataset.len()).map(|i| format!("t{i}")).collect();
    let schedule = cfg.schedule();
    let start = options.resume.unwrap_or_default();
    let mut state = init;
    let mut plans: Option<Vec<TransportPlan<T>>> = None;
    let mut global = 0usize;
    for (p, phase) in schedule.iter().enumerate() {
        if phase.iterations == 0 {
            continue;
        }
        let params = StepParams::new(cfg, phase);
        let accounted_tau = if params.noise_std() > 0.0 { phase.tau } else { 0.0 };
        let entry = LedgerEntry::dpsgd(
            format!("phase{p}"),
            partitions.clone(),
            cfg.subsample_rate,
            phase.iterations,
            accounted_tau,
            options.amplification,
        )?;
        ledger.push(entry);
        for it in 0..phase.iterations {
            let at = StepIndex { phase: p, iteration: it };
            if (p, it) < (start.phase, start.iteration) {
                global += 1;
                continue;
            }
            let current = solve_plans(
                &state,
                phase.tau,
                cfg.sinkhorn_tol,
                cfg.sinkhorn_max_iter,
                plans.as_deref(),
            )?;
            let (next, report) = mfld_step(&state, dataset, &current, &params, at, key)?;
            if let Some(obs) = options.observer.as_mut() {
                obs(&Observation {
                    at,
                    global_iteration: global,
                    state: &state,
                    plans: &current,
                    report: &report,
                });
            }
            state = next;
            plans = Some(current);
            global += 1;
            if let Some(dir) = &options.checkpoint_dir {
                if cfg.checkpoint_every > 0 && global % cfg.checkpoint_every == 0 {
                    let (np, ni) = if it + 1 < phase.iterations { (p, it + 1) } else { (p + 1, 0) };
                    write_checkpoint(
                        dir,
                        &state,
                        &CheckpointMeta {
                            phase: np,
                            iteration: ni,
                            global_iteration: global,
                            times: state.grid().times().iter().map(|t| t.as_f64()).collect(),
                        },
                    )?;
                }
            }
        }
    }
    let bridge_tau = cfg.final_tau();
    let final_plans = solve_plans(&state, bridge_tau, cfg.sinkhorn_tol, cfg.sinkhorn_max_iter, plans.as_deref())?;
    Ok(RunOutput {
        particles: state,
        plans: final_plans,
        bridge_tau,
        iterations: global,
    })
}
