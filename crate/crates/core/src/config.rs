//! Optimizer configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annealing stage: `iterations` steps at step size `step_size` and diffusivity `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub iterations: usize,
    pub step_size: f64,
    pub tau: f64,
}

impl Phase {
    pub fn new(iterations: usize, step_size: f64, tau: f64) -> Self {
        Self {
            iterations,
            step_size,
            tau,
        }
    }
}

/// Divisor applied to the summed clipped fit gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    /// `max(1, rho * N_i)`, independent of the realized subsample.
    #[default]
    Expected,
    /// `max(1, |subsample|)`.
    Realized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Step size, used when `phases` is empty.
    pub step_size: f64,
    /// Diffusivity, used when `phases` is empty. Also sets the plan regularization `tau * Δt_i`.
    pub tau: f64,
    /// Iteration count, used when `phases` is empty.
    pub iterations: usize,
    pub phases: Vec<Phase>,
    pub subsample_rate: f64,
    /// Per-datum clipping threshold; `inf` disables clipping.
    pub clip: f64,
    /// Fit weight is `Δt_i / lambda`; unset means weight 1.
    pub lambda: Option<f64>,
    pub sigma: f64,
    pub radius: f64,
    pub particles: usize,
    pub sinkhorn_tol: f64,
    pub sinkhorn_max_iter: usize,
    pub divisor: Divisor,
    /// Adds the Gaussian perturbation to the summed fit gradients when `tau > 0`.
    pub inject_noise: bool,
    /// Write a checkpoint every this many iterations (0 disables).
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            step_size: 1e-3,
            tau: 1.0,
            iterations: 100,
            phases: Vec::new(),
            subsample_rate: 1.0,
            clip: 1.0,
            lambda: None,
            sigma: 0.05,
            radius: 1.0,
            particles: 50,
            sinkhorn_tol: 1e-9,
            sinkhorn_max_iter: 100_000,
            divisor: Divisor::Expected,
            inject_noise: true,
            checkpoint_every: 0,
        }
    }
}

impl RunConfig {
    /// The annealing schedule; a single phase built from the top-level fields when none is listed.
    pub fn schedule(&self) -> Vec<Phase> {
        if self.phases.is_empty() {
            vec![Phase::new(self.iterations, self.step_size, self.tau)]
        } else {
            self.phases.clone()
        }
    }

    /// Diffusivity of the last phase, used for plans at the final state and for bridges.
    pub fn final_tau(&self) -> f64 {
        self.schedule().last().map(|p| p.tau).unwrap_or(self.tau)
    }

    pub fn total_iterations(&self) -> usize {
        self.schedule().iter().map(|p| p.iterations).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| Error::Config(format!("{name} = {v} is out of range"));
        for p in self.schedule() {
            if !(p.step_size > 0.0) || !p.step_size.is_finite() {
                return Err(bad("step_size", p.step_size));
            }
            if !(p.tau >= 0.0) || !p.tau.is_finite() {
                return Err(bad("tau", p.tau));
            }
        }
        if !(self.subsample_rate > 0.0 && self.subsample_rate <= 1.0) {
            return Err(bad("subsample_rate", self.subsample_rate));
        }
        if !(self.clip > 0.0) {
            return Err(bad("clip", self.clip));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(bad("lambda", l));
            }
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(bad("sigma", self.sigma));
        }
        if !(self.radius > 0.0) {
            return Err(bad("radius", self.radius));
        }
        if self.particles == 0 {
            return Err(Error::Config("particles must be >= 1".into()));
        }
        if !(self.sinkhorn_tol > 0.0) || self.sinkhorn_max_iter == 0 {
            return Err(Error::Config("sinkhorn_tol and sinkhorn_max_iter must be positive".into()));
        }
        if self.inject_noise && self.clip.is_infinite() && self.schedule().iter().any(|p| p.tau > 0.0) {
            return Err(Error::Config(
                "noise scale clip * tau is infinite; set a finite clip or inject_noise = false".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
