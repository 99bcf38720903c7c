use rand::Rng;
use rayon::prelude::*;

use super::gradient::{clip_in_place, fit_gradient_from_log_conv, fit_weights, log_convolution, projections};
use crate::config::{Divisor, Phase, RunConfig};
use crate::dataset::{ParticleSystem, TemporalDataset};
use crate::eot::TransportPlan;
use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey, SeedPath};
use crate::scalar::Real;

/// Indices kept by independent Bernoulli(`rho`) trials over `0..n`.
pub fn poisson_subsample<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<f64>() < rho).collect()
}

/// Parameters of a single update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepParams {
    pub eta: f64,
    pub tau: f64,
    pub clip: f64,
    pub lambda: Option<f64>,
    pub sigma: f64,
    pub rho: f64,
    pub divisor: Divisor,
    pub inject_noise: bool,
}

impl StepParams {
    pub fn new(cfg: &RunConfig, phase: &Phase) -> Self {
        Self {
            eta: phase.step_size,
            tau: phase.tau,
            clip: cfg.clip,
            lambda: cfg.lambda,
            sigma: cfg.sigma,
            rho: cfg.subsample_rate,
            divisor: cfg.divisor,
            inject_noise: cfg.inject_noise,
        }
    }

    /// Per-coordinate standard deviation of the injected perturbation.
    pub fn noise_std(&self) -> f64 {
        if self.inject_noise && self.tau > 0.0 {
            self.clip * self.tau
        } else {
            0.0
        }
    }
}

/// Where a step sits in the schedule; keys its random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepIndex {
    pub phase: usize,
    pub iteration: usize,
}

/// Components of one update, per marginal and particle.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport<T> {
    /// `(1/D) Σ clip_C(per-datum fit gradient)`.
    pub fit: Vec<PointCloud<T>>,
    pub potential: Vec<PointCloud<T>>,
    /// Raw perturbation draw, before division by `D`.
    pub noise: Vec<PointCloud<T>>,
    pub subsample_sizes: Vec<usize>,
    pub divisors: Vec<T>,
    /// Largest norm of any clipped per-datum contribution, per marginal.
    pub max_clipped_norm: Vec<T>,
}

struct MarginalUpdate<T> {
    next: PointCloud<T>,
    fit: PointCloud<T>,
    potential: PointCloud<T>,
    noise: PointCloud<T>,
    size: usize,
    divisor: T,
    max_norm: T,
    divergent: Option<usize>,
}

/// One Jacobi update of every particle:
/// `x ← x − η [ (Σ clip_C(fit) + ξ)/D + potential ]`.
///
/// Subsample of marginal `i` draws from `key / (phase, iteration, i, 0, Subsample)`;
/// the perturbation of particle `k` from `key / (phase, iteration, i, k, Noise)`.
pub fn mfld_step<T: Real>(
    state: &ParticleSystem<T>,
    dataset: &TemporalDataset<T>,
    plans: &[TransportPlan<T>],
    params: &StepParams,
    at: StepIndex,
    key: &RngKey,
) -> Result<(ParticleSystem<T>, GradientReport<T>)> {
    let t = state.len();
    if dataset.len() != t || dataset.dim() != state.dim() {
        return Err(Error::Schema("dataset and particle system have different shapes".into()));
    }
    let gaps = state.grid().gaps();
    let weights = fit_weights(&gaps, params.lambda);
    let proj = projections(state, plans)?;
    let sigma = T::lit(params.sigma);
    let clip = T::lit(params.clip);
    let eta = T::lit(params.eta);
    let noise_std = params.noise_std();
    let d = state.dim();

    let updates: Vec<Result<MarginalUpdate<T>>> = (0..t)
        .into_par_iter()
        .map(|i| {
            let particles = state.marginal(i);
            let snap = dataset.snapshot(i);
            let mut rng = key
                .join(&SeedPath::step(at.phase, at.iteration, i, 0, Purpose::Subsample))
                .stream();
            let idx = poisson_subsample(snap.len(), params.rho, &mut rng);
            let log_conv = idx
                .iter()
                .map(|&n| log_convolution(particles, snap.point(n), sigma, n))
                .collect::<Result<Vec<T>>>()?;
            let divisor = match params.divisor {
                Divisor::Expected => T::lit((params.rho * snap.len() as f64).max(1.0)),
                Divisor::Realized => T::lit(idx.len().max(1) as f64),
            };
            let (fwd, bwd) = &proj[i];
            let per_particle: Vec<_> = (0..particles.len())
                .into_par_iter()
                .map(|k| {
                    let x = particles.point(k);
                    let mut sum = vec![T::zero(); d];
                    let mut max_norm = T::zero();
                    for (&n, &lc) in idx.iter().zip(&log_conv) {
                        let mut g = fit_gradient_from_log_conv(x, snap.point(n), lc, sigma, weights[i]);
                        max_norm = max_norm.max(clip_in_place(&mut g, clip));
                        sum.iter_mut().zip(&g).for_each(|(s, v)| *s += *v);
                    }
                    let noise: Vec<T> = if noise_std > 0.0 {
                        let mut r = key
                            .join(&SeedPath::step(at.phase, at.iteration, i, k, Purpose::Noise))
                            .stream();
                        (0..d).map(|_| T::lit(noise_std) * T::sample_normal(&mut r)).collect()
                    } else {
                        vec![T::zero(); d]
                    };
                    let pot = super::gradient::potential_gradient_from(
                        x,
                        fwd.as_ref().map(|p| (p.point(k), gaps[i])),
                        bwd.as_ref().map(|p| (p.point(k), gaps[i - 1])),
                    );
                    let fit: Vec<T> = sum.iter().map(|&s| s / divisor).collect();
                    let next: Vec<T> = (0..d)
                        .map(|c| x[c] - eta * (fit[c] + noise[c] / divisor + pot[c]))
                        .collect();
                    (next, fit, pot, noise, max_norm)
                })
                .collect();
            let m = particles.len();
            let mut u = MarginalUpdate {
                next: PointCloud::with_capacity(d, m),
                fit: PointCloud::with_capacity(d, m),
                potential: PointCloud::with_capacity(d, m),
                noise: PointCloud::with_capacity(d, m),
                size: idx.len(),
                divisor,
                max_norm: T::zero(),
                divergent: None,
            };
            for (k, (next, fit, pot, noise, mx)) in per_particle.into_iter().enumerate() {
                if u.divergent.is_none() && next.iter().any(|v| !v.is_finite()) {
                    u.divergent = Some(k);
                }
                u.next.push(&next)?;
                u.fit.push(&fit)?;
                u.potential.push(&pot)?;
                u.noise.push(&noise)?;
                u.max_norm = u.max_norm.max(mx);
            }
            Ok(u)
        })
        .collect();

    let mut report = GradientReport {
        fit: Vec::with_capacity(t),
        potential: Vec::with_capacity(t),
        noise: Vec::with_capacity(t),
        subsample_sizes: Vec::with_capacity(t),
        divisors: Vec::with_capacity(t),
        max_clipped_norm: Vec::with_capacity(t),
    };
    let mut next = Vec::with_capacity(t);
    for (i, u) in updates.into_iter().enumerate() {
        let u = u?;
        if let Some(k) = u.divergent {
            return Err(Error::Divergence {
                iteration: at.iteration,
                marginal: i,
                particle: k,
            });
        }
        next.push(u.next);
        report.fit.push(u.fit);
        report.potential.push(u.potential);
        report.noise.push(u.noise);
        report.subsample_sizes.push(u.size);
        report.divisors.push(u.divisor);
        report.max_clipped_norm.push(u.max_norm);
    }
    Ok((ParticleSystem::new(state.grid().clone(), next)?, report))
}
