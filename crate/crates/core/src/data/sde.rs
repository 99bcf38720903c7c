use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{TrajectoryPath, TrajectorySet};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey};
use crate::scalar::Real;

/// Drift `−∇Ψ(x, t)` from a fixed registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    /// `Ψ = a‖x − c(t)‖²` with `c` moving linearly from `center_start` to `center_end`.
    QuadraticWell {
        a: f64,
        center_start: Vec<f64>,
        center_end: Vec<f64>,
    },
    /// Spatially constant drift tabulated at `times`, linearly interpolated.
    Tabulated { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Drift {
    /// Returns `None` when the drift is undefined at `(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        match self {
            Drift::Zero => Some(vec![0.0; x.len()]),
            Drift::QuadraticWell {
                a,
                center_start,
                center_end,
            } => {
                if center_start.len() != x.len() || center_end.len() != x.len() {
                    return None;
                }
                Some(
                    x.iter()
                        .zip(center_start.iter().zip(center_end))
                        .map(|(&xi, (&c0, &c1))| -2.0 * a * (xi - (c0 + t * (c1 - c0))))
                        .collect(),
                )
            }
            Drift::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() || values.iter().any(|v| v.len() != x.len()) {
                    return None;
                }
                let n = times.len();
                if t < times[0] || t > times[n - 1] {
                    return None;
                }
                let r = times.partition_point(|&s| s < t).max(1).min(n - 1);
                if n == 1 {
                    return Some(values[0].clone());
                }
                let w = (t - times[r - 1]) / (times[r] - times[r - 1]);
                Some(
                    values[r - 1]
                        .iter()
                        .zip(&values[r])
                        .map(|(&u, &v)| u + w * (v - u))
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialLaw {
    PointMass { x: Vec<f64> },
    /// Isotropic Gaussian with per-coordinate standard deviation `std`.
    Gaussian { mean: Vec<f64>, std: f64 },
    Mixture { weights: Vec<f64>, means: Vec<Vec<f64>>, std: f64 },
}

impl InitialLaw {
    fn dim(&self) -> usize {
        match self {
            InitialLaw::PointMass { x } => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
            InitialLaw::Mixture { means, .. } => means.first().map_or(0, |m| m.len()),
        }
    }

    fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitialLaw::PointMass { x } => x.clone(),
            InitialLaw::Gaussian { mean, std } => mean.iter().map(|&m| m + std * f64::sample_normal(rng)).collect(),
            InitialLaw::Mixture { weights, means, std } => {
                let total: f64 = weights.iter().sum();
                let u = f64::sample_unit(rng) * total;
                let mut acc = 0.0;
                let mut pick = means.len() - 1;
                for (c, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                means[pick].iter().map(|&m| m + std * f64::sample_normal(rng)).collect()
            }
        }
    }
}

/// `dX = drift(X, t) dt + sqrt(tau) dB`, `X_0 ~ initial`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    pub drift: Drift,
    pub tau: f64,
    pub initial: InitialLaw,
    pub dim: usize,
}

impl SdeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::Parameter(format!("SDE diffusivity must be >= 0, got {}", self.tau)));
        }
        if self.dim == 0 || self.initial.dim() != self.dim {
            return Err(Error::Schema(format!(
                "initial law has dimension {} but the SDE has dimension {}",
                self.initial.dim(),
                self.dim
            )));
        }
        match &self.initial {
            InitialLaw::Gaussian { std, .. } | InitialLaw::Mixture { std, .. } if !(*std >= 0.0) => {
                Err(Error::Parameter("initial std must be >= 0".into()))
            }
            InitialLaw::Mixture { weights, means, .. }
                if weights.len() != means.len()
                    || weights.iter().any(|w| !(*w >= 0.0))
                    || !(weights.iter().sum::<f64>() > 0.0)
                    || means.iter().any(|m| m.len() != self.dim) =>
            {
                Err(Error::Parameter("mixture weights/means are inconsistent".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Euler–Maruyama paths started at time 0 and recorded at every grid time.
///
/// Each gap (including `[0, t_1]` when `t_1 > 0`) is split into
/// `steps_per_gap` equal steps. Path `p` draws from `key / Simulate / p`.
pub fn simulate_sde<T: Real>(
    spec: &SdeSpec,
    n_paths: usize,
    grid: &TimeGrid<T>,
    steps_per_gap: usize,
    key: &RngKey,
) -> Result<TrajectorySet<T>> {
    spec.validate()?;
    if steps_per_gap == 0 {
        return Err(Error::Parameter("steps_per_gap must be >= 1".into()));
    }
    let times: Vec<f64> = grid.times().iter().map(|t| t.as_f64()).collect();
    let key = key.purpose(Purpose::Simulate);
    let sqrt_tau = spec.tau.sqrt();
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = key.child(p as u64).stream();
            let mut x = spec.initial.sample(&mut rng);
            let mut t = 0.0;
            let mut out = PointCloud::with_capacity(spec.dim, times.len());
            for &target in &times {
                if target > t {
                    let h = (target - t) / steps_per_gap as f64;
                    let sh = sqrt_tau * h.sqrt();
                    for s in 0..steps_per_gap {
                        let now = t + s as f64 * h;
                        let f = spec.drift.eval(&x, now).ok_or_else(|| Error::Simulation {
                            path: p,
                            time: now,
                            reason: "drift undefined".into(),
                        })?;
                        for (xi, fi) in x.iter_mut().zip(f) {
                            *xi += fi * h;
                            if sqrt_tau > 0.0 {
                                *xi += sh * f64::sample_normal(&mut rng);
                            }
                        }
                        if x.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Simulation {
                                path: p,
                                time: now + h,
                                reason: "state became non-finite".into(),
                            });
                        }
                    }
                    t = target;
                }
                let xt: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
                out.push(&xt)?;
            }
            TrajectoryPath::new(p as u64, grid.times().to_vec(), out)
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectorySet::new(spec.dim, paths)
}
