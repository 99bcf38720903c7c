//! Evaluation metrics: marginal W₂, data-fit value, discrete objective and smoothed Hellinger distance.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::eot::{exact_ot, uniform_weights, CostMatrix, TransportPlan};
use crate::error::{Error, Result};
use crate::mfld::{fit_weights, log_convolution};
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey};
use crate::scalar::Real;

/// Default number of points per side for averaged W₂.
pub const W2_SUBSAMPLE: usize = 200;

/// Exact W₂ between uniform empirical measures on `a` and `b`.
pub fn w2_marginal<T: Real>(a: &PointCloud<T>, b: &PointCloud<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::Schema("point clouds of different dimensions".into()));
    }
    let cost = CostMatrix::sq_euclidean(a, b);
    let plan = exact_ot(&uniform_weights(a.len()), &uniform_weights(b.len()), &cost)?;
    Ok(plan.transport_cost.max(T::zero()).sqrt())
}

fn subsample_cloud<T: Real>(c: &PointCloud<T>, n: usize, key: &RngKey) -> PointCloud<T> {
    if c.len() <= n {
        return c.clone();
    }
    let mut idx = sample(&mut key.stream(), c.len(), n).into_vec();
    idx.sort_unstable();
    c.select(&idx)
}

/// Per-time W₂ on equal-size random subsets of at most `max_points`, and their mean.
///
/// Both subsets at time `i` come from `key / Eval / i`, so clouds of the
/// same size get the same index draw and identical inputs score zero.
pub fn w2_over_time<T: Real>(
    a: &[PointCloud<T>],
    b: &[PointCloud<T>],
    max_points: usize,
    key: &RngKey,
) -> Result<(Vec<T>, T)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Schema(format!("{} vs {} marginals", a.len(), b.len())));
    }
    let key = key.purpose(Purpose::Eval);
    let per: Vec<T> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let n = max_points.min(a[i].len()).min(b[i].len());
            let k = key.child(i as u64);
            w2_marginal(&subsample_cloud(&a[i], n, &k), &subsample_cloud(&b[i], n, &k))
        })
        .collect::<Result<_>>()?;
    let mean = per.iter().cloned().sum::<T>() / T::lit(per.len() as f64);
    Ok((per, mean))
}

/// `(1/N) Σ_y −ln[(1/m) Σ_j exp(−‖x_j − y‖² / 2σ²)]`.
pub fn data_fit_value<T: Real>(particles: &PointCloud<T>, data: &PointCloud<T>, sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::Parameter("sigma must be positive".into()));
    }
    let mut total = T::zero();
    for (n, y) in data.iter().enumerate() {
        total -= log_convolution(particles, y, sigma, n)?;
    }
    Ok(total / T::lit(data.len() as f64))
}

/// Discrete objective `Σ_i (Δt_i/λ) DF(particles_i, data_i) + Σ_i value(γ_i) / Δt_i`,
/// where `value(γ) = <γ, C> + ε H(γ | a⊗b)` and `gaps[i] = Δt_i`.
///
/// With a single marginal there are no plans and no gaps.
pub fn objective_g<T: Real>(
    particles: &[PointCloud<T>],
    data: &[PointCloud<T>],
    gaps: &[T],
    plans: &[TransportPlan<T>],
    lambda: Option<f64>,
    sigma: T,
) -> Result<T> {
    let t = particles.len();
    if data.len() != t || gaps.len() + 1 != t || plans.len() + 1 != t {
        return Err(Error::Schema(format!(
            "{t} marginals, {} snapshots, {} gaps, {} plans",
            data.len(),
            gaps.len(),
            plans.len()
        )));
    }
    let w = fit_weights(gaps, lambda);
    let mut g = T::zero();
    for i in 0..t {
        g += w[i] * data_fit_value(&particles[i], &data[i], sigma)?;
    }
    for (p, &dt) in plans.iter().zip(gaps) {
        g += p.value() / dt;
    }
    Ok(g)
}

/// Tensor grid for trapezoidal quadrature in up to three dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Number of intervals per axis.
    pub cells: usize,
}

impl QuadratureGrid {
    /// Bounding box of both clouds padded by `margin_sigmas · sigma`.
    pub fn covering<T: Real>(
        a: &PointCloud<T>,
        b: &PointCloud<T>,
        sigma: f64,
        margin_sigmas: f64,
        cells: usize,
    ) -> Self {
        let d = a.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in a.iter().chain(b.iter()) {
            for c in 0..d {
                lo[c] = lo[c].min(p[c].as_f64());
                hi[c] = hi[c].max(p[c].as_f64());
            }
        }
        let pad = margin_sigmas * sigma;
        Self {
            lo: lo.into_iter().map(|v| v - pad).collect(),
            hi: hi.into_iter().map(|v| v + pad).collect(),
            cells,
        }
    }

    fn axis(&self, c: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.cells;
        let h = (self.hi[c] - self.lo[c]) / n as f64;
        let x = (0..=n).map(|k| self.lo[c] + k as f64 * h).collect();
        let w = (0..=n).map(|k| if k == 0 || k == n { 0.5 * h } else { h }).collect();
        (x, w)
    }

    pub fn max_cell(&self) -> f64 {
        (0..self.lo.len())
            .map(|c| (self.hi[c] - self.lo[c]) / self.cells as f64)
            .fold(0.0, f64::max)
    }
}

fn smoothed_density<T: Real>(cloud: &PointCloud<T>, x: &[f64], sigma: f64) -> f64 {
    let d = x.len() as f64;
    let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(d / 2.0) * cloud.len() as f64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    cloud
        .iter()
        .map(|p| {
            let r2: f64 = p.iter().zip(x).map(|(a, b)| (a.as_f64() - b).powi(2)).sum();
            (-r2 * inv).exp()
        })
        .sum::<f64>()
        / norm
}

/// `∫ (√p − √q)²` for the `N(0, σ² I)`-smoothed empirical densities of `a` and `b`.
///
/// Cells wider than `σ/2` are accepted with a logged warning.
pub fn hellinger_smoothed<T: Real>(
    a: &PointCloud<T>,
    b: &PointCloud<T>,
    sigma: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    let d = a.dim();
    if b.dim() != d || grid.lo.len() != d || grid.hi.len() != d {
        return Err(Error::Schema("dimension mismatch between clouds and quadrature grid".into()));
    }
    if d == 0 || d > 3 {
        return Err(Error::Parameter(format!("grid quadrature supports 1 to 3 dimensions, got {d}")));
    }
    if !(sigma > 0.0) || grid.cells == 0 {
        return Err(Error::Parameter("sigma and cell count must be positive".into()));
    }
    if grid.max_cell() > sigma / 2.0 {
        log::warn!(
            "quadrature cell {} exceeds sigma/2 = {}; Hellinger value may be inaccurate",
            grid.max_cell(),
            sigma / 2.0
        );
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..d).map(|c| grid.axis(c)).collect();
    let n = grid.cells + 1;
    let total = n.pow(d as u32);
    let sum: f64 = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut x = [0.0; 3];
            let mut w = 1.0;
            for (c, (xs, ws)) in axes.iter().enumerate() {
                let k = rem % n;
                rem /= n;
                x[c] = xs[k];
                w *= ws[k];
            }
            let p = smoothed_density(a, &x[..d], sigma);
            let q = smoothed_density(b, &x[..d], sigma);
            w * (p.sqrt() - q.sqrt()).powi(2)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w2_examples() {
        let a = PointCloud::<f64>::from_rows(&[vec![0.0]]).unwrap();
        let b = PointCloud::<f64>::from_rows(&[vec![1.0]]).unwrap();
        assert_eq!(w2_marginal(&a, &b).unwrap(), 1.0);
        let a = PointCloud::<f64>::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let b = PointCloud::<f64>::from_rows(&[vec![2.0], vec![3.0]]).unwrap();
        assert!((w2_marginal(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(w2_marginal(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn data_fit_examples() {
        let p = PointCloud::<f64>::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(data_fit_value(&p, &p, 0.1).unwrap(), 0.0);
        let x = PointCloud::<f64>::from_rows(&[vec![0.0]]).unwrap();
        let y = PointCloud::<f64>::from_rows(&[vec![0.3]]).unwrap();
        assert!((data_fit_value(&x, &y, 0.3).unwrap() - 0.5).abs() < 1e-14);
    }
}
