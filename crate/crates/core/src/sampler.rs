//! Synthetic paths: Markov-chain sampling through composed plans and
//! Brownian-bridge interpolation between grid times.

use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{TrajectoryPath, TrajectorySet};
use crate::dataset::ParticleSystem;
use crate::eot::{compose_plans, exact_ot, uniform_weights, CostMatrix, MarkovChainCoupling};
use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey, Stream};
use crate::scalar::Real;

fn draw_index<R: Rng>(w: &[f64], rng: &mut R, row: usize) -> Result<usize> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePlan { row });
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(w.iter().rposition(|&x| x > 0.0).unwrap_or(w.len() - 1))
}

/// A sampled path: grid anchors plus lazily drawn bridge points.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub id: u64,
    pub anchor_times: Vec<T>,
    pub anchors: PointCloud<T>,
    /// Particle index at each anchor.
    pub indices: Vec<usize>,
    pub tau: f64,
    cache: BTreeMap<u64, (f64, Vec<f64>)>,
    rng: Stream,
}

fn time_key(s: f64) -> u64 {
    // Order-preserving for non-negative times.
    s.to_bits()
}

impl<T: Real> Trajectory<T> {
    pub fn new(
        id: u64,
        anchor_times: Vec<T>,
        anchors: PointCloud<T>,
        indices: Vec<usize>,
        tau: f64,
        key: &RngKey,
    ) -> Result<Self> {
        if anchor_times.len() != anchors.len() || anchors.is_empty() {
            return Err(Error::Schema("anchor times and points differ in length".into()));
        }
        if !(tau >= 0.0) {
            return Err(Error::Parameter(format!("bridge diffusivity must be >= 0, got {tau}")));
        }
        Ok(Self {
            id,
            anchor_times,
            anchors,
            indices,
            tau,
            cache: BTreeMap::new(),
            rng: key.purpose(Purpose::Bridge).child(id).stream(),
        })
    }

    /// Point at time `s`: the anchor on grid times, otherwise a Brownian-bridge
    /// draw conditioned on the anchors and every point already drawn.
    pub fn bridge_point(&mut self, s: T) -> Result<Vec<T>> {
        let n = self.anchor_times.len();
        let (lo, hi) = (self.anchor_times[0], self.anchor_times[n - 1]);
        if !(s >= lo && s <= hi) {
            return Err(Error::Range {
                time: s.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        let r = self.anchor_times.partition_point(|&t| t < s);
        if r < n && self.anchor_times[r] == s {
            return Ok(self.anchors.point(r).to_vec());
        }
        let sf = s.as_f64();
        if let Some((_, x)) = self.cache.get(&time_key(sf)) {
            return Ok(x.iter().map(|&v| T::lit(v)).collect());
        }
        let to_f64 = |p: &[T]| -> Vec<f64> { p.iter().map(|v| v.as_f64()).collect() };
        let (mut l, mut a) = (self.anchor_times[r - 1].as_f64(), to_f64(self.anchors.point(r - 1)));
        let (mut rt, mut b) = (self.anchor_times[r].as_f64(), to_f64(self.anchors.point(r)));
        if let Some((_, (t, x))) = self.cache.range(time_key(l)..time_key(sf)).next_back() {
            if *t > l {
                l = *t;
                a = x.clone();
            }
        }
        if let Some((_, (t, x))) = self.cache.range(time_key(sf)..time_key(rt)).next() {
            if *t < rt {
                rt = *t;
                b = x.clone();
            }
        }
        let w = (sf - l) / (rt - l);
        let std = (self.tau * (sf - l) * (rt - sf) / (rt - l)).sqrt();
        let x: Vec<f64> = a
            .iter()
            .zip(&b)
            .map(|(&u, &v)| {
                let mean = u + w * (v - u);
                if std > 0.0 {
                    mean + std * f64::sample_normal(&mut self.rng)
                } else {
                    mean
                }
            })
            .collect();
        self.cache.insert(time_key(sf), (sf, x.clone()));
        Ok(x.into_iter().map(T::lit).collect())
    }

    /// Values at every time in `times`, queried in the given order.
    pub fn evaluate(&mut self, times: &[T]) -> Result<TrajectoryPath<T>> {
        let mut pts = PointCloud::with_capacity(self.anchors.dim(), times.len());
        for &s in times {
            pts.push(&self.bridge_point(s)?)?;
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[i].partial_cmp(&times[j]).unwrap());
        let sorted_times = order.iter().map(|&i| times[i]).collect();
        TrajectoryPath::new(self.id, sorted_times, pts.select(&order))
    }
}

/// Samples `n_paths` index sequences from `chain` and attaches the particles.
///
/// Path `p` draws its indices from `key / SamplePath / p` and its bridge
/// points from `key / Bridge / p`.
pub fn sample_paths<T: Real>(
    chain: &MarkovChainCoupling<T>,
    particles: &ParticleSystem<T>,
    n_paths: usize,
    tau: f64,
    key: &RngKey,
) -> Result<Vec<Trajectory<T>>> {
    if chain.len() != particles.len() {
        return Err(Error::Schema(format!(
            "chain of length {} for {} marginals",
            chain.len(),
            particles.len()
        )));
    }
    if chain.initial.len() != particles.m() {
        return Err(Error::Schema("chain and particle counts differ".into()));
    }
    let initial: Vec<f64> = chain.initial.iter().map(|v| v.as_f64()).collect();
    let skey = key.purpose(Purpose::SamplePath);
    (0..n_paths)
        .map(|p| {
            let mut rng = skey.child(p as u64).stream();
            let mut j = draw_index(&initial, &mut rng, 0)?;
            let mut idx = vec![j];
            for i in 0..chain.kernels.len() {
                let row: Vec<f64> = chain.kernel_row(i, j).iter().map(|v| v.as_f64()).collect();
                j = draw_index(&row, &mut rng, j)?;
                idx.push(j);
            }
            let mut anchors = PointCloud::with_capacity(particles.dim(), idx.len());
            for (i, &k) in idx.iter().enumerate() {
                anchors.push(particles.marginal(i).point(k))?;
            }
            Trajectory::new(p as u64, particles.grid().times().to_vec(), anchors, idx, tau, key)
        })
        .collect()
}

/// Chain built from exact plans with uniform weights and cost `½‖y − x‖²`.
pub fn exact_chain<T: Real>(particles: &ParticleSystem<T>) -> Result<MarkovChainCoupling<T>> {
    let w = uniform_weights::<T>(particles.m());
    let plans = (0..particles.len() - 1)
        .map(|i| {
            let c = CostMatrix::half_sq_euclidean(particles.marginal(i), particles.marginal(i + 1));
            exact_ot(&w, &w, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    compose_plans(&plans, T::lit(1e-9))
}

/// Paths sampled through exact plans instead of entropic ones.
pub fn sample_exact_chain<T: Real>(
    particles: &ParticleSystem<T>,
    n_paths: usize,
    tau: f64,
    key: &RngKey,
) -> Result<Vec<Trajectory<T>>> {
    sample_paths(&exact_chain(particles)?, particles, n_paths, tau, key)
}

/// Evaluates every trajectory at `times` and collects the results.
pub fn to_trajectory_set<T: Real>(trajs: &mut [Trajectory<T>], times: &[T]) -> Result<TrajectorySet<T>> {
    let dim = trajs.first().map_or(0, |t| t.anchors.dim());
    let paths = trajs.iter_mut().map(|t| t.evaluate(times)).collect::<Result<Vec<_>>>()?;
    TrajectorySet::new(dim, paths)
}
