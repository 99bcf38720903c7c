//! Warm starts: private per-marginal means, private clustering with noisy
//! counts, and non-private Gaussian or box initializations.

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ParticleSystem, TemporalDataset};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::privacy::{gaussian_mechanism_sigma, mu_for_eps_delta, warm_start_noise_std, LedgerEntry, Mechanism};
use crate::rng::{Purpose, RngKey};
use crate::scalar::{norm, sq_dist, Real};

/// Weighted centers for one marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalStart {
    pub centers: Vec<Vec<f64>>,
    /// On the probability simplex.
    pub weights: Vec<f64>,
}

/// A privately computed initialization and what it cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmStart {
    pub times: Vec<f64>,
    pub marginals: Vec<MarginalStart>,
    pub ledger: Vec<LedgerEntry>,
}

fn partitions(t: usize) -> Vec<String> {
    (0..t).map(|i| format!("t{i}")).collect()
}

fn check_domain<T: Real>(ds: &TemporalDataset<T>, radius: f64) -> Result<()> {
    for (i, s) in ds.snapshots().iter().enumerate() {
        for (k, p) in s.iter().enumerate() {
            let n = norm(p).as_f64();
            if n > radius {
                return Err(Error::DomainViolation {
                    time: i,
                    point: k,
                    norm: n,
                    radius,
                });
            }
        }
    }
    Ok(())
}

fn check_budget(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!(
            "budget needs eps > 0 and delta in (0, 1), got ({eps}, {delta})"
        )));
    }
    Ok(())
}

fn project_to_ball(x: &mut [f64], radius: f64) {
    let n = norm(x);
    if n > radius {
        x.iter_mut().for_each(|v| *v *= radius / n);
    }
}

/// Ledger of [`private_mean_init`] over `t` marginals.
pub fn mean_ledger(t: usize, eps: f64, delta: f64) -> Vec<LedgerEntry> {
    vec![LedgerEntry::approx("private_mean", partitions(t), eps, delta)]
}

/// Ledger of [`private_cluster_init`] over `t` marginals with `k` clusters.
pub fn cluster_ledger(t: usize, eps: f64, delta: f64, k: usize) -> Result<Vec<LedgerEntry>> {
    let release_sigma = gaussian_mechanism_sigma(1.0, eps / (3.0 * k as f64), delta / (3.0 * k as f64))?;
    let mut ledger = vec![LedgerEntry::approx("cluster_lloyd", partitions(t), eps / 3.0, delta / 3.0)
        .with_fraction(Ratio::new(1, 3))];
    for c in 0..k {
        ledger.push(
            LedgerEntry::approx(
                format!("cluster_count{c}"),
                partitions(t),
                eps / (3.0 * k as f64),
                delta / (3.0 * k as f64),
            )
            .with_mechanism(Mechanism::Gaussian {
                sensitivity: 1.0,
                sigma: release_sigma,
            })
            .with_fraction(Ratio::new(1, 3 * k as u64)),
        );
    }
    Ok(ledger)
}

/// Noisy mean of each snapshot with per-coordinate std `sqrt(8R² ln(1/δ))/(ε N_i)`.
///
/// Marginal `i` draws from `key / Init / i`. The single ledger entry covers
/// all marginals (disjoint slices).
pub fn private_mean_init<T: Real>(
    ds: &TemporalDataset<T>,
    radius: f64,
    eps: f64,
    delta: f64,
    key: &RngKey,
) -> Result<WarmStart> {
    check_budget(eps, delta)?;
    check_domain(ds, radius)?;
    let key = key.purpose(Purpose::Init);
    let marginals = ds
        .snapshots()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let std = warm_start_noise_std(radius, eps, delta, s.len())?;
            let mut rng = key.child(i as u64).stream();
            let center = s
                .mean()
                .into_iter()
                .map(|m| m.as_f64() + std * f64::sample_normal(&mut rng))
                .collect();
            Ok(MarginalStart {
                centers: vec![center],
                weights: vec![1.0],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WarmStart {
        times: ds.grid().times().iter().map(|t| t.as_f64()).collect(),
        marginals,
        ledger: mean_ledger(ds.len(), eps, delta),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterOptions {
    pub k: usize,
    pub lloyd_iters: usize,
    /// Histogram cells per axis over `[-R, R]^d` used to seed the centers.
    pub seed_cells: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            k: 3,
            lloyd_iters: 3,
            seed_cells: 20,
        }
    }
}

fn gaussian_vec<R: Rng>(rng: &mut R, d: usize, std: f64) -> Vec<f64> {
    (0..d).map(|_| std * f64::sample_normal(rng)).collect()
}

/// Picks `k` seeds from a noisy histogram: highest cells first, skipping cells
/// adjacent to an already chosen one while possible.
fn histogram_seeds<R: Rng>(
    pts: &[Vec<f64>],
    k: usize,
    radius: f64,
    cells: usize,
    count_std: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let d = pts[0].len();
    let total = cells.checked_pow(d as u32).filter(|&n| n <= 1_000_000);
    let Some(total) = total else {
        // Too many cells: fall back to data-independent seeds in the ball.
        return (0..k)
            .map(|_| {
                let mut c: Vec<f64> = (0..d).map(|_| radius * (2.0 * f64::sample_unit(rng) - 1.0)).collect();
                project_to_ball(&mut c, radius);
                c
            })
            .collect();
    };
    let width = 2.0 * radius / cells as f64;
    let cell_of = |p: &[f64]| -> usize {
        p.iter().rev().fold(0usize, |acc, &v| {
            let c = (((v + radius) / width).floor() as isize).clamp(0, cells as isize - 1) as usize;
            acc * cells + c
        })
    };
    let mut counts = vec![0.0; total];
    for p in pts {
        counts[cell_of(p)] += 1.0;
    }
    for c in counts.iter_mut() {
        *c += count_std * f64::sample_normal(rng);
    }
    let coords = |mut idx: usize| -> Vec<usize> {
        (0..d)
            .map(|_| {
                let c = idx % cells;
                idx /= cells;
                c
            })
            .collect()
    };
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| counts[b].total_cmp(&counts[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for &c in &order {
        if chosen.len() == k {
            break;
        }
        let cc = coords(c);
        let adjacent = chosen.iter().any(|&o| {
            coords(o)
                .iter()
                .zip(&cc)
                .all(|(&a, &b)| (a as isize - b as isize).abs() <= 1)
        });
        if !adjacent {
            chosen.push(c);
        }
    }
    for &c in &order {
        if chosen.len() == k {
            break;
        }
        if !chosen.contains(&c) {
            chosen.push(c);
        }
    }
    chosen
        .into_iter()
        .map(|c| coords(c).into_iter().map(|a| -radius + (a as f64 + 0.5) * width).collect())
        .collect()
}

/// Private k-means per marginal followed by noisy cluster counts.
///
/// Budget: `(ε/3, δ/3)` for the clustering and `(ε/(3k), δ/(3k))` for each
/// of the `k` released counts, for a total of `(2ε/3, 2δ/3)`. The clustering
/// (histogram seeding plus `lloyd_iters` rounds of noisy sums and counts) is
/// a sequence of Gaussian mechanisms; each gets an equal share of the GDP
/// parameter that converts to `(ε/3, δ/3)`. Marginal `i` draws from
/// `key / Cluster / i`.
pub fn private_cluster_init<T: Real>(
    ds: &TemporalDataset<T>,
    radius: f64,
    eps: f64,
    delta: f64,
    opts: &ClusterOptions,
    key: &RngKey,
) -> Result<WarmStart> {
    check_budget(eps, delta)?;
    check_domain(ds, radius)?;
    let k = opts.k;
    if k == 0 || opts.seed_cells == 0 {
        return Err(Error::Parameter("k and seed_cells must be >= 1".into()));
    }
    if let Some(i) = ds.counts().iter().position(|&n| n < k) {
        return Err(Error::DegenerateCluster(format!(
            "k = {k} exceeds the {} points of snapshot {i}",
            ds.snapshot(i).len()
        )));
    }
    let parts = (1 + 2 * opts.lloyd_iters) as f64;
    let mu_each = mu_for_eps_delta(eps / 3.0, delta / 3.0)?.mu / parts.sqrt();
    // Replacing one point moves one unit between two counts and changes two sums by at most 2R in total.
    let count_sigma = std::f64::consts::SQRT_2 / mu_each;
    let sum_sigma = 2.0 * radius / mu_each;
    let release_sigma = gaussian_mechanism_sigma(1.0, eps / (3.0 * k as f64), delta / (3.0 * k as f64))?;
    let key = key.purpose(Purpose::Cluster);

    let marginals = ds
        .snapshots()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = key.child(i as u64).stream();
            let pts: Vec<Vec<f64>> = s.iter().map(|p| p.iter().map(|v| v.as_f64()).collect()).collect();
            let d = s.dim();
            let mut centers = histogram_seeds(&pts, k, radius, opts.seed_cells, count_sigma, &mut rng);
            let assign = |centers: &[Vec<f64>]| -> Vec<usize> {
                pts.iter()
                    .map(|p| {
                        (0..k)
                            .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                            .unwrap()
                    })
                    .collect()
            };
            for _ in 0..opts.lloyd_iters {
                let labels = assign(&centers);
                let mut sums = vec![vec![0.0; d]; k];
                let mut counts = vec![0.0; k];
                for (p, &c) in pts.iter().zip(&labels) {
                    counts[c] += 1.0;
                    sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
                }
                for c in 0..k {
                    let noisy_sum: Vec<f64> = sums[c]
                        .iter()
                        .zip(gaussian_vec(&mut rng, d, sum_sigma))
                        .map(|(s, z)| s + z)
                        .collect();
                    let noisy_count = counts[c] + count_sigma * f64::sample_normal(&mut rng);
                    if noisy_count >= 1.0 {
                        let mut next: Vec<f64> = noisy_sum.iter().map(|s| s / noisy_count).collect();
                        project_to_ball(&mut next, radius);
                        centers[c] = next;
                    }
                }
            }
            let labels = assign(&centers);
            let mut counts = vec![0.0; k];
            for &c in &labels {
                counts[c] += 1.0;
            }
            let noisy: Vec<f64> = counts
                .iter()
                .map(|&n| (n + release_sigma * f64::sample_normal(&mut rng)).max(0.0))
                .collect();
            let total: f64 = noisy.iter().sum();
            let weights = if total > 0.0 {
                noisy.iter().map(|w| w / total).collect()
            } else {
                vec![1.0 / k as f64; k]
            };
            Ok(MarginalStart { centers, weights })
        })
        .collect::<Result<Vec<_>>>()?;

    let ledger = cluster_ledger(ds.len(), eps, delta, k)?;
    Ok(WarmStart {
        times: ds.grid().times().iter().map(|t| t.as_f64()).collect(),
        marginals,
        ledger,
    })
}

/// Draws `m` particles per marginal from the weighted centers by systematic
/// resampling (one uniform offset, so center `c` receives `⌊m w_c⌋` or
/// `⌈m w_c⌉` particles) and adds `N(0, jitter_std²)` per coordinate.
/// Marginal `i` draws from `key / Jitter / i`.
pub fn materialize_particles<T: Real>(
    ws: &WarmStart,
    m: usize,
    jitter_std: f64,
    key: &RngKey,
) -> Result<ParticleSystem<T>> {
    if m == 0 {
        return Err(Error::Parameter("m must be >= 1".into()));
    }
    if !(jitter_std >= 0.0) {
        return Err(Error::Parameter("jitter std must be >= 0".into()));
    }
    let grid = TimeGrid::new(ws.times.iter().map(|&t| T::lit(t)).collect())?;
    if ws.marginals.len() != grid.len() {
        return Err(Error::Schema("warm start has the wrong number of marginals".into()));
    }
    let key = key.purpose(Purpose::Jitter);
    let clouds = ws
        .marginals
        .iter()
        .enumerate()
        .map(|(i, ms)| {
            if ms.centers.is_empty() || ms.centers.len() != ms.weights.len() {
                return Err(Error::Schema(format!("marginal {i}: centers and weights differ in length")));
            }
            if ms.weights.iter().any(|w| !(*w >= 0.0)) || !(ms.weights.iter().sum::<f64>() > 0.0) {
                return Err(Error::Schema(format!("marginal {i}: weights are not a distribution")));
            }
            let d = ms.centers[0].len();
            let total: f64 = ms.weights.iter().sum();
            let mut rng = key.child(i as u64).stream();
            let mut cloud = PointCloud::with_capacity(d, m);
            let offset = f64::sample_unit(&mut rng);
            let mut acc = 0.0;
            let mut pick = 0;
            for j in 0..m {
                let u = (j as f64 + offset) / m as f64 * total;
                while pick + 1 < ms.centers.len() && u >= acc + ms.weights[pick] {
                    acc += ms.weights[pick];
                    pick += 1;
                }
                let p: Vec<T> = ms.centers[pick]
                    .iter()
                    .map(|&v| {
                        let j = if jitter_std > 0.0 { jitter_std * f64::sample_normal(&mut rng) } else { 0.0 };
                        T::lit(v + j)
                    })
                    .collect();
                cloud.push(&p)?;
            }
            Ok(cloud)
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleSystem::new(grid, clouds)
}

/// Non-private initialization: `m` i.i.d. `N(mean, variance · I)` particles per marginal.
pub fn gaussian_init<T: Real>(
    grid: &TimeGrid<T>,
    m: usize,
    mean: &[f64],
    variance: f64,
    key: &RngKey,
) -> Result<ParticleSystem<T>> {
    if !(variance >= 0.0) || mean.is_empty() || m == 0 {
        return Err(Error::Parameter("Gaussian init needs m >= 1, a mean and variance >= 0".into()));
    }
    let std = variance.sqrt();
    let key = key.purpose(Purpose::Init);
    let clouds = (0..grid.len())
        .map(|i| {
            let mut rng = key.child(i as u64).stream();
            let flat = (0..m * mean.len())
                .map(|n| T::lit(mean[n % mean.len()] + std * f64::sample_normal(&mut rng)))
                .collect();
            PointCloud::from_flat(mean.len(), flat)
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleSystem::new(grid.clone(), clouds)
}

/// Non-private initialization: `m` i.i.d. uniform particles in the box `[lo, hi]` per marginal.
pub fn uniform_box_init<T: Real>(
    grid: &TimeGrid<T>,
    m: usize,
    lo: &[f64],
    hi: &[f64],
    key: &RngKey,
) -> Result<ParticleSystem<T>> {
    if lo.len() != hi.len() || lo.is_empty() || m == 0 || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::Parameter("box init needs m >= 1 and lo <= hi".into()));
    }
    let d = lo.len();
    let key = key.purpose(Purpose::Init);
    let clouds = (0..grid.len())
        .map(|i| {
            let mut rng = key.child(i as u64).stream();
            let flat = (0..m * d)
                .map(|n| {
                    let c = n % d;
                    T::lit(lo[c] + (hi[c] - lo[c]) * f64::sample_unit(&mut rng))
                })
                .collect();
            PointCloud::from_flat(d, flat)
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleSystem::new(grid.clone(), clouds)
}
