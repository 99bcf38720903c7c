//! Random time-grid subsets and Monte-Carlo statistics of their largest gap.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::dataset::TemporalDataset;
use crate::error::{Error, Result};
use crate::init::{materialize_particles, WarmStart};
use crate::rng::{Purpose, RngKey};
use crate::scalar::Real;

/// Sorted random subset of `0..t` of size `z`.
///
/// With `keep_endpoints`, indices `0` and `t−1` are always kept and the other
/// `z−2` are drawn uniformly from the interior; otherwise all `z` are drawn
/// from the interior `1..t−1`.
pub fn subsample_grid(t: usize, z: usize, keep_endpoints: bool, key: &RngKey) -> Result<Vec<usize>> {
    let mut rng = key.purpose(Purpose::GridSubsample).stream();
    let interior = t.saturating_sub(2);
    let mut out: Vec<usize> = if keep_endpoints {
        if t < 2 || z < 2 || z > t {
            return Err(Error::Parameter(format!("need 2 <= z <= T, got z = {z}, T = {t}")));
        }
        let mut v: Vec<usize> = sample(&mut rng, interior, z - 2).into_iter().map(|i| i + 1).collect();
        v.push(0);
        v.push(t - 1);
        v
    } else {
        if z == 0 || z > interior {
            return Err(Error::Parameter(format!(
                "need 1 <= z <= T - 2 interior indices, got z = {z}, T = {t}"
            )));
        }
        sample(&mut rng, interior, z).into_iter().map(|i| i + 1).collect()
    };
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapStatistics {
    pub mean_max_gap: f64,
    /// Largest gap of every trial.
    pub max_gaps: Vec<usize>,
}

impl GapStatistics {
    /// Empirical `Pr[max gap >= g]`.
    pub fn tail(&self, g: usize) -> f64 {
        self.max_gaps.iter().filter(|&&m| m >= g).count() as f64 / self.max_gaps.len() as f64
    }

    /// The envelope `T exp(−z g / T)`.
    pub fn envelope(t: usize, z: usize, g: usize) -> f64 {
        t as f64 * (-(z as f64) * g as f64 / t as f64).exp()
    }
}

/// Largest spacing of `{0} ∪ S ∪ {t}` for `S` a uniform `z`-subset of `1..t`,
/// over `trials` independent draws (trial `n` uses `key / GapTrials / n`).
pub fn max_gap_statistics(t: usize, z: usize, trials: usize, key: &RngKey) -> Result<GapStatistics> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be >= 1".into()));
    }
    if t < 2 || z == 0 || z > t - 1 {
        return Err(Error::Parameter(format!("need 1 <= z <= T - 1, got z = {z}, T = {t}")));
    }
    let key = key.purpose(Purpose::GapTrials);
    let max_gaps: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|n| {
            let mut rng = key.child(n as u64).stream();
            let mut pts: Vec<usize> = sample(&mut rng, t - 1, z).into_iter().map(|i| i + 1).collect();
            pts.sort_unstable();
            let mut prev = 0;
            let mut best = 0;
            for p in pts.into_iter().chain(std::iter::once(t)) {
                best = best.max(p - prev);
                prev = p;
            }
            best
        })
        .collect();
    let mean_max_gap = max_gaps.iter().sum::<usize>() as f64 / trials as f64;
    Ok(GapStatistics { mean_max_gap, max_gaps })
}

/// Source of privatized endpoint snapshots.
pub struct PrivateEndpoints<'a> {
    pub warm_start: &'a WarmStart,
    /// Points to materialize per endpoint snapshot.
    pub m: usize,
    pub jitter_std: f64,
    pub key: RngKey,
}

/// Dataset restricted to `subset`, keeping the original time values.
///
/// With `endpoints`, the snapshots at the first and last grid index (when
/// present in `subset`) are replaced by points materialized from the warm
/// start. `require_private_endpoints` makes a missing source an error.
pub fn restrict_dataset<T: Real>(
    ds: &TemporalDataset<T>,
    subset: &[usize],
    endpoints: Option<&PrivateEndpoints<'_>>,
    require_private_endpoints: bool,
) -> Result<TemporalDataset<T>> {
    if subset.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("subset must be sorted and distinct".into()));
    }
    let grid = ds.grid().restrict(subset)?;
    let last = ds.len() - 1;
    let touches_end = subset.iter().any(|&i| i == 0 || i == last);
    if require_private_endpoints && touches_end && endpoints.is_none() {
        return Err(Error::Composition(
            "endpoint snapshots are kept but no privatized source was given".into(),
        ));
    }
    let mut snaps: Vec<_> = subset.iter().map(|&i| ds.snapshot(i).clone()).collect();
    if let Some(src) = endpoints {
        if src.warm_start.marginals.len() != ds.len() {
            return Err(Error::Schema("warm start does not match the full grid".into()));
        }
        let synth = materialize_particles::<T>(src.warm_start, src.m, src.jitter_std, &src.key)?;
        for (pos, &i) in subset.iter().enumerate() {
            if i == 0 || i == last {
                snaps[pos] = synth.marginal(i).clone();
            }
        }
    }
    TemporalDataset::new(grid, snaps)
}
