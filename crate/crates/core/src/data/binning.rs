use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trajectory::TrajectorySet;
use crate::dataset::TemporalDataset;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey};
use crate::scalar::{norm, Real};

/// One line of a raw trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: u64,
    pub s: f64,
    pub x: Vec<f64>,
}

fn empty_check<T: Real>(snaps: &[PointCloud<T>]) -> Result<()> {
    if let Some(i) = snaps.iter().position(|s| s.is_empty()) {
        return Err(Error::Binning(format!("no observation falls on time index {i}")));
    }
    Ok(())
}

/// Groups records by trajectory id, checking that times increase strictly.
pub fn group_records(raw: &[RawRecord]) -> Result<BTreeMap<u64, Vec<&RawRecord>>> {
    let mut by_id: BTreeMap<u64, Vec<&RawRecord>> = BTreeMap::new();
    for r in raw {
        if !(0.0..=1.0).contains(&r.s) {
            return Err(Error::Ingestion(format!("trajectory {}: time {} outside [0, 1]", r.id, r.s)));
        }
        if r.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Ingestion(format!("trajectory {}: non-finite coordinate", r.id)));
        }
        by_id.entry(r.id).or_default().push(r);
    }
    for (id, recs) in &by_id {
        if recs.windows(2).any(|w| !(w[0].s < w[1].s)) {
            return Err(Error::Ingestion(format!("trajectory {id}: time stamps not strictly increasing")));
        }
    }
    Ok(by_id)
}

/// Bins raw records to the nearest grid time (ties to the earlier index),
/// keeping one uniformly chosen record per trajectory.
///
/// The choice for trajectory `id` draws from `key / Ingest / id`.
pub fn bin_raw<T: Real>(raw: &[RawRecord], grid: &TimeGrid<T>, key: &RngKey) -> Result<TemporalDataset<T>> {
    let by_id = group_records(raw)?;
    let dim = raw
        .first()
        .map(|r| r.x.len())
        .ok_or_else(|| Error::Ingestion("empty trajectory file".into()))?;
    let key = key.purpose(Purpose::Ingest);
    let mut snaps: Vec<PointCloud<T>> = (0..grid.len()).map(|_| PointCloud::new(dim)).collect();
    for (id, recs) in by_id {
        let mut rng = key.child(id).stream();
        let r = recs[rng.random_range(0..recs.len())];
        let i = grid.nearest_index(T::lit(r.s));
        let x: Vec<T> = r.x.iter().map(|&v| T::lit(v)).collect();
        snaps[i]
            .push(&x)
            .map_err(|_| Error::Ingestion(format!("trajectory {id}: dimension {} differs from {dim}", r.x.len())))?;
    }
    empty_check(&snaps)?;
    TemporalDataset::new(grid.clone(), snaps)
}

/// Replaces each trajectory's time stamps by normalized cumulative arc length.
///
/// A trajectory of zero length gets evenly spaced stamps; a single record gets `s = 0`.
pub fn arc_length_reparametrize(raw: &[RawRecord]) -> Result<Vec<RawRecord>> {
    let mut by_id: BTreeMap<u64, Vec<&RawRecord>> = BTreeMap::new();
    for r in raw {
        by_id.entry(r.id).or_default().push(r);
    }
    let mut out = Vec::with_capacity(raw.len());
    for (_, recs) in by_id {
        let mut cum = vec![0.0];
        for w in recs.windows(2) {
            if w[0].x.len() != w[1].x.len() {
                return Err(Error::Ingestion(format!("trajectory {}: mixed dimensions", w[0].id)));
            }
            let step: Vec<f64> = w[0].x.iter().zip(&w[1].x).map(|(a, b)| b - a).collect();
            cum.push(cum.last().unwrap() + norm(&step));
        }
        let total = *cum.last().unwrap();
        let n = recs.len();
        for (k, r) in recs.iter().enumerate() {
            let s = if n == 1 {
                0.0
            } else if total > 0.0 {
                cum[k] / total
            } else {
                k as f64 / (n - 1) as f64
            };
            out.push(RawRecord {
                id: r.id,
                s,
                x: r.x.clone(),
            });
        }
    }
    Ok(out)
}

/// Turns trajectories into snapshots on `grid`.
///
/// With `one_point_per_person`, each trajectory contributes its value at one
/// uniformly random grid index (drawn from `key / Marginalize / path index`);
/// otherwise it contributes at every grid time. Values between recorded times
/// are interpolated linearly.
pub fn marginalize<T: Real>(
    trajs: &TrajectorySet<T>,
    grid: &TimeGrid<T>,
    one_point_per_person: bool,
    key: &RngKey,
) -> Result<TemporalDataset<T>> {
    let key = key.purpose(Purpose::Marginalize);
    let mut snaps: Vec<PointCloud<T>> = (0..grid.len())
        .map(|_| PointCloud::with_capacity(trajs.dim, if one_point_per_person { 0 } else { trajs.len() }))
        .collect();
    for (p, path) in trajs.paths.iter().enumerate() {
        if one_point_per_person {
            let i = key.child(p as u64).stream().random_range(0..grid.len());
            snaps[i].push(&path.value_at(grid.time(i))?)?;
        } else {
            for (i, snap) in snaps.iter_mut().enumerate() {
                snap.push(&path.value_at(grid.time(i))?)?;
            }
        }
    }
    empty_check(&snaps)?;
    TemporalDataset::new(grid.clone(), snaps)
}
