use std::f64::consts::PI;

use super::trajectory::{TrajectoryPath, TrajectorySet};
use crate::dataset::TemporalDataset;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::rng::{Purpose, RngKey};
use crate::scalar::Real;

pub const MODE_COUNT: usize = 3;

/// Noise-free position of mode `mode` at time `t ∈ [0, 1]`.
///
/// Mode 0 is the upper half circle, 1 the segment on the horizontal axis,
/// 2 the lower half circle; all run from `(-1, 0)` to `(1, 0)`.
pub fn mode_curve(mode: usize, t: f64) -> [f64; 2] {
    let a = PI * (1.0 - t);
    match mode {
        0 => [a.cos(), a.sin()],
        1 => [2.0 * t - 1.0, 0.0],
        2 => [a.cos(), -a.sin()],
        _ => panic!("mode index {mode} out of range"),
    }
}

/// Index of the mode curve closest to `x` at time `t`.
pub fn nearest_mode(x: &[f64], t: f64) -> usize {
    (0..MODE_COUNT)
        .map(|m| {
            let c = mode_curve(m, t);
            (m, (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|p| p.0)
        .unwrap_or(0)
}

pub struct Multimodal<T> {
    pub dataset: TemporalDataset<T>,
    /// Noise-free paths, one per observed point, in the same order as each snapshot.
    pub truth: TrajectorySet<T>,
    /// Mode of each path.
    pub modes: Vec<usize>,
}

/// Three equal-weight modes, `n_per_mode` points each per grid time, with
/// independent `N(0, noise_var I₂)` perturbations drawn afresh at every time.
pub fn make_multimodal<T: Real>(
    n_per_mode: usize,
    grid: &TimeGrid<T>,
    noise_var: f64,
    key: &RngKey,
) -> Result<Multimodal<T>> {
    if n_per_mode == 0 {
        return Err(Error::Parameter("n_per_mode must be >= 1".into()));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Parameter(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let std = noise_var.sqrt();
    let n = MODE_COUNT * n_per_mode;
    let modes: Vec<usize> = (0..n).map(|p| p / n_per_mode).collect();
    let key = key.purpose(Purpose::Multimodal);
    let mut snaps = Vec::with_capacity(grid.len());
    for (i, &t) in grid.times().iter().enumerate() {
        let mut rng = key.child(i as u64).stream();
        let mut c = PointCloud::with_capacity(2, n);
        for &m in &modes {
            let base = mode_curve(m, t.as_f64());
            let p = [
                T::lit(base[0] + std * f64::sample_normal(&mut rng)),
                T::lit(base[1] + std * f64::sample_normal(&mut rng)),
            ];
            c.push(&p)?;
        }
        snaps.push(c);
    }
    let paths = modes
        .iter()
        .enumerate()
        .map(|(p, &m)| {
            let mut pts = PointCloud::with_capacity(2, grid.len());
            for &t in grid.times() {
                let c = mode_curve(m, t.as_f64());
                pts.push(&[T::lit(c[0]), T::lit(c[1])])?;
            }
            TrajectoryPath::new(p as u64, grid.times().to_vec(), pts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Multimodal {
        dataset: TemporalDataset::new(grid.clone(), snaps)?,
        truth: TrajectorySet::new(2, paths)?,
        modes,
    })
}
