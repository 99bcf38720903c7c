use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::scalar::Real;

/// A path realized at finitely many strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TrajectoryPath<T> {
    pub id: u64,
    pub times: Vec<T>,
    pub points: PointCloud<T>,
}

impl<T: Real> TrajectoryPath<T> {
    pub fn new(id: u64, times: Vec<T>, points: PointCloud<T>) -> Result<Self> {
        if times.len() != points.len() || times.is_empty() {
            return Err(Error::Schema(format!(
                "trajectory {id}: {} times for {} points",
                times.len(),
                points.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Schema(format!("trajectory {id}: times are not strictly increasing")));
        }
        Ok(Self { id, times, points })
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Linear interpolation between recorded points; no extrapolation.
    pub fn value_at(&self, t: T) -> Result<Vec<T>> {
        let n = self.times.len();
        let (lo, hi) = (self.times[0], self.times[n - 1]);
        if t < lo || t > hi {
            return Err(Error::Range {
                time: t.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        let r = self.times.partition_point(|&s| s < t);
        if r < n && self.times[r] == t {
            return Ok(self.points.point(r).to_vec());
        }
        let (t0, t1) = (self.times[r - 1], self.times[r]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.points.point(r - 1), self.points.point(r));
        Ok(a.iter().zip(b).map(|(&x, &y)| x + w * (y - x)).collect())
    }
}

/// A collection of paths of a common dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TrajectorySet<T> {
    pub dim: usize,
    pub paths: Vec<TrajectoryPath<T>>,
}

impl<T: Real> TrajectorySet<T> {
    pub fn new(dim: usize, paths: Vec<TrajectoryPath<T>>) -> Result<Self> {
        if let Some(p) = paths.iter().find(|p| p.dim() != dim) {
            return Err(Error::Schema(format!(
                "trajectory {} has dimension {}, expected {dim}",
                p.id,
                p.dim()
            )));
        }
        Ok(Self { dim, paths })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// One cloud per requested time holding every path's (interpolated) value.
    pub fn marginals_at(&self, times: &[T]) -> Result<Vec<PointCloud<T>>> {
        times
            .iter()
            .map(|&t| {
                let mut c = PointCloud::with_capacity(self.dim, self.paths.len());
                for p in &self.paths {
                    c.push(&p.value_at(t)?)?;
                }
                Ok(c)
            })
            .collect()
    }
}
