//! Observed snapshots and the optimizer's particle state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::scalar::{norm, Real};

/// One non-empty point set per grid time, all in the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TemporalDataset<T> {
    grid: TimeGrid<T>,
    snapshots: Vec<PointCloud<T>>,
}

impl<T: Real> TemporalDataset<T> {
    pub fn new(grid: TimeGrid<T>, snapshots: Vec<PointCloud<T>>) -> Result<Self> {
        if snapshots.len() != grid.len() {
            return Err(Error::Schema(format!(
                "{} snapshots for a grid of {} times",
                snapshots.len(),
                grid.len()
            )));
        }
        let dim = snapshots[0].dim();
        for (i, s) in snapshots.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Schema(format!("empty snapshot at time index {i}")));
            }
            if s.dim() != dim {
                return Err(Error::Schema(format!(
                    "snapshot {i} has dimension {} but the dataset has dimension {dim}",
                    s.dim()
                )));
            }
            if !s.is_finite() {
                return Err(Error::Schema(format!("non-finite coordinate in snapshot {i}")));
            }
        }
        Ok(Self { grid, snapshots })
    }

    /// Groups `(time index, point)` records into snapshots.
    pub fn from_records(grid: TimeGrid<T>, records: &[(usize, Vec<T>)]) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.1.len())
            .ok_or_else(|| Error::Schema("no records".into()))?;
        let mut snaps: Vec<PointCloud<T>> = (0..grid.len()).map(|_| PointCloud::new(dim)).collect();
        for (n, (t, x)) in records.iter().enumerate() {
            let snap = snaps
                .get_mut(*t)
                .ok_or_else(|| Error::Schema(format!("record {n}: time index {t} outside the grid")))?;
            snap.push(x)
                .map_err(|_| Error::Schema(format!("record {n}: dimension {} differs from {dim}", x.len())))?;
        }
        Self::new(grid, snaps)
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn snapshots(&self) -> &[PointCloud<T>] {
        &self.snapshots
    }

    pub fn snapshot(&self, i: usize) -> &PointCloud<T> {
        &self.snapshots[i]
    }

    pub fn dim(&self) -> usize {
        self.snapshots[0].dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn counts(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.len()).collect()
    }

    pub fn total_count(&self) -> usize {
        self.snapshots.iter().map(|s| s.len()).sum()
    }

    /// Flattened `(time index, point)` records in snapshot order.
    pub fn records(&self) -> Vec<(usize, Vec<T>)> {
        self.snapshots
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |p| (i, p.to_vec())))
            .collect()
    }

    pub fn cast<U: Real>(&self) -> TemporalDataset<U> {
        TemporalDataset {
            grid: self.grid.cast(),
            snapshots: self.snapshots.iter().map(|s| s.cast()).collect(),
        }
    }
}

/// Checks that every observation lies in the closed ball `B_0(radius)`.
pub fn validate_dataset<T: Real>(raw: TemporalDataset<T>, radius: f64) -> Result<TemporalDataset<T>> {
    for (i, s) in raw.snapshots.iter().enumerate() {
        for (j, p) in s.iter().enumerate() {
            let n = norm(p).as_f64();
            if !(n <= radius) {
                return Err(Error::DomainViolation {
                    time: i,
                    point: j,
                    norm: n,
                    radius,
                });
            }
        }
    }
    Ok(raw)
}

/// `m` particles for each grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct ParticleSystem<T> {
    grid: TimeGrid<T>,
    particles: Vec<PointCloud<T>>,
}

impl<T: Real> ParticleSystem<T> {
    pub fn new(grid: TimeGrid<T>, particles: Vec<PointCloud<T>>) -> Result<Self> {
        if particles.len() != grid.len() {
            return Err(Error::Schema(format!(
                "{} particle marginals for a grid of {} times",
                particles.len(),
                grid.len()
            )));
        }
        let m = particles[0].len();
        let dim = particles[0].dim();
        if m == 0 {
            return Err(Error::Schema("particle marginals must be non-empty".into()));
        }
        for (i, p) in particles.iter().enumerate() {
            if p.len() != m || p.dim() != dim {
                return Err(Error::Schema(format!(
                    "marginal {i} has {} points of dimension {}, expected {m} of dimension {dim}",
                    p.len(),
                    p.dim()
                )));
            }
            if !p.is_finite() {
                return Err(Error::Schema(format!("non-finite particle in marginal {i}")));
            }
        }
        Ok(Self { grid, particles })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn marginals(&self) -> &[PointCloud<T>] {
        &self.particles
    }

    pub fn marginal(&self, i: usize) -> &PointCloud<T> {
        &self.particles[i]
    }

    /// Particles per marginal.
    pub fn m(&self) -> usize {
        self.particles[0].len()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_parts(self) -> (TimeGrid<T>, Vec<PointCloud<T>>) {
        (self.grid, self.particles)
    }

    /// Reinterprets the particles as an observation dataset (for evaluation).
    pub fn as_dataset(&self) -> TemporalDataset<T> {
        TemporalDataset {
            grid: self.grid.clone(),
            snapshots: self.particles.clone(),
        }
    }
}
