//! File formats: JSONL snapshots and trajectories, JSON grids and plans, CSV metrics.
//!
//! Numbers are written as `f64` in shortest round-trip form, so
//! write → read → write is byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{RawRecord, TrajectoryPath, TrajectorySet};
use crate::dataset::{ParticleSystem, TemporalDataset};
use crate::eot::TransportPlan;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::points::PointCloud;
use crate::scalar::Real;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotLine {
    t: usize,
    x: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryLine {
    traj_id: u64,
    points: Vec<Vec<f64>>,
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn write_line<W: Write, S: Serialize>(w: &mut W, value: &S) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Parses one JSON value per non-blank line, reporting the line number on failure.
pub fn read_jsonl<R: Read, S: DeserializeOwned>(r: R) -> Result<Vec<S>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}

fn write_clouds<W: Write, T: Real>(w: &mut W, clouds: &[PointCloud<T>]) -> Result<()> {
    for (t, c) in clouds.iter().enumerate() {
        for p in c.iter() {
            write_line(w, &SnapshotLine { t, x: to_f64(p) })?;
        }
    }
    Ok(())
}

fn read_clouds<R: Read, T: Real>(r: R, len: usize) -> Result<Vec<PointCloud<T>>> {
    let lines: Vec<SnapshotLine> = read_jsonl(r)?;
    let dim = lines
        .first()
        .map(|l| l.x.len())
        .ok_or_else(|| Error::Schema("empty snapshot file".into()))?;
    let mut clouds: Vec<PointCloud<T>> = (0..len).map(|_| PointCloud::new(dim)).collect();
    for (n, l) in lines.iter().enumerate() {
        let c = clouds
            .get_mut(l.t)
            .ok_or_else(|| Error::Schema(format!("record {n}: time index {} outside a grid of {len}", l.t)))?;
        c.push(&from_f64::<T>(&l.x))
            .map_err(|_| Error::Schema(format!("record {n}: dimension {} differs from {dim}", l.x.len())))?;
    }
    Ok(clouds)
}

pub fn write_dataset<W: Write, T: Real>(w: &mut W, ds: &TemporalDataset<T>) -> Result<()> {
    write_clouds(w, ds.snapshots())
}

pub fn read_dataset<R: Read, T: Real>(r: R, grid: &TimeGrid<T>) -> Result<TemporalDataset<T>> {
    TemporalDataset::new(grid.clone(), read_clouds(r, grid.len())?)
}

/// Particles use the snapshot line format.
pub fn write_particles<W: Write, T: Real>(w: &mut W, ps: &ParticleSystem<T>) -> Result<()> {
    write_clouds(w, ps.marginals())
}

pub fn read_particles<R: Read, T: Real>(r: R, grid: &TimeGrid<T>) -> Result<ParticleSystem<T>> {
    ParticleSystem::new(grid.clone(), read_clouds(r, grid.len())?)
}

pub fn write_grid<W: Write, T: Real>(w: &mut W, grid: &TimeGrid<T>) -> Result<()> {
    serde_json::to_writer(&mut *w, &to_f64(grid.times()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_grid<R: Read, T: Real>(r: R) -> Result<TimeGrid<T>> {
    let times: Vec<f64> = serde_json::from_reader(r)?;
    TimeGrid::new(from_f64(&times))
}

pub fn write_raw<W: Write>(w: &mut W, raw: &[RawRecord]) -> Result<()> {
    for r in raw {
        write_line(w, r)?;
    }
    Ok(())
}

pub fn read_raw<R: Read>(r: R) -> Result<Vec<RawRecord>> {
    read_jsonl(r)
}

pub fn write_trajectories<W: Write, T: Real>(w: &mut W, set: &TrajectorySet<T>) -> Result<()> {
    for p in &set.paths {
        let points = p
            .times
            .iter()
            .zip(p.points.iter())
            .map(|(t, x)| std::iter::once(t.as_f64()).chain(x.iter().map(|v| v.as_f64())).collect())
            .collect();
        write_line(w, &TrajectoryLine { traj_id: p.id, points })?;
    }
    Ok(())
}

pub fn read_trajectories<R: Read, T: Real>(r: R) -> Result<TrajectorySet<T>> {
    let lines: Vec<TrajectoryLine> = read_jsonl(r)?;
    let dim = lines
        .first()
        .and_then(|l| l.points.first())
        .map(|p| p.len().saturating_sub(1))
        .ok_or_else(|| Error::Schema("empty trajectory file".into()))?;
    let paths = lines
        .into_iter()
        .map(|l| {
            let mut times = Vec::with_capacity(l.points.len());
            let mut pts = PointCloud::with_capacity(dim, l.points.len());
            for p in &l.points {
                if p.len() != dim + 1 {
                    return Err(Error::Schema(format!("trajectory {}: point of length {}", l.traj_id, p.len())));
                }
                times.push(T::lit(p[0]));
                pts.push(&from_f64::<T>(&p[1..]))?;
            }
            TrajectoryPath::new(l.traj_id, times, pts)
        })
        .collect::<Result<Vec<_>>>()?;
    TrajectorySet::new(dim, paths)
}

/// Fitted plans with the metadata needed to sample paths from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlansFile {
    pub times: Vec<f64>,
    /// Diffusivity for Brownian-bridge interpolation (the last phase's `tau`).
    pub bridge_tau: f64,
    pub plans: Vec<TransportPlan<f64>>,
}

pub fn write_json<W: Write, S: Serialize>(w: &mut W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read, S: DeserializeOwned>(r: R) -> Result<S> {
    Ok(serde_json::from_reader(BufReader::new(r))?)
}

/// One row of a metrics CSV. `time_index` is `None` for aggregate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub time_index: Option<usize>,
    pub metric: String,
    pub value: f64,
}

pub fn write_metrics<W: Write>(w: &mut W, rows: &[MetricRow]) -> Result<()> {
    writeln!(w, "time_index,metric,value")?;
    for r in rows {
        let t = r.time_index.map_or_else(|| "mean".to_string(), |t| t.to_string());
        writeln!(w, "{t},{},{}", r.metric, serde_json::to_string(&r.value)?)?;
    }
    Ok(())
}

pub fn read_metrics<R: Read>(r: R) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(r).lines().enumerate().skip(1) {
        let line = line?;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Schema(format!("metrics line {}: expected 3 fields", n + 1)));
        }
        let time_index = if parts[0] == "mean" {
            None
        } else {
            Some(parts[0].parse().map_err(|_| Error::Schema(format!("metrics line {}: bad index", n + 1)))?)
        };
        rows.push(MetricRow {
            time_index,
            metric: parts[1].to_string(),
            value: serde_json::from_str(parts[2])?,
        });
    }
    Ok(rows)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
