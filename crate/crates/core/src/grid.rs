use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Observation times `t_1 < ... < t_T` in `[0, 1]`, with `T >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TimeGrid<T> {
    times: Vec<T>,
}

/// Affine map `t -> (t - offset) * scale` used to bring raw time stamps into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeRescale {
    pub offset: f64,
    pub scale: f64,
}

impl TimeRescale {
    pub fn apply(&self, t: f64) -> f64 {
        (t - self.offset) * self.scale
    }

    pub fn invert(&self, s: f64) -> f64 {
        s / self.scale + self.offset
    }
}

impl<T: Real> TimeGrid<T> {
    /// Builds a grid from strictly increasing times in `[0, 1]`.
    pub fn new(times: Vec<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Grid(format!("need at least 2 times, got {}", times.len())));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < T::zero() || t > T::one() {
                return Err(Error::Grid(format!("time {t} at index {i} is outside [0, 1]")));
            }
        }
        for (i, w) in times.windows(2).enumerate() {
            if w[1] == w[0] {
                return Err(Error::Grid(format!("duplicated time {} at index {}", w[0], i + 1)));
            }
            if w[1] < w[0] {
                return Err(Error::Grid(format!("times not increasing at index {}", i + 1)));
            }
        }
        Ok(Self { times })
    }

    /// Sorts the input first. Duplicates are rejected.
    pub fn from_unsorted(mut times: Vec<T>) -> Result<Self> {
        if times.iter().any(|t| t.is_nan()) {
            return Err(Error::Grid("NaN time".into()));
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self::new(times)
    }

    /// Rescales arbitrary increasing time stamps affinely onto `[0, 1]`.
    pub fn normalized(raw: &[f64]) -> Result<(Self, TimeRescale)> {
        if raw.len() < 2 {
            return Err(Error::Grid(format!("need at least 2 times, got {}", raw.len())));
        }
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Grid("degenerate time range".into()));
        }
        let map = TimeRescale {
            offset: lo,
            scale: 1.0 / (hi - lo),
        };
        let times = raw.iter().map(|&t| T::lit(map.apply(t).clamp(0.0, 1.0))).collect();
        Ok((Self::from_unsorted(times)?, map))
    }

    /// `T` evenly spaced times from `lo` to `hi` inclusive.
    pub fn uniform(t: usize, lo: f64, hi: f64) -> Result<Self> {
        if t < 2 {
            return Err(Error::Grid(format!("need at least 2 times, got {t}")));
        }
        let times = (0..t)
            .map(|i| T::lit(lo + (hi - lo) * i as f64 / (t - 1) as f64))
            .collect();
        Self::new(times)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn times(&self) -> &[T] {
        &self.times
    }

    #[inline]
    pub fn time(&self, i: usize) -> T {
        self.times[i]
    }

    /// `t_{i+1} - t_i` for `i < T - 1`.
    #[inline]
    pub fn gap(&self, i: usize) -> T {
        self.times[i + 1] - self.times[i]
    }

    pub fn gaps(&self) -> Vec<T> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Nearest grid index; ties go to the earlier index.
    pub fn nearest_index(&self, t: T) -> usize {
        match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.times.len() => self.times.len() - 1,
            Err(i) => {
                let left = t - self.times[i - 1];
                let right = self.times[i] - t;
                if right < left {
                    i
                } else {
                    i - 1
                }
            }
        }
    }

    /// Grid restricted to the given (sorted, distinct) indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if indices.iter().any(|&i| i >= self.len()) {
            return Err(Error::Parameter("subset index out of range".into()));
        }
        Self::new(indices.iter().map(|&i| self.times[i]).collect())
    }

    pub fn cast<U: Real>(&self) -> TimeGrid<U> {
        TimeGrid {
            times: self.times.iter().map(|t| U::lit(t.as_f64())).collect(),
        }
    }
}

impl<T: Real> TryFrom<Vec<T>> for TimeGrid<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<TimeGrid<T>> for Vec<T> {
    fn from(g: TimeGrid<T>) -> Vec<T> {
        g.times
    }
}
