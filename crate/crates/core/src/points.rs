use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A list of points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        Self {
            dim,
            data: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Schema("dimension must be positive".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::Schema(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::Schema("no points".into()))?;
        let mut pc = Self::with_capacity(dim, rows.len());
        for r in rows {
            pc.push(r.as_ref())?;
        }
        Ok(pc)
    }

    /// `n` copies of `point`.
    pub fn repeat(point: &[T], n: usize) -> Self {
        let mut data = Vec::with_capacity(point.len() * n);
        for _ in 0..n {
            data.extend_from_slice(point);
        }
        Self { dim: point.len(), data }
    }

    pub fn push(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::Schema(format!(
                "point of dimension {} pushed into cloud of dimension {}",
                p.len(),
                self.dim
            )));
        }
        self.data.extend_from_slice(p);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for p in self.iter() {
            for (a, &b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = T::lit(self.len() as f64);
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.data.extend_from_slice(self.point(i));
        }
        out
    }

    pub fn to_rows_f64(&self) -> Vec<Vec<f64>> {
        self.iter().map(|p| p.iter().map(|x| x.as_f64()).collect()).collect()
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud {
            dim: self.dim,
            data: self.data.iter().map(|x| U::lit(x.as_f64())).collect(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_roundtrip_and_mean() {
        let pc = PointCloud::<f64>::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(pc.len(), 2);
        assert_eq!(pc.point(1), &[2.0, 3.0]);
        assert_eq!(pc.mean(), vec![1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let err = PointCloud::<f64>::from_rows(&[vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }
}
