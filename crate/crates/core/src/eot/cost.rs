use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::scalar::{sq_dist, Real};

/// Dense `rows x cols` ground-cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> CostMatrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..rows {
            for k in 0..cols {
                data.push(f(j, k));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Schema(format!(
                "cost buffer of length {} for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// `C[j,k] = ½‖target_k − source_j‖²`.
    pub fn half_sq_euclidean(source: &PointCloud<T>, target: &PointCloud<T>) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(source.len(), target.len(), |j, k| {
            half * sq_dist(source.point(j), target.point(k))
        })
    }

    /// `C[j,k] = ‖target_k − source_j‖²`.
    pub fn sq_euclidean(source: &PointCloud<T>, target: &PointCloud<T>) -> Self {
        Self::from_fn(source.len(), target.len(), |j, k| sq_dist(source.point(j), target.point(k)))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> T {
        self.data[j * self.cols + k]
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.is_finite())
    }

    pub fn max(&self) -> T {
        self.data.iter().cloned().fold(T::neg_infinity(), T::max)
    }

    pub fn median(&self) -> T {
        let mut v = self.data.clone();
        if v.is_empty() {
            return T::zero();
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) * T::lit(0.5)
        }
    }

    pub fn shifted(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x + c).collect(),
        }
    }

    pub fn transposed(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |k, j| self.get(j, k))
    }
}
