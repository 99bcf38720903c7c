use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::scalar::Real;

use super::cost::CostMatrix;

/// Schrödinger potentials, normalized so that `mean(phi) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct Duals<T> {
    pub phi: Vec<T>,
    pub psi: Vec<T>,
}

/// A coupling between a source and a target discrete measure.
///
/// `eps == 0` marks an exact (unregularized) plan, which carries no duals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TransportPlan<T> {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` coupling.
    pub gamma: Vec<T>,
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub duals: Option<Duals<T>>,
    pub eps: T,
    /// L∞ violation of both marginal constraints.
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
    /// `<gamma, C>`.
    pub transport_cost: T,
    /// `H(gamma | a ⊗ b)`.
    pub relative_entropy: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Conditional mean of the target given each source point.
    Forward,
    /// Conditional mean of the source given each target point.
    Backward,
}

impl<T: Real> TransportPlan<T> {
    pub(crate) fn assemble(
        gamma: Vec<T>,
        a: Vec<T>,
        b: Vec<T>,
        cost: &CostMatrix<T>,
        eps: T,
        duals: Option<Duals<T>>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let rows = a.len();
        let cols = b.len();
        let mut transport_cost = T::zero();
        let mut relative_entropy = T::zero();
        for j in 0..rows {
            for k in 0..cols {
                let g = gamma[j * cols + k];
                if g > T::zero() {
                    transport_cost += g * cost.get(j, k);
                    relative_entropy += g * (g / (a[j] * b[k])).ln();
                }
            }
        }
        let mut plan = Self {
            rows,
            cols,
            gamma,
            a,
            b,
            duals,
            eps,
            residual: T::zero(),
            converged,
            iterations,
            transport_cost,
            relative_entropy,
        };
        plan.residual = plan.marginal_violation();
        plan
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> T {
        self.gamma[j * self.cols + k]
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[T] {
        &self.gamma[j * self.cols..(j + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|j| self.row(j).iter().cloned().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.cols];
        for j in 0..self.rows {
            for (acc, &g) in s.iter_mut().zip(self.row(j)) {
                *acc += g;
            }
        }
        s
    }

    pub fn marginal_violation(&self) -> T {
        let r = self
            .row_sums()
            .iter()
            .zip(&self.a)
            .map(|(&s, &a)| (s - a).abs())
            .fold(T::zero(), T::max);
        let c = self
            .col_sums()
            .iter()
            .zip(&self.b)
            .map(|(&s, &b)| (s - b).abs())
            .fold(T::zero(), T::max);
        r.max(c)
    }

    /// `<gamma, C> + eps * H(gamma | a ⊗ b)`.
    pub fn value(&self) -> T {
        if self.eps > T::zero() {
            self.transport_cost + self.eps * self.relative_entropy
        } else {
            self.transport_cost
        }
    }

    /// Rebuilds `a_j b_k exp((phi_j + psi_k - C_jk) / eps)` from the duals.
    pub fn reconstruct_from_duals(&self, cost: &CostMatrix<T>) -> Option<Vec<T>> {
        let d = self.duals.as_ref()?;
        let mut g = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.rows {
            for k in 0..self.cols {
                g.push(self.a[j] * self.b[k] * ((d.phi[j] + d.psi[k] - cost.get(j, k)) / self.eps).exp());
            }
        }
        Some(g)
    }

    pub fn transposed(&self) -> Self {
        let mut gamma = Vec::with_capacity(self.rows * self.cols);
        for k in 0..self.cols {
            for j in 0..self.rows {
                gamma.push(self.get(j, k));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            gamma,
            a: self.b.clone(),
            b: self.a.clone(),
            duals: self.duals.as_ref().map(|d| Duals {
                phi: d.psi.clone(),
                psi: d.phi.clone(),
            }),
            eps: self.eps,
            residual: self.residual,
            converged: self.converged,
            iterations: self.iterations,
            transport_cost: self.transport_cost,
            relative_entropy: self.relative_entropy,
        }
    }
}

/// Conditional means under the plan.
///
/// `Forward` needs the target points and returns one point per source index;
/// `Backward` needs the source points and returns one point per target index.
/// Mass is normalized by the realized row (column) sums of the coupling.
pub fn barycentric_project<T: Real>(
    plan: &TransportPlan<T>,
    other: &PointCloud<T>,
    direction: Direction,
) -> Result<PointCloud<T>> {
    let d = other.dim();
    match direction {
        Direction::Forward => {
            if other.len() != plan.cols {
                return Err(Error::Schema("target cloud size does not match plan".into()));
            }
            let mut out = PointCloud::with_capacity(d, plan.rows);
            let mut acc = vec![T::zero(); d];
            for j in 0..plan.rows {
                acc.iter_mut().for_each(|x| *x = T::zero());
                let mut mass = T::zero();
                for (k, &g) in plan.row(j).iter().enumerate() {
                    if g != T::zero() {
                        mass += g;
                        for (a, &y) in acc.iter_mut().zip(other.point(k)) {
                            *a += g * y;
                        }
                    }
                }
                if !(mass > T::zero()) {
                    return Err(Error::DegeneratePlan { row: j });
                }
                acc.iter_mut().for_each(|x| *x /= mass);
                out.push(&acc)?;
            }
            Ok(out)
        }
        Direction::Backward => {
            if other.len() != plan.rows {
                return Err(Error::Schema("source cloud size does not match plan".into()));
            }
            let mut sums = vec![T::zero(); plan.cols * d];
            let mut mass = vec![T::zero(); plan.cols];
            for j in 0..plan.rows {
                let x = other.point(j);
                for (k, &g) in plan.row(j).iter().enumerate() {
                    if g != T::zero() {
                        mass[k] += g;
                        for (a, &xv) in sums[k * d..(k + 1) * d].iter_mut().zip(x) {
                            *a += g * xv;
                        }
                    }
                }
            }
            for (k, &m) in mass.iter().enumerate() {
                if !(m > T::zero()) {
                    return Err(Error::DegeneratePlan { row: k });
                }
                sums[k * d..(k + 1) * d].iter_mut().for_each(|x| *x /= m);
            }
            PointCloud::from_flat(d, sums)
        }
    }
}
