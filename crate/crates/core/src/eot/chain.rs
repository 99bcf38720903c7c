use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::plan::TransportPlan;

/// Markov chain obtained by disintegrating consecutive couplings:
/// `R(dx_1..dx_T) = gamma_1(dx_1, dx_2) gamma_2(dx_3 | x_2) ... gamma_{T-1}(dx_T | x_{T-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct MarkovChainCoupling<T> {
    pub initial: Vec<T>,
    /// Row-stochastic kernels, each stored row-major with its `(rows, cols)`.
    pub kernels: Vec<(usize, usize, Vec<T>)>,
}

impl<T: Real> MarkovChainCoupling<T> {
    pub fn len(&self) -> usize {
        self.kernels.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kernel_row(&self, i: usize, j: usize) -> &[T] {
        let (_, cols, ref k) = self.kernels[i];
        &k[j * cols..(j + 1) * cols]
    }

    /// Law of the chain at each step, propagated from the initial weights.
    pub fn marginals(&self) -> Vec<Vec<T>> {
        let mut out = vec![self.initial.clone()];
        for (rows, cols, k) in &self.kernels {
            let prev = out.last().unwrap();
            let mut next = vec![T::zero(); *cols];
            for j in 0..*rows {
                let w = prev[j];
                for (acc, &kv) in next.iter_mut().zip(&k[j * cols..(j + 1) * cols]) {
                    *acc += w * kv;
                }
            }
            out.push(next);
        }
        out
    }
}

/// Composes plans `gamma_1, ..., gamma_{T-1}` into a Markov chain with
/// `K_i[j,k] = gamma_i[j,k] / sum_k gamma_i[j,k]`.
///
/// Consecutive plans must agree on the shared marginal: the realized column
/// sums of `gamma_i` and row sums of `gamma_{i+1}` may differ by at most `tol`.
pub fn compose_plans<T: Real>(plans: &[TransportPlan<T>], tol: T) -> Result<MarkovChainCoupling<T>> {
    let first = plans
        .first()
        .ok_or_else(|| Error::Parameter("need at least one plan".into()))?;
    for (i, w) in plans.windows(2).enumerate() {
        if w[0].cols != w[1].rows {
            return Err(Error::ChainConsistency {
                index: i + 1,
                mismatch: f64::INFINITY,
                tol: tol.as_f64(),
            });
        }
        let mismatch = w[0]
            .col_sums()
            .iter()
            .zip(w[1].row_sums())
            .map(|(&x, y)| (x - y).abs())
            .fold(T::zero(), T::max);
        if mismatch > tol {
            return Err(Error::ChainConsistency {
                index: i + 1,
                mismatch: mismatch.as_f64(),
                tol: tol.as_f64(),
            });
        }
    }
    let initial = first.row_sums();
    let mut kernels = Vec::with_capacity(plans.len());
    for p in plans {
        let rs = p.row_sums();
        let mut k = Vec::with_capacity(p.rows * p.cols);
        for (j, &r) in rs.iter().enumerate() {
            if !(r > T::zero()) {
                return Err(Error::DegeneratePlan { row: j });
            }
            k.extend(p.row(j).iter().map(|&g| g / r));
        }
        kernels.push((p.rows, p.cols, k));
    }
    Ok(MarkovChainCoupling { initial, kernels })
}
