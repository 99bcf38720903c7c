use crate::error::{Error, Result};
use crate::points::PointCloud;
use crate::scalar::{logsumexp_by, Real};

use super::cost::CostMatrix;
use super::exact::exact_ot;
use super::plan::{Duals, TransportPlan};

/// Regularizations at or below `EPS_FLOOR_FACTOR * median(C)` are solved exactly.
pub const EPS_FLOOR_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SinkhornOptions<T> {
    /// Target L∞ violation of the row marginal (columns are exact after each sweep).
    pub tol: T,
    pub max_iter: usize,
    /// Initial `(phi, psi)`, typically the previous outer iteration's duals.
    pub warm_start: Option<Duals<T>>,
    /// Anneal `eps` geometrically from the cost scale when no warm start is given.
    pub eps_scaling: bool,
}

impl<T: Real> Default for SinkhornOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 100_000,
            warm_start: None,
            eps_scaling: true,
        }
    }
}

impl<T: Real> SinkhornOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }

    pub fn with_warm_start(mut self, duals: Option<Duals<T>>) -> Self {
        self.warm_start = duals;
        self
    }
}

fn check_weights<T: Real>(w: &[T], name: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Parameter(format!("{name}: empty weight vector")));
    }
    if w.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(Error::Parameter(format!("{name}: weights must be positive and finite")));
    }
    let s: T = w.iter().cloned().sum();
    if (s - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::Parameter(format!("{name}: weights sum to {s}, expected 1")));
    }
    Ok(())
}

/// Log-domain Sinkhorn iterations for entropic OT with regularization `eps`.
///
/// The dual updates are
/// `phi_j = -eps log sum_k b_k exp((psi_k - C_jk)/eps)` and
/// `psi_k = -eps log sum_j a_j exp((phi_j - C_jk)/eps)`,
/// and the returned coupling is `a_j b_k exp((phi_j + psi_k - C_jk)/eps)`.
/// Iteration stops once the row-marginal violation is at most `tol`; if
/// `max_iter` is reached first the best iterate is returned with
/// `converged = false`.
pub fn sinkhorn<T: Real>(
    a: &[T],
    b: &[T],
    cost: &CostMatrix<T>,
    eps: T,
    opts: &SinkhornOptions<T>,
) -> Result<TransportPlan<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::Parameter(format!("sinkhorn regularization must be positive, got {eps}")));
    }
    check_weights(a, "source")?;
    check_weights(b, "target")?;
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::Schema(format!(
            "cost is {}x{} but weights are {}x{}",
            cost.rows(),
            cost.cols(),
            a.len(),
            b.len()
        )));
    }
    if !cost.is_finite() {
        return Err(Error::Numeric("non-finite cost entry".into()));
    }

    let n = a.len();
    let m = b.len();
    let log_a: Vec<T> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<T> = b.iter().map(|x| x.ln()).collect();

    let (mut phi, mut psi) = match &opts.warm_start {
        Some(d) if d.phi.len() == n && d.psi.len() == m && d.phi.iter().chain(&d.psi).all(|v| v.is_finite()) => {
            (d.phi.clone(), d.psi.clone())
        }
        _ => (vec![T::zero(); n], vec![T::zero(); m]),
    };

    // Annealing schedule: eps_s = eps * 2^s down to s = 0.
    let mut schedule = Vec::new();
    if opts.eps_scaling && opts.warm_start.is_none() {
        let scale = cost.max() - cost.as_slice().iter().cloned().fold(T::infinity(), T::min);
        let mut e = eps;
        while e < scale {
            e = e * T::lit(2.0);
            schedule.push(e);
        }
        schedule.reverse();
    }
    schedule.push(eps);

    let stage_tol = T::lit(1e-3).max(opts.tol);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut row_lse = vec![T::zero(); n];

    let last = schedule.len() - 1;
    for (stage, &e) in schedule.iter().enumerate() {
        let tol = if stage == last { opts.tol } else { stage_tol };
        // Initial psi sweep makes the columns exact for the current phi.
        update_psi(&mut psi, &phi, &log_a, cost, e);
        loop {
            // Row sums of the current coupling are a_j exp(phi_j/e + lse_j).
            let mut viol = T::zero();
            for j in 0..n {
                let row = cost.row(j);
                let lse = logsumexp_by(m, |k| log_b[k] + (psi[k] - row[k]) / e);
                row_lse[j] = lse;
                let r = a[j] * (phi[j] / e + lse).exp();
                viol = viol.max((r - a[j]).abs());
            }
            if viol <= tol {
                if stage == last {
                    converged = true;
                }
                break;
            }
            if iterations >= opts.max_iter {
                break;
            }
            for j in 0..n {
                phi[j] = -e * row_lse[j];
            }
            update_psi(&mut psi, &phi, &log_a, cost, e);
            iterations += 1;
        }
        if iterations >= opts.max_iter && stage != last {
            // Budget exhausted while annealing; finish on the target eps with what is left.
            continue;
        }
    }

    // Fix the translation (phi + k, psi - k) by mean(phi) = 0.
    let kappa = phi.iter().cloned().sum::<T>() / T::lit(n as f64);
    phi.iter_mut().for_each(|p| *p -= kappa);
    psi.iter_mut().for_each(|p| *p += kappa);

    let mut gamma = Vec::with_capacity(n * m);
    for j in 0..n {
        let row = cost.row(j);
        for k in 0..m {
            gamma.push((log_a[j] + log_b[k] + (phi[j] + psi[k] - row[k]) / eps).exp());
        }
    }
    if gamma.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("sinkhorn produced a non-finite coupling".into()));
    }
    if !converged {
        log::debug!("sinkhorn hit max_iter={} at eps={}", opts.max_iter, eps);
    }
    Ok(TransportPlan::assemble(
        gamma,
        a.to_vec(),
        b.to_vec(),
        cost,
        eps,
        Some(Duals { phi, psi }),
        converged,
        iterations,
    ))
}

fn update_psi<T: Real>(psi: &mut [T], phi: &[T], log_a: &[T], cost: &CostMatrix<T>, e: T) {
    let n = phi.len();
    for (k, p) in psi.iter_mut().enumerate() {
        let lse = logsumexp_by(n, |j| log_a[j] + (phi[j] - cost.get(j, k)) / e);
        *p = -e * lse;
    }
}

/// Plan between two particle clouds with uniform weights and cost `½‖y − x‖²`.
///
/// Uses Sinkhorn when `eps` exceeds `EPS_FLOOR_FACTOR * median(C)` and the
/// exact solver otherwise.
pub fn solve_plan<T: Real>(
    source: &PointCloud<T>,
    target: &PointCloud<T>,
    eps: T,
    opts: &SinkhornOptions<T>,
) -> Result<TransportPlan<T>> {
    let cost = CostMatrix::half_sq_euclidean(source, target);
    let a = super::uniform_weights(source.len());
    let b = super::uniform_weights(target.len());
    let floor = T::lit(EPS_FLOOR_FACTOR) * cost.median();
    if eps <= floor {
        exact_ot(&a, &b, &cost)
    } else {
        sinkhorn(&a, &b, &cost, eps, opts)
    }
}
