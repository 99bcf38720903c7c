//! Entropic and exact optimal transport between consecutive particle marginals.
//!
//! Costs are `C[j,k] = ½‖y_k − x_j‖²`. The Brownian transition constant is
//! dropped because adding a constant to the cost leaves the coupling unchanged.

mod chain;
mod cost;
mod exact;
mod plan;
mod sinkhorn;

pub use chain::{compose_plans, MarkovChainCoupling};
pub use cost::CostMatrix;
pub use exact::{exact_ot, exact_ot_with_duals, ExactSolution, EXACT_OT_CAP};
pub use plan::{barycentric_project, Direction, Duals, TransportPlan};
pub use sinkhorn::{sinkhorn, solve_plan, SinkhornOptions, EPS_FLOOR_FACTOR};

use crate::scalar::Real;

/// Uniform probability weights of length `n`.
pub fn uniform_weights<T: Real>(n: usize) -> Vec<T> {
    vec![T::one() / T::lit(n as f64); n]
}
