//! Noisy, clipped, Poisson-subsampled mean-field Langevin descent on particles.

mod gradient;
mod run;
mod step;

pub use gradient::{
    clip_in_place, fit_gradient_from_log_conv, fit_gradient_per_datum, fit_weights, log_convolution,
    potential_gradient, potential_gradient_from, projections, MIN_LOG_CONVOLUTION,
};
pub use run::{
    load_checkpoint, run, solve_plans, write_checkpoint, CheckpointMeta, Observation, RunOptions, RunOutput,
    CHECKPOINT_META, CHECKPOINT_PARTICLES,
};
pub use step::{mfld_step, poisson_subsample, GradientReport, StepIndex, StepParams};
