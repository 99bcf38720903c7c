//! Differentially private continuous-time synthetic trajectories.
//!
//! Particles for each observation time are fitted by noisy, clipped,
//! subsampled mean-field Langevin descent, coupled across time by entropic
//! optimal transport. Sampled paths follow the composed transport plans and
//! are interpolated between grid times by Brownian bridges.

pub mod config;
pub mod data;
pub mod dataset;
pub mod eot;
pub mod error;
pub mod eval;
pub mod grid;
pub mod init;
pub mod io;
pub mod mfld;
pub mod points;
pub mod privacy;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod subsample;

pub use error::{Error, Result};

pub type TimeGrid = grid::TimeGrid<f64>;
pub type PointCloud = points::PointCloud<f64>;
pub type TemporalDataset = dataset::TemporalDataset<f64>;
pub type ParticleSystem = dataset::ParticleSystem<f64>;
pub type TransportPlan = eot::TransportPlan<f64>;
pub type CostMatrix = eot::CostMatrix<f64>;
pub type MarkovChainCoupling = eot::MarkovChainCoupling<f64>;
pub type TrajectorySet = data::TrajectorySet<f64>;
