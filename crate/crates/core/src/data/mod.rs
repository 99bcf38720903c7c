//! Ground-truth simulation, benchmark generation and ingestion of raw trajectories.

mod binning;
mod multimodal;
mod sde;
mod trajectory;

pub use binning::{arc_length_reparametrize, bin_raw, group_records, marginalize, RawRecord};
pub use multimodal::{make_multimodal, mode_curve, nearest_mode, Multimodal, MODE_COUNT};
pub use sde::{simulate_sde, Drift, InitialLaw, SdeSpec};
pub use trajectory::{TrajectoryPath, TrajectorySet};
