//! Heuristic solvers and the shared initialization routines.

use serde::{Deserialize, Serialize};

use crate::control::TracePoint;
use crate::data::Partition;

pub mod cg_heuristic;
mod eval;
pub mod ga;
pub mod init;
pub mod spaeth;
pub mod two_stage;

pub use cg_heuristic::{cg_over_groups, group_phase, run_cg_heuristic, run_cg_heuristic_controlled, GroupPhase, DEFAULT_GROUPS};
pub use ga::{run_ga_lloyd, run_ga_lloyd_controlled, GaParams};
pub use init::{random_partition, random_partition_with, repair_min_size};
pub use spaeth::{run_spaeth, run_spaeth_controlled, SpaethMove};
pub use two_stage::{complete_linkage_cluster, correlation_distance, run_two_stage, seasonal_residual_vector};

/// Result of a heuristic run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub partition: Partition,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}
