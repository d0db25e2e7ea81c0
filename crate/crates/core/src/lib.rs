//! Clusterwise linear regression: exact column generation and heuristics.

pub mod control;
pub mod cost;
pub mod data;
pub mod error;
pub mod gram;
pub mod exact;
pub mod heuristics;
pub mod linalg;
pub mod metrics;
pub mod synth;

pub use control::{RunControl, TracePoint};
pub use cost::{cluster_cost, partition_sse, CostModel, MemberSet};
pub use data::{parse_dataset, parse_dataset_with, validate_partition, Dataset, DatasetOptions, Entity, Partition, Violation};
pub use error::{Error, Result};
pub use linalg::{fit_ols, FitResult};
pub use metrics::{gap_from_best, opt_gap, relative_improvement};
pub use heuristics::Solution;
