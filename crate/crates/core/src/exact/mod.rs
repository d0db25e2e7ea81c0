//! Exact column generation for the clusterwise regression master problem.

pub mod brute;
pub mod cg;
pub mod integerize;
pub mod lp;
pub mod master;
pub mod pricing;

pub use brute::brute_force_optimum;
pub use cg::{column_generation, run_cg, run_cg_controlled, run_cg_plain, CgIteration, CgResult, UnitCg};
pub use integerize::integerize;
pub use master::{solve_restricted_master, update_stabilization, Column, MasterSolution, StabilizationState};
pub use pricing::{pricing_enumerate, solve_pricing_bnb, solve_pricing_bnb_warm, PricingResult};
