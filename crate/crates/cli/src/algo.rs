//! Uniform dispatch over every solver.

use std::time::Duration;

use gclr_core::exact::{run_cg_controlled, StabilizationState};
use gclr_core::exact::brute::brute_force_optimum;
use gclr_core::heuristics::two_stage::run_two_stage_controlled;
use gclr_core::heuristics::{
    run_cg_heuristic_controlled, run_ga_lloyd_controlled, run_spaeth_controlled, GaParams, DEFAULT_GROUPS,
};
use gclr_core::{Dataset, Partition, RunControl, TracePoint};
use serde::{Deserialize, Serialize};

/// An algorithm together with its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "kebab-case")]
pub enum Algorithm {
    Cg,
    CgPlain,
    CgHeur {
        #[serde(default = "default_groups")]
        groups: usize,
    },
    GaLloyd {
        #[serde(default = "default_pop_size")]
        pop_size: usize,
        #[serde(default = "default_mutation_prob")]
        mutation_prob: f64,
        #[serde(default = "default_max_stall")]
        max_stall: usize,
        #[serde(default)]
        literal_replacement: bool,
    },
    Spaeth,
    TwoStage {
        #[serde(default)]
        discount_col: usize,
    },
    Brute,
}

fn default_groups() -> usize {
    DEFAULT_GROUPS
}

fn default_pop_size() -> usize {
    GaParams::default().pop_size
}

fn default_mutation_prob() -> f64 {
    GaParams::default().mutation_prob
}

fn default_max_stall() -> usize {
    GaParams::default().max_stall
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Cg => "cg",
            Algorithm::CgPlain => "cg-plain",
            Algorithm::CgHeur { .. } => "cg-heur",
            Algorithm::GaLloyd { .. } => "ga-lloyd",
            Algorithm::Spaeth => "spaeth",
            Algorithm::TwoStage { .. } => "two-stage",
            Algorithm::Brute => "brute",
        }
    }

    /// Parameters as a compact JSON object, without the name.
    pub fn params_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializable");
        if let Some(map) = v.as_object_mut() {
            map.remove("algo");
        }
        v.to_string()
    }
}

/// What every solver reports back.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub partition: Partition,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
    pub wall_time: Duration,
    pub trace: Vec<TracePoint>,
}

pub fn run_algorithm(
    dataset: &Dataset,
    algorithm: &Algorithm,
    seed: u64,
    time_limit: Option<Duration>,
) -> gclr_core::Result<RunOutput> {
    let mut control = time_limit.map_or_else(RunControl::unlimited, RunControl::with_limit);
    let i = dataset.len();
    let (partition, sse, converged, iterations) = match algorithm {
        Algorithm::Cg | Algorithm::CgPlain => {
            let stab = if *algorithm == Algorithm::Cg {
                StabilizationState::new(i)
            } else {
                StabilizationState::unstabilized(i)
            };
            let r = run_cg_controlled(dataset, stab, seed, &mut control)?;
            (r.partition, r.objective, r.converged, r.iterations)
        }
        Algorithm::CgHeur { groups } => {
            let s = run_cg_heuristic_controlled(dataset, *groups, seed, &mut control)?;
            (s.partition, s.sse, s.converged, s.iterations)
        }
        Algorithm::GaLloyd { pop_size, mutation_prob, max_stall, literal_replacement } => {
            let params = GaParams {
                pop_size: *pop_size,
                mutation_prob: *mutation_prob,
                max_stall: *max_stall,
                seed,
                literal_replacement: *literal_replacement,
            };
            let s = run_ga_lloyd_controlled(dataset, &params, &mut control)?;
            (s.partition, s.sse, s.converged, s.iterations)
        }
        Algorithm::Spaeth => {
            let (s, _) = run_spaeth_controlled(dataset, seed, &mut control)?;
            (s.partition, s.sse, s.converged, s.iterations)
        }
        Algorithm::TwoStage { discount_col } => {
            let s = run_two_stage_controlled(dataset, *discount_col, &mut control)?;
            (s.partition, s.sse, s.converged, s.iterations)
        }
        Algorithm::Brute => {
            let (p, sse) = brute_force_optimum(dataset)?;
            control.record(sse);
            (p, sse, true, 0)
        }
    };
    let wall_time = control.elapsed();
    Ok(RunOutput { partition, sse, converged, iterations, wall_time, trace: control.into_trace() })
}
