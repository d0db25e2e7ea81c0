//! Column generation loops, plain and stabilized.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integerize::integerize;
use super::master::{solve_restricted_master, update_stabilization, Column, MasterSolution, StabilizationState};
use super::pricing::solve_pricing_bnb_warm;
use crate::control::{RunControl, TracePoint};
use crate::cost::{partition_sse, CostModel, MemberSet};
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};
use crate::heuristics::init::{random_partition_with, repair_units};

/// Per-iteration record of the master and pricing outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgIteration {
    pub master_objective: f64,
    pub xi_max: f64,
    pub reduced_cost: f64,
    pub added: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CgResult {
    pub partition: Partition,
    pub objective: f64,
    pub lp_objective: f64,
    pub iterations: usize,
    pub integral: bool,
    pub converged: bool,
    pub wall_time_ms: f64,
    pub pool_size: usize,
    /// Duals of the assignment rows at the last master solve.
    pub pi: Vec<f64>,
    pub upsilon: f64,
    pub history: Vec<CgIteration>,
    pub trace: Vec<TracePoint>,
}

impl CgResult {
    pub fn wall_time(&self) -> Duration {
        Duration::from_secs_f64(self.wall_time_ms / 1e3)
    }

    /// JSON document with the partition keyed by entity id.
    pub fn to_json(&self, dataset: &Dataset) -> serde_json::Value {
        let partition: serde_json::Map<String, serde_json::Value> = dataset
            .entities()
            .iter()
            .zip(self.partition.labels())
            .map(|(e, &c)| (e.id.clone(), serde_json::Value::from(c)))
            .collect();
        serde_json::json!({
            "objective": self.objective,
            "lp_objective": self.lp_objective,
            "iterations": self.iterations,
            "integral": self.integral,
            "converged": self.converged,
            "wall_time_ms": self.wall_time_ms,
            "pool_size": self.pool_size,
            "partition": partition,
        })
    }
}

/// Outcome of column generation over the units of a cost model.
#[derive(Debug, Clone)]
pub struct UnitCg {
    /// Selected columns, as sets of units.
    pub clusters: Vec<MemberSet>,
    pub objective: f64,
    pub lp_objective: f64,
    pub iterations: usize,
    pub integral: bool,
    pub converged: bool,
    pub pool: Vec<Column>,
    pub pi: Vec<f64>,
    pub upsilon: f64,
    pub history: Vec<CgIteration>,
}

/// Stabilized column generation from a random repaired partition.
pub fn run_cg(dataset: &Dataset, stab0: StabilizationState, seed: u64) -> Result<CgResult> {
    run_cg_controlled(dataset, stab0, seed, &mut RunControl::unlimited())
}

/// Column generation with the perturbation box fixed at zero.
pub fn run_cg_plain(dataset: &Dataset, seed: u64) -> Result<CgResult> {
    run_cg_controlled(dataset, StabilizationState::unstabilized(dataset.len()), seed, &mut RunControl::unlimited())
}

pub fn run_cg_controlled(
    dataset: &Dataset,
    stab0: StabilizationState,
    seed: u64,
    control: &mut RunControl,
) -> Result<CgResult> {
    if stab0.rows() != dataset.len() {
        return Err(Error::Contract(format!(
            "stabilization has {} rows for {} entities",
            stab0.rows(),
            dataset.len()
        )));
    }
    let model = CostModel::new(dataset);
    let (k, n) = (dataset.num_clusters(), dataset.min_cluster_size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_partition_with(&model, k, n, &mut rng);
    let initial: Vec<MemberSet> =
        start.clusters().into_iter().map(MemberSet::from_indices).collect();
    control.record(model.partition_cost(&start));

    let out = column_generation(&model, k, n, initial, stab0, control)?;
    let clusters: Vec<Vec<usize>> = out.clusters.iter().map(|s| model.entities_of(s)).collect();
    let partition = Partition::from_clusters(dataset.len(), &clusters);
    let objective = partition_sse(dataset, &partition)?;
    control.record(objective);
    Ok(CgResult {
        partition,
        objective,
        lp_objective: out.lp_objective,
        iterations: out.iterations,
        integral: out.integral,
        converged: out.converged,
        wall_time_ms: control.elapsed().as_secs_f64() * 1e3,
        pool_size: out.pool.len(),
        pi: out.pi,
        upsilon: out.upsilon,
        history: out.history,
        trace: control.trace().to_vec(),
    })
}

/// K initial unit clusters for a model whose units may carry several
/// entities. Units are assigned uniformly at random and repaired by weight.
/// Returns `None` when the units cannot form `k` clusters of weight `n`.
pub(crate) fn random_unit_clusters(
    model: &CostModel,
    k: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<MemberSet>> {
    use rand::Rng;
    if model.num_units() < k {
        return None;
    }
    let labels: Vec<usize> = (0..model.num_units()).map(|_| rng.random_range(0..k)).collect();
    let labels = repair_units(model, &labels, k, n)?;
    let clusters: Vec<MemberSet> =
        (0..k).map(|c| MemberSet::from_indices((0..labels.len()).filter(|&u| labels[u] == c))).collect();
    clusters.iter().all(|s| !s.is_empty()).then_some(clusters)
}

/// The column generation loop over the units of `model`, starting from the
/// `k` disjoint unit sets in `initial`.
pub fn column_generation(
    model: &CostModel,
    k: usize,
    n: usize,
    initial: Vec<MemberSet>,
    mut stab: StabilizationState,
    control: &mut RunControl,
) -> Result<UnitCg> {
    let rows = model.num_units();
    let mut pool: Vec<Column> = initial
        .into_iter()
        .map(|members| Column { cost: model.sse(&members), members })
        .collect();
    let scale = pool.iter().map(|c| c.cost).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut history = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;
    let mut last: Option<MasterSolution> = None;

    while iterations < stab.k_max && !control.expired() {
        let sol = solve_restricted_master(&pool, k, &stab)?;
        iterations += 1;
        stab.iteration = iterations;
        let pricing = solve_pricing_bnb_warm(model, &sol.pi, sol.upsilon, n, &pool);
        let fresh = !pool.iter().any(|c| c.members == pricing.members);
        let added = pricing.reduced_cost < -tol && fresh;
        history.push(CgIteration {
            master_objective: sol.objective,
            xi_max: stab.xi.iter().copied().fold(0.0, f64::max),
            reduced_cost: pricing.reduced_cost,
            added,
        });
        log::debug!(
            "cg iter {iterations}: master {:.6} rc {:.3e} pool {}",
            sol.objective,
            pricing.reduced_cost,
            pool.len()
        );
        if added {
            let cost = model.sse(&pricing.members);
            pool.push(Column { members: pricing.members, cost });
            last = Some(sol);
            continue;
        }
        if sol.perturbation_free() {
            if pricing.reduced_cost < -tol {
                log::warn!("pricing returned a pool column with reduced cost {:.3e}", pricing.reduced_cost);
            }
            converged = true;
            last = Some(sol);
            break;
        }
        stab = update_stabilization(&stab, &sol.pi);
        last = Some(sol);
    }

    let (pi, upsilon, lp_objective, support) = match &last {
        Some(sol) => {
            let support = if sol.perturbation_free() { sol.integral_support(1e-9) } else { None };
            (sol.pi.clone(), sol.upsilon, sol.objective, support)
        }
        None => (vec![0.0; rows], 0.0, f64::NEG_INFINITY, None),
    };
    let (chosen, integral) = match support {
        Some(s) if s.len() == k => (s, true),
        _ => (integerize(&pool, k, rows)?, false),
    };
    let clusters: Vec<MemberSet> = chosen.iter().map(|&j| pool[j].members.clone()).collect();
    let objective = chosen.iter().map(|&j| pool[j].cost).sum();
    Ok(UnitCg { clusters, objective, lp_objective, iterations, integral, converged, pool, pi, upsilon, history })
}
