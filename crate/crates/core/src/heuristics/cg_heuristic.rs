//! Column generation over groups of entities. A Lloyd-style phase without the
//! size constraint builds R groups, which then act as the units of the
//! set-partitioning problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Solution;
use crate::control::RunControl;
use crate::cost::{partition_sse, CostModel};
use crate::data::{Dataset, Partition};
use crate::error::{contract, Error, Result};
use crate::exact::cg::{column_generation, random_unit_clusters};
use crate::exact::master::StabilizationState;

pub const DEFAULT_GROUPS: usize = 8;

/// Safety cap on reassignment rounds; strict descent ends the phase long before.
const MAX_ROUNDS: usize = 10_000;

/// Output of the grouping phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPhase {
    /// Nonempty, disjoint groups covering every entity, each sorted.
    pub groups: Vec<Vec<usize>>,
    /// Total within-group SSE after each round, starting with the random groups.
    pub history: Vec<f64>,
}

impl GroupPhase {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

/// Random groups refined by reassigning each entity to the group whose fit
/// gives it the smallest error. An entity moves only on strict improvement.
pub fn group_phase(dataset: &Dataset, r: usize, seed: u64) -> Result<GroupPhase> {
    if r <= dataset.num_clusters() {
        return contract(format!("need more groups than clusters, got R={r} for K={}", dataset.num_clusters()));
    }
    let model = CostModel::new(dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..dataset.len()).map(|_| rng.random_range(0..r)).collect();
    Ok(refine_groups(&model, labels, r))
}

fn refine_groups(model: &CostModel, mut labels: Vec<usize>, r: usize) -> GroupPhase {
    let dataset = model.dataset();
    let members = |labels: &[usize], g: usize| -> Vec<usize> { (0..labels.len()).filter(|&i| labels[i] == g).collect() };
    let mut history = Vec::new();
    for _ in 0..MAX_ROUNDS {
        let fits: Vec<Option<Vec<f64>>> = (0..r)
            .map(|g| {
                let m = members(&labels, g);
                (!m.is_empty()).then(|| model.entity_fit(&m).beta)
            })
            .collect();
        history.push(
            (0..r)
                .filter(|&g| fits[g].is_some())
                .map(|g| model.entity_sse(&members(&labels, g)))
                .sum(),
        );
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let e = dataset.entity(i);
            let own = fits[*label].as_ref().map_or(f64::INFINITY, |b| e.sse_under(b));
            let best = (0..r)
                .filter_map(|g| fits[g].as_ref().map(|b| (g, e.sse_under(b))))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((g, v)) = best {
                if v < own {
                    *label = g;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let groups: Vec<Vec<usize>> = (0..r).map(|g| members(&labels, g)).filter(|m| !m.is_empty()).collect();
    GroupPhase { groups, history }
}

pub fn run_cg_heuristic(dataset: &Dataset, r: usize, seed: u64) -> Result<Solution> {
    run_cg_heuristic_controlled(dataset, r, seed, &mut RunControl::unlimited())
}

pub fn run_cg_heuristic_controlled(
    dataset: &Dataset,
    r: usize,
    seed: u64,
    control: &mut RunControl,
) -> Result<Solution> {
    let phase = group_phase(dataset, r, seed)?;
    cg_over_groups(dataset, phase.groups, seed, control)
}

/// Stabilized column generation with each group as one unit. When the groups
/// cannot form K clusters of at least n entities, the largest group is halved
/// until they can.
pub fn cg_over_groups(
    dataset: &Dataset,
    mut groups: Vec<Vec<usize>>,
    seed: u64,
    control: &mut RunControl,
) -> Result<Solution> {
    let (k, n) = (dataset.num_clusters(), dataset.min_cluster_size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let (model, initial) = loop {
        let model = CostModel::over_groups(dataset, &groups);
        if let Some(initial) = random_unit_clusters(&model, k, n, &mut rng) {
            break (model, initial);
        }
        let largest = (0..groups.len()).max_by_key(|&g| (groups[g].len(), usize::MAX - g)).expect("nonempty");
        if groups[largest].len() < 2 {
            return Err(Error::Infeasible { entities: dataset.len(), k, n });
        }
        let half = groups[largest].len() / 2;
        let tail = groups[largest].split_off(half);
        log::info!("splitting group {largest} to reach a feasible grouping");
        groups.push(tail);
    };
    let start: Vec<Vec<usize>> = initial.iter().map(|s| model.entities_of(s)).collect();
    control.record(partition_sse(dataset, &Partition::from_clusters(dataset.len(), &start))?);

    let out = column_generation(&model, k, n, initial, StabilizationState::new(groups.len()), control)?;
    let clusters: Vec<Vec<usize>> = out.clusters.iter().map(|s| model.entities_of(s)).collect();
    let partition = Partition::from_clusters(dataset.len(), &clusters);
    let sse = partition_sse(dataset, &partition)?;
    control.record(sse);
    Ok(Solution { partition, sse, iterations: out.iterations, converged: out.converged, trace: control.trace().to_vec() })
}
