//! Späth's exchange heuristic: move single entities between clusters while
//! the total squared error strictly drops.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::eval::Evaluator;
use super::init::random_partition_with;
use super::Solution;
use crate::control::RunControl;
use crate::cost::{partition_sse, CostModel};
use crate::data::{Dataset, Partition};
use crate::error::Result;

/// One executed move, with the exact total before and after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaethMove {
    pub entity: usize,
    pub from: usize,
    pub to: usize,
    pub before: f64,
    pub after: f64,
}

pub fn run_spaeth(dataset: &Dataset, seed: u64) -> Result<Solution> {
    run_spaeth_controlled(dataset, seed, &mut RunControl::unlimited()).map(|(s, _)| s)
}

/// Runs the exchange from a random repaired partition; also returns the move log.
pub fn run_spaeth_controlled(
    dataset: &Dataset,
    seed: u64,
    control: &mut RunControl,
) -> Result<(Solution, Vec<SpaethMove>)> {
    let model = CostModel::new(dataset);
    let (k, n) = (dataset.num_clusters(), dataset.min_cluster_size());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_partition_with(&model, k, n, &mut rng);
    spaeth_from(&model, start, control)
}

pub(crate) fn spaeth_from(
    model: &CostModel,
    start: Partition,
    control: &mut RunControl,
) -> Result<(Solution, Vec<SpaethMove>)> {
    let dataset = model.dataset();
    let (k, n, total) = (start.num_clusters(), dataset.min_cluster_size(), dataset.len());
    let mut eval = Evaluator::new(model);
    let mut clusters = start.clusters();
    let mut cost: Vec<f64> = clusters.iter().map(|c| eval.exact(c)).collect();
    let mut labels = start.labels().to_vec();
    control.record(cost.iter().sum());

    let mut moves = Vec::new();
    let mut idle = 0usize;
    let mut visits = 0usize;
    let mut i = 0usize;
    let mut converged = true;
    while idle < total {
        if control.expired() {
            converged = false;
            break;
        }
        visits += 1;
        let from = labels[i];
        let mut moved = false;
        if clusters[from].len() > n {
            let leave = eval.screened(&clusters[from], None, Some(i));
            let best = (0..k)
                .filter(|&r| r != from)
                .map(|r| {
                    let join = eval.screened(&clusters[r], Some(i), None);
                    (r, join + leave - cost[r] - cost[from])
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((to, delta)) = best {
                if delta < 0.0 {
                    let leave_exact = eval.exact_with(&clusters[from], None, Some(i));
                    let join_exact = eval.exact_with(&clusters[to], Some(i), None);
                    let before: f64 = cost.iter().sum();
                    let after = before - cost[from] - cost[to] + leave_exact + join_exact;
                    if after < before {
                        clusters[from].retain(|&e| e != i);
                        clusters[to].push(i);
                        clusters[to].sort_unstable();
                        cost[from] = leave_exact;
                        cost[to] = join_exact;
                        labels[i] = to;
                        moves.push(SpaethMove { entity: i, from, to, before, after });
                        control.record(after);
                        moved = true;
                    }
                }
            }
        }
        idle = if moved { 0 } else { idle + 1 };
        i = (i + 1) % total;
    }
    let partition = Partition::new(labels, k);
    let sse = partition_sse(dataset, &partition)?;
    control.record(sse);
    let solution = Solution { partition, sse, iterations: visits, converged, trace: control.trace().to_vec() };
    Ok((solution, moves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::tests::random_dataset;
    use crate::data::validate_partition;
    use crate::exact::brute::brute_force_optimum;

    #[test]
    fn moves_strictly_descend_and_end_locally_optimal() {
        let ds = random_dataset(3, 12, 5, 2).retarget(3, 2).unwrap();
        let (sol, moves) = run_spaeth_controlled(&ds, 4, &mut RunControl::unlimited()).unwrap();
        assert!(validate_partition(&sol.partition, &ds).is_empty());
        for m in &moves {
            assert!(m.after < m.before);
        }
        // No single move to another cluster improves the final partition.
        let base = partition_sse(&ds, &sol.partition).unwrap();
        let sizes = sol.partition.sizes();
        for i in 0..ds.len() {
            let from = sol.partition.label(i);
            if sizes[from] <= 2 {
                continue;
            }
            for to in 0..3 {
                if to == from {
                    continue;
                }
                let mut p = sol.partition.clone();
                p.set_label(i, to);
                assert!(partition_sse(&ds, &p).unwrap() >= base * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn never_beats_the_optimum() {
        let ds = random_dataset(8, 6, 4, 2).retarget(2, 1).unwrap();
        let (_, best) = brute_force_optimum(&ds).unwrap();
        for seed in 0..20 {
            let sol = run_spaeth(&ds, seed).unwrap();
            assert!(sol.sse >= best - 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let ds = random_dataset(9, 10, 4, 2).retarget(2, 2).unwrap();
        let a = run_spaeth(&ds, 5).unwrap();
        let b = run_spaeth(&ds, 5).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.sse.to_bits(), b.sse.to_bits());
    }
}
