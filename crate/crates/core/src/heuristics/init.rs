//! Random starting partitions and the minimum-size repair shared by all solvers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::CostModel;
use crate::data::{Dataset, Partition};

/// Uniform random assignment of each entity to one of `k` clusters, repaired
/// so every cluster has at least `n` entities.
pub fn random_partition(dataset: &Dataset, k: usize, n: usize, seed: u64) -> Partition {
    let model = CostModel::new(dataset);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_partition_with(&model, k, n, &mut rng)
}

pub fn random_partition_with<R: Rng + ?Sized>(model: &CostModel, k: usize, n: usize, rng: &mut R) -> Partition {
    let labels: Vec<usize> = (0..model.dataset().len()).map(|_| rng.random_range(0..k)).collect();
    repair_with(model, &Partition::new(labels, k), n)
}

/// Moves entities into undersized clusters until each holds at least `n`.
///
/// The smallest deficient cluster (lowest index on ties) is filled first.
/// Candidates are the entities outside it, taken in increasing order of their
/// squared error under their own cluster's fitted coefficients; a move that
/// would leave the donor with fewer than `n` entities is skipped.
pub fn repair_min_size(dataset: &Dataset, p: &Partition, n: usize) -> Partition {
    repair_with(&CostModel::new(dataset), p, n)
}

pub(crate) fn repair_with(model: &CostModel, p: &Partition, n: usize) -> Partition {
    assert_eq!(model.num_units(), model.dataset().len(), "entity-level model expected");
    let labels = repair_units(model, p.labels(), p.num_clusters(), n)
        .expect("I >= K*n guarantees a repair exists");
    Partition::new(labels, p.num_clusters())
}

/// Weighted repair over the units of `model`: a cluster's size is the total
/// weight of its units. Returns `None` when some deficient cluster cannot be
/// filled, which only happens with units of weight above one.
pub(crate) fn repair_units(model: &CostModel, labels: &[usize], k: usize, n: usize) -> Option<Vec<usize>> {
    let mut labels = labels.to_vec();
    let ds = model.dataset();
    loop {
        let mut sizes = vec![0usize; k];
        for (u, &c) in labels.iter().enumerate() {
            sizes[c] += model.weight(u);
        }
        let target = (0..k).filter(|&c| sizes[c] < n).min_by_key(|&c| (sizes[c], c));
        let Some(target) = target else { return Some(labels) };

        let betas: Vec<Option<Vec<f64>>> = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..labels.len())
                    .filter(|&u| labels[u] == c)
                    .flat_map(|u| model.units()[u].members.iter().copied())
                    .collect();
                (!members.is_empty()).then(|| model.entity_fit(&members).beta)
            })
            .collect();
        let mut outsiders: Vec<(f64, usize)> = (0..labels.len())
            .filter(|&u| labels[u] != target)
            .map(|u| {
                let beta = betas[labels[u]].as_ref().expect("outsider's cluster is nonempty");
                let err: f64 = model.units()[u].members.iter().map(|&i| ds.entity(i).sse_under(beta)).sum();
                (err, u)
            })
            .collect();
        outsiders.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (_, u) in outsiders {
            if sizes[target] >= n {
                break;
            }
            let w = model.weight(u);
            let donor = labels[u];
            if sizes[donor] < n + w {
                continue;
            }
            sizes[donor] -= w;
            sizes[target] += w;
            labels[u] = target;
        }
        if sizes[target] < n {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::tests::random_dataset;
    use crate::data::validate_partition;

    #[test]
    fn forced_sizes() {
        let ds = random_dataset(1, 6, 4, 2).retarget(2, 3).unwrap();
        for seed in 0..20 {
            let p = random_partition(&ds, 2, 3, seed);
            assert_eq!(p.sizes(), vec![3, 3]);
        }
    }

    #[test]
    fn same_seed_same_partition() {
        let ds = random_dataset(2, 12, 4, 2);
        assert_eq!(random_partition(&ds, 3, 2, 7), random_partition(&ds, 3, 2, 7));
    }

    #[test]
    fn feasible_partition_is_unchanged() {
        let ds = random_dataset(3, 6, 4, 2);
        let p = Partition::new(vec![0, 1, 0, 1, 1, 0], 2);
        assert_eq!(repair_min_size(&ds, &p, 3), p);
    }

    #[test]
    fn moves_lowest_error_outsiders() {
        let ds = random_dataset(4, 6, 4, 2).retarget(2, 3).unwrap();
        let p = Partition::new(vec![0, 0, 0, 0, 0, 1], 2);
        let r = repair_min_size(&ds, &p, 3);
        assert_eq!(r.sizes(), vec![3, 3]);
        let beta = cluster_beta(&ds, &[0, 1, 2, 3, 4]);
        let mut errs: Vec<(f64, usize)> = (0..5).map(|i| (direct_sse(&ds, i, &beta), i)).collect();
        errs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut expected = vec![errs[0].1, errs[1].1, 5];
        expected.sort();
        assert_eq!(r.clusters()[1], expected);
        assert!(validate_partition(&r, &ds).is_empty());
    }

    fn cluster_beta(ds: &Dataset, members: &[usize]) -> Vec<f64> {
        crate::cost::cluster_cost(ds, members).unwrap().beta
    }

    fn direct_sse(ds: &Dataset, i: usize, beta: &[f64]) -> f64 {
        let e = ds.entity(i);
        (0..e.len())
            .map(|l| {
                let fit: f64 = e.row(l).iter().zip(beta).map(|(x, b)| x * b).sum();
                (e.y[l] - fit).powi(2)
            })
            .sum()
    }

    #[test]
    fn assignment_frequencies_are_uniform() {
        // Thirty entities over three clusters almost never need repair, so the
        // counts follow the uniform law.
        let ds = random_dataset(6, 30, 4, 2);
        let model = CostModel::new(&ds);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (k, draws) = (3, 10_000);
        let mut counts = vec![vec![0usize; k]; 30];
        for _ in 0..draws {
            let p = random_partition_with(&model, k, 1, &mut rng);
            for (i, &c) in p.labels().iter().enumerate() {
                counts[i][c] += 1;
            }
        }
        let mean = draws as f64 / k as f64;
        let sd = (draws as f64 * (1.0 / k as f64) * (1.0 - 1.0 / k as f64)).sqrt();
        for row in counts {
            for c in row {
                assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs mean {mean}");
            }
        }
    }
}
