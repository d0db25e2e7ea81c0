//! Exhaustive optimum over all feasible partitions of a tiny instance.

use crate::cost::{partition_sse, CostModel, MemberSet};
use crate::data::{Dataset, Partition};
use crate::error::{Error, Result};

/// Largest number of `K`-block set partitions enumerated.
pub const PARTITION_LIMIT: f64 = 1e7;

/// Stirling number of the second kind, as a float to avoid overflow.
pub fn stirling2(i: usize, k: usize) -> f64 {
    let mut row = vec![0.0; k + 1];
    row[0] = 1.0;
    for m in 1..=i {
        for j in (1..=k.min(m)).rev() {
            row[j] = j as f64 * row[j] + row[j - 1];
        }
        row[0] = 0.0;
    }
    row[k]
}

/// Enumerates every partition of the entities into `K` unlabeled clusters of
/// size at least `n` and returns a minimizer with its SSE.
pub fn brute_force_optimum(dataset: &Dataset) -> Result<(Partition, f64)> {
    let model = CostModel::new(dataset);
    let (i, k, n) = (dataset.len(), dataset.num_clusters(), dataset.min_cluster_size());
    let count = stirling2(i, k);
    if count > PARTITION_LIMIT {
        return Err(Error::TooLarge(format!("{count:.3e} partitions of {i} entities into {k} clusters")));
    }
    let mut state = State {
        model: &model,
        k,
        n,
        labels: vec![0; i],
        sizes: vec![0; k],
        best: f64::INFINITY,
        best_labels: None,
        visited: 0,
    };
    state.assign(0, 0);
    let labels = state.best_labels.expect("I >= K*n admits a partition");
    let p = Partition::new(labels, k);
    let sse = partition_sse(dataset, &p)?;
    Ok((p, sse))
}

/// Number of feasible partitions the enumeration visits.
pub fn count_feasible_partitions(dataset: &Dataset) -> u64 {
    let model = CostModel::new(dataset);
    let (i, k, n) = (dataset.len(), dataset.num_clusters(), dataset.min_cluster_size());
    let mut state =
        State { model: &model, k, n, labels: vec![0; i], sizes: vec![0; k], best: f64::INFINITY, best_labels: None, visited: 0 };
    state.assign(0, 0);
    state.visited
}

struct State<'a, 'd> {
    model: &'a CostModel<'d>,
    k: usize,
    n: usize,
    labels: Vec<usize>,
    sizes: Vec<usize>,
    best: f64,
    best_labels: Option<Vec<usize>>,
    visited: u64,
}

impl State<'_, '_> {
    // Restricted growth strings: entity `i` joins an open cluster or opens the next one.
    fn assign(&mut self, i: usize, open: usize) {
        let total = self.labels.len();
        let remaining = total - i;
        let missing: usize = self.sizes[..open].iter().map(|&s| self.n.saturating_sub(s)).sum::<usize>()
            + self.n * (self.k - open);
        if missing > remaining {
            return;
        }
        if i == total {
            self.visited += 1;
            let clusters = (0..self.k).map(|c| MemberSet::from_indices((0..total).filter(|&e| self.labels[e] == c)));
            let v: f64 = clusters.map(|s| self.model.sse(&s)).sum();
            if v < self.best {
                self.best = v;
                self.best_labels = Some(self.labels.clone());
            }
            return;
        }
        let limit = if open < self.k { open + 1 } else { self.k };
        for c in 0..limit {
            self.labels[i] = c;
            self.sizes[c] += 1;
            self.assign(i + 1, open.max(c + 1));
            self.sizes[c] -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::tests::random_dataset;

    #[test]
    fn stirling_values() {
        assert_eq!(stirling2(4, 2), 7.0);
        assert_eq!(stirling2(10, 3), 9330.0);
        assert_eq!(stirling2(5, 5), 1.0);
        assert_eq!(stirling2(3, 4), 0.0);
    }

    #[test]
    fn four_entities_two_pairs() {
        let ds = random_dataset(1, 4, 4, 2).retarget(2, 2).unwrap();
        assert_eq!(count_feasible_partitions(&ds), 3);
    }

    #[test]
    fn optimum_is_minimal_over_all_labelings() {
        let ds = random_dataset(2, 6, 4, 2).retarget(2, 1).unwrap();
        let (p, sse) = brute_force_optimum(&ds).unwrap();
        assert_eq!(p.num_clusters(), 2);
        for mask in 1u32..(1 << 6) - 1 {
            let labels: Vec<usize> = (0..6).map(|i| ((mask >> i) & 1) as usize).collect();
            let q = Partition::new(labels, 2);
            assert!(partition_sse(&ds, &q).unwrap() >= sse - 1e-9);
        }
    }

    #[test]
    fn guard_refuses_large_instances() {
        let ds = random_dataset(3, 30, 4, 2).retarget(5, 1).unwrap();
        assert!(matches!(brute_force_optimum(&ds), Err(Error::TooLarge(_))));
    }
}
