//! Two-stage baseline: cluster entities by the correlation of their
//! promotion-adjusted weekly profiles, then fit one regression per cluster.

use serde::{Deserialize, Serialize};

use super::init::repair_with;
use super::Solution;
use crate::control::RunControl;
use crate::cost::{partition_sse, CostModel};
use crate::data::{Dataset, Entity, Partition};
use crate::error::{contract, Result};
use crate::linalg::fit_ols;

pub const WEEKS_PER_YEAR: usize = 52;

/// Mean residual of `y = beta * discount` for each week of the year.
/// Weeks without observations get the overall mean residual.
pub fn seasonal_residual_vector(entity: &Entity, discount_col: usize) -> Result<Vec<f64>> {
    if entity.len() < 2 {
        return contract(format!("entity {} has fewer than two observations", entity.id));
    }
    if discount_col >= entity.num_predictors() {
        return contract(format!("discount column {discount_col} out of range"));
    }
    let d: Vec<f64> = (0..entity.len()).map(|l| entity.row(l)[discount_col]).collect();
    let fit = fit_ols(&d, entity.len(), 1, &entity.y)?;
    let residual: Vec<f64> = entity.y.iter().zip(&d).map(|(y, x)| y - fit.beta[0] * x).collect();
    let mut sum = [0.0; WEEKS_PER_YEAR];
    let mut count = [0usize; WEEKS_PER_YEAR];
    for (&w, &r) in entity.weeks.iter().zip(&residual) {
        if w == 0 {
            return contract(format!("entity {} has week label 0", entity.id));
        }
        let slot = (w as usize - 1) % WEEKS_PER_YEAR;
        sum[slot] += r;
        count[slot] += 1;
    }
    let mean = residual.iter().sum::<f64>() / residual.len() as f64;
    Ok((0..WEEKS_PER_YEAR).map(|s| if count[s] > 0 { sum[s] / count[s] as f64 } else { mean }).collect())
}

/// One minus the Pearson correlation.
pub fn correlation_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() || u.is_empty() {
        return contract("vectors must be nonempty and of equal length");
    }
    let m = u.len() as f64;
    let (mu, mv) = (u.iter().sum::<f64>() / m, v.iter().sum::<f64>() / m);
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (x, y) = (a - mu, b - mv);
        suv += x * y;
        suu += x * x;
        svv += y * y;
    }
    if suu <= 0.0 || svv <= 0.0 {
        return contract("zero-variance vector");
    }
    let rho = (suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smallest member of each merged cluster.
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    pub partition: Partition,
    pub merges: Vec<Merge>,
}

/// Agglomerative clustering with the maximum pairwise distance between
/// clusters, merging until `k` clusters remain. Ties go to the pair whose
/// smallest members are lexicographically smallest. Clusters are labeled in
/// order of their smallest member.
pub fn complete_linkage_cluster(distances: &[Vec<f64>], k: usize) -> Result<Linkage> {
    let m = distances.len();
    if k == 0 || k > m {
        return contract(format!("cannot form {k} clusters from {m} items"));
    }
    if distances.iter().any(|r| r.len() != m) {
        return contract("distance matrix must be square");
    }
    // Active clusters keyed by their smallest member; `d` holds cluster distances.
    let mut d: Vec<Vec<f64>> = distances.to_vec();
    let mut members: Vec<Option<Vec<usize>>> = (0..m).map(|i| Some(vec![i])).collect();
    let mut merges = Vec::new();
    let mut active = m;
    while active > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..m {
            if members[a].is_none() {
                continue;
            }
            for b in a + 1..m {
                if members[b].is_none() {
                    continue;
                }
                if best.is_none_or(|(h, _, _)| d[a][b] < h) {
                    best = Some((d[a][b], a, b));
                }
            }
        }
        let (height, a, b) = best.expect("at least two active clusters");
        let moved = members[b].take().expect("active");
        members[a].as_mut().expect("active").extend(moved);
        for c in 0..m {
            if members[c].is_some() && c != a {
                let v = d[a][c].max(d[b][c]);
                d[a][c] = v;
                d[c][a] = v;
            }
        }
        merges.push(Merge { left: a, right: b, height });
        active -= 1;
    }
    let mut labels = vec![0; m];
    for (label, group) in members.iter().flatten().enumerate() {
        for &i in group {
            labels[i] = label;
        }
    }
    Ok(Linkage { partition: Partition::new(labels, k), merges })
}

pub fn run_two_stage(dataset: &Dataset, discount_col: usize) -> Result<Solution> {
    run_two_stage_controlled(dataset, discount_col, &mut RunControl::unlimited())
}

pub fn run_two_stage_controlled(dataset: &Dataset, discount_col: usize, control: &mut RunControl) -> Result<Solution> {
    let k = dataset.num_clusters();
    let profiles: Vec<Vec<f64>> =
        dataset.entities().iter().map(|e| seasonal_residual_vector(e, discount_col)).collect::<Result<_>>()?;
    let flat = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().all(|x| (x - m).abs() <= 1e-12 * m.abs().max(1.0))
    };
    let usable: Vec<usize> = (0..dataset.len()).filter(|&i| !flat(&profiles[i])).collect();
    for i in (0..dataset.len()).filter(|i| !usable.contains(i)) {
        log::warn!("entity {} has a constant seasonal profile and is assigned after clustering", dataset.entity(i).id);
    }
    if usable.len() < k {
        return contract(format!("only {} entities have a non-constant seasonal profile, need {k}", usable.len()));
    }
    let mut dist = vec![vec![0.0; usable.len()]; usable.len()];
    for a in 0..usable.len() {
        for b in a + 1..usable.len() {
            let v = correlation_distance(&profiles[usable[a]], &profiles[usable[b]])?;
            dist[a][b] = v;
            dist[b][a] = v;
        }
    }
    let linkage = complete_linkage_cluster(&dist, k)?;

    let model = CostModel::new(dataset);
    let mut labels = vec![usize::MAX; dataset.len()];
    for (pos, &i) in usable.iter().enumerate() {
        labels[i] = linkage.partition.label(pos);
    }
    if usable.len() < dataset.len() {
        let betas: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..dataset.len()).filter(|&i| labels[i] == c).collect();
                model.entity_fit(&members).beta
            })
            .collect();
        for i in 0..dataset.len() {
            if labels[i] == usize::MAX {
                let e = dataset.entity(i);
                labels[i] = (0..k)
                    .min_by(|&a, &b| e.sse_under(&betas[a]).total_cmp(&e.sse_under(&betas[b])).then(a.cmp(&b)))
                    .expect("k >= 1");
            }
        }
    }
    let partition = repair_with(&model, &Partition::new(labels, k), dataset.min_cluster_size());
    let sse = partition_sse(dataset, &partition)?;
    control.record(sse);
    Ok(Solution { partition, sse, iterations: linkage.merges.len(), converged: true, trace: control.trace().to_vec() })
}
