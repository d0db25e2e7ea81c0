//! Pricing: find the cluster of minimum reduced cost
//! `d_S = c_S - upsilon - sum_{u in S} pi_u` subject to `weight(S) >= n`.
//!
//! The branch-and-bound fixes units in decreasing order of `pi`, include
//! branch first. A node with fixed-in set `F` and undecided units `U` is
//! bounded two ways, both resting on `c_{S1} <= c_{S2}` for `S1 ⊆ S2`:
//!
//! * `c_F - pi(F) - sum_{u in U} max(pi_u, 0)`;
//! * for completions `T`, `c_{F ∪ T} >= max_{u in T} c_{F ∪ {u}}`, so with the
//!   one-unit extensions `lb_u <= c_{F ∪ {u}}` sorted increasingly, no
//!   completion beats `min_k lb_(k) - pi_(k) - sum_{j<k} max(pi_(j), 0) - pi(F)`.
//!
//! Extension costs found at a node stay valid lower bounds in its whole
//! subtree, so they are only recomputed when the inherited ones fail to prune.
//!
//! Inside the search, costs come from Gram matrices and bounds are relaxed by
//! a margin covering their rounding error. A node whose screened value comes
//! within that margin of the incumbent is re-priced with the orthogonal
//! factor before it can become the incumbent.

use std::cmp::Ordering;

use super::master::Column;
use crate::cost::{CostModel, MemberSet};
use crate::error::{Error, Result};
use crate::gram::add_into;
use crate::linalg::Factor;

/// Default refusal threshold for [`pricing_enumerate`].
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PricingResult {
    pub members: MemberSet,
    pub reduced_cost: f64,
    pub beta: Vec<f64>,
    pub nodes_explored: u64,
}

struct Incumbent {
    value: f64,
    set: Option<MemberSet>,
    eps: f64,
}

impl Incumbent {
    fn offer(&mut self, set: &MemberSet, value: f64) {
        let replace = match &self.set {
            None => true,
            Some(cur) => {
                value < self.value - self.eps
                    || (value <= self.value + self.eps && set.lex_cmp(cur) == Ordering::Less)
            }
        };
        if replace {
            self.value = if self.set.is_some() { value.min(self.value) } else { value };
            self.set = Some(set.clone());
        }
    }

    fn prunes(&self, bound: f64) -> bool {
        self.set.is_some() && bound >= self.value - self.eps
    }
}

fn tolerance(pi: &[f64]) -> f64 {
    1e-10 * pi.iter().map(|p| p.abs()).sum::<f64>().max(1.0)
}

fn finish(model: &CostModel, pi: &[f64], upsilon: f64, set: MemberSet, nodes: u64) -> PricingResult {
    let fit = model.fit(&set);
    let sse = model.sse(&set);
    let reward: f64 = set.iter().map(|u| pi[u]).sum();
    PricingResult { reduced_cost: sse - reward - upsilon, beta: fit.beta, members: set, nodes_explored: nodes }
}

/// Exact pricing by enumerating every unit subset of weight at least `n`.
pub fn pricing_enumerate(model: &CostModel, pi: &[f64], upsilon: f64, n: usize) -> Result<PricingResult> {
    pricing_enumerate_with_limit(model, pi, upsilon, n, ENUMERATION_LIMIT)
}

pub fn pricing_enumerate_with_limit(
    model: &CostModel,
    pi: &[f64],
    upsilon: f64,
    n: usize,
    max_units: usize,
) -> Result<PricingResult> {
    let units = model.num_units();
    if units > max_units {
        return Err(Error::TooLarge(format!("{units} units exceed the enumeration limit of {max_units}")));
    }
    let total: usize = (0..units).map(|u| model.weight(u)).sum();
    if total < n {
        return Err(Error::Contract(format!("total weight {total} below minimum cluster size {n}")));
    }
    let mut inc = Incumbent { value: f64::INFINITY, set: None, eps: tolerance(pi) };
    let mut nodes = 0u64;
    let j = model.dataset().num_predictors();

    // Include-first depth-first order visits member lists lexicographically.
    fn walk(
        model: &CostModel,
        pi: &[f64],
        n: usize,
        next: usize,
        set: &mut MemberSet,
        factor: &Factor,
        reward: f64,
        weight: usize,
        inc: &mut Incumbent,
        nodes: &mut u64,
    ) {
        for u in next..model.num_units() {
            *nodes += 1;
            let f = factor.merged(model.unit_factor(u));
            set.insert(u);
            let r = reward + pi[u];
            let w = weight + model.weight(u);
            if w >= n {
                inc.offer(set, f.sse() - r);
            }
            walk(model, pi, n, u + 1, set, &f, r, w, inc, nodes);
            set.remove(u);
        }
    }
    walk(model, pi, n, 0, &mut MemberSet::new(), &Factor::empty(j), 0.0, 0, &mut inc, &mut nodes);
    let set = inc.set.expect("some subset has enough weight");
    Ok(finish(model, pi, upsilon, set, nodes))
}

/// Exact pricing by branch-and-bound.
pub fn solve_pricing_bnb(model: &CostModel, pi: &[f64], upsilon: f64, n: usize) -> PricingResult {
    solve_pricing_bnb_warm(model, pi, upsilon, n, &[])
}

/// Branch-and-bound seeded with the current pool: the best pool column,
/// improved by single-unit additions and removals, is the first incumbent.
pub fn solve_pricing_bnb_warm(model: &CostModel, pi: &[f64], upsilon: f64, n: usize, pool: &[Column]) -> PricingResult {
    let units = model.num_units();
    assert_eq!(pi.len(), units, "one dual per unit");
    let mut inc = Incumbent { value: f64::INFINITY, set: None, eps: tolerance(pi) };

    let reward = |s: &MemberSet| s.iter().map(|u| pi[u]).sum::<f64>();
    let mut start: Option<(MemberSet, f64)> = None;
    for c in pool {
        if model.weight_of(&c.members) < n {
            continue;
        }
        let v = c.cost - reward(&c.members);
        inc.offer(&c.members, v);
        if start.as_ref().is_none_or(|(_, best)| v < *best) {
            start = Some((c.members.clone(), v));
        }
    }
    if let Some((set, value)) = start {
        let (set, value) = local_search(model, pi, n, set, value);
        inc.offer(&set, value);
    }

    let mut order: Vec<usize> = (0..units).collect();
    order.sort_by(|&a, &b| pi[b].total_cmp(&pi[a]).then(a.cmp(&b)));
    let mut suffix_pos = vec![0.0; units + 1];
    let mut suffix_weight = vec![0usize; units + 1];
    for d in (0..units).rev() {
        suffix_pos[d] = suffix_pos[d + 1] + pi[order[d]].max(0.0);
        suffix_weight[d] = suffix_weight[d + 1] + model.weight(order[d]);
    }

    let total_yy: f64 = (0..units).map(|u| model.layout().yy(model.unit_gram(u))).sum();
    let margin = 1e-9 * total_yy;
    let mut search = Search {
        model,
        pi,
        n,
        order,
        suffix_pos,
        suffix_weight,
        inc,
        nodes: 0,
        margin,
        scratch: Vec::new(),
    };
    let root_lb: Vec<f64> = (0..units).map(|u| model.unit_factor(u).sse()).collect();
    let empty = vec![0.0; model.layout().packed_len()];
    search.visit(0, &MemberSet::new(), &empty, 0.0, 0.0, 0, root_lb, true);

    let nodes = search.nodes;
    let set = search.inc.set.expect("pricing always has a feasible set");
    let result = finish(model, pi, upsilon, set, nodes);
    model.remember(&result.members, result.reduced_cost + upsilon + reward(&result.members));
    result
}

fn local_search(model: &CostModel, pi: &[f64], n: usize, mut set: MemberSet, mut value: f64) -> (MemberSet, f64) {
    let layout = model.layout();
    let mut scratch = Vec::new();
    let mut g = vec![0.0; layout.packed_len()];
    loop {
        let weight = model.weight_of(&set);
        let base_reward: f64 = set.iter().map(|u| pi[u]).sum();
        let mut best: Option<(MemberSet, f64)> = None;
        for u in 0..model.num_units() {
            let inside = set.contains(u);
            if inside && (weight - model.weight(u) < n || set.len() == 1) {
                continue;
            }
            let cand = if inside { set.without(u) } else { set.with(u) };
            g.iter_mut().for_each(|v| *v = 0.0);
            for w in cand.iter() {
                add_into(&mut g, model.unit_gram(w));
            }
            let sse = layout.sse(&g, &mut scratch).unwrap_or_else(|| model.sse(&cand));
            let v = sse - if inside { base_reward - pi[u] } else { base_reward + pi[u] };
            if best.as_ref().is_none_or(|(_, b)| v < *b) {
                best = Some((cand, v));
            }
        }
        let Some((cand, _)) = best else { return (set, value) };
        let exact = model.sse(&cand) - cand.iter().map(|u| pi[u]).sum::<f64>();
        if exact < value - 1e-12 * value.abs().max(1.0) {
            set = cand;
            value = exact;
        } else {
            return (set, value);
        }
    }
}

struct Search<'a, 'd> {
    model: &'a CostModel<'d>,
    pi: &'a [f64],
    n: usize,
    order: Vec<usize>,
    suffix_pos: Vec<f64>,
    suffix_weight: Vec<usize>,
    inc: Incumbent,
    nodes: u64,
    margin: f64,
    scratch: Vec<f64>,
}

impl Search<'_, '_> {
    /// Screened cost of `set` given its Gram matrix; exact when screening is inconclusive.
    fn screened_sse(&mut self, set: &MemberSet, gram: &[f64]) -> f64 {
        match self.model.layout().sse(gram, &mut self.scratch) {
            Some(v) => v,
            None => self.model.sse(set),
        }
    }

    fn prunes(&self, bound: f64) -> bool {
        self.inc.prunes(bound - self.margin)
    }

    fn extension_bound(&self, depth: usize, sse: f64, reward: f64, lb: &[f64]) -> f64 {
        let mut rest: Vec<(f64, f64)> = self.order[depth..]
            .iter()
            .map(|&u| (lb[u].max(sse), self.pi[u]))
            .collect();
        rest.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = f64::INFINITY;
        let mut acc = 0.0;
        for (l, p) in rest {
            best = best.min(l - p - acc);
            acc += p.max(0.0);
        }
        best - reward
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &mut self,
        depth: usize,
        set: &MemberSet,
        gram: &[f64],
        sse: f64,
        reward: f64,
        weight: usize,
        mut lb: Vec<f64>,
        fresh: bool,
    ) {
        self.nodes += 1;
        if weight >= self.n && !self.prunes(sse - reward) {
            let exact = self.model.sse(set) - reward;
            self.inc.offer(set, exact);
        }
        if depth == self.order.len() || weight + self.suffix_weight[depth] < self.n {
            return;
        }
        if self.prunes(sse - reward - self.suffix_pos[depth]) {
            return;
        }
        let layout = self.model.layout();
        let mut next = None;
        if !set.is_empty() {
            if self.prunes(self.extension_bound(depth, sse, reward, &lb)) {
                return;
            }
            if !fresh {
                let mut g = vec![0.0; layout.packed_len()];
                for d in depth..self.order.len() {
                    let u = self.order[d];
                    g.copy_from_slice(gram);
                    add_into(&mut g, self.model.unit_gram(u));
                    let v = self.screened_sse(&set.with(u), &g);
                    lb[u] = lb[u].max(v);
                    if d == depth {
                        next = Some((g.clone(), v));
                    }
                }
                if self.prunes(self.extension_bound(depth, sse, reward, &lb)) {
                    return;
                }
            }
        }

        let u = self.order[depth];
        let child_set = set.with(u);
        let (child, child_sse) = next.unwrap_or_else(|| {
            let mut g = gram.to_vec();
            add_into(&mut g, self.model.unit_gram(u));
            let v = self.screened_sse(&child_set, &g);
            (g, v)
        });
        self.visit(
            depth + 1,
            &child_set,
            &child,
            child_sse,
            reward + self.pi[u],
            weight + self.model.weight(u),
            lb.clone(),
            false,
        );
        self.visit(depth + 1, set, gram, sse, reward, weight, lb, fresh || set.is_empty());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Entity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(seed: u64, entities: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let es = (0..entities)
            .map(|i| {
                let obs = 4;
                let x: Vec<f64> = (0..obs * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y: Vec<f64> = (0..obs).map(|_| rng.random_range(-2.0..2.0)).collect();
                Entity::new(format!("e{i}"), y, x, (1..=obs as u32).collect()).unwrap()
            })
            .collect();
        Dataset::new(es, 1, 1).unwrap()
    }

    #[test]
    fn only_feasible_set_when_n_equals_i() {
        let ds = dataset(1, 3);
        let model = CostModel::new(&ds);
        let r = pricing_enumerate(&model, &[0.1, 0.2, 0.3], 0.0, 3).unwrap();
        assert_eq!(r.members.to_vec(), vec![0, 1, 2]);
        let b = solve_pricing_bnb(&model, &[0.1, 0.2, 0.3], 0.0, 3);
        assert_eq!(b.members.to_vec(), vec![0, 1, 2]);
    }

    #[test]
    fn zero_duals_pick_a_zero_cost_singleton() {
        // 4 observations, 2 predictors: singletons have positive SSE in
        // general, so build one entity with an exact fit.
        let mut ds = dataset(2, 5);
        let mut es = ds.entities().to_vec();
        let x = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        es[3] = Entity::new("exact", y, x, vec![1, 2, 3, 4]).unwrap();
        ds = Dataset::new(es, 1, 1).unwrap();
        let model = CostModel::new(&ds);
        let pi = vec![0.0; 5];
        let r = solve_pricing_bnb(&model, &pi, 2.5, 1);
        assert_eq!(r.members.to_vec(), vec![3]);
        assert!((r.reduced_cost + 2.5).abs() < 1e-9);
    }

    #[test]
    fn dominant_rewards_are_included() {
        let ds = dataset(3, 6);
        let model = CostModel::new(&ds);
        let mut pi = vec![-0.5; 6];
        pi[1] = 1e6;
        pi[4] = 1e6;
        let e = pricing_enumerate(&model, &pi, 0.0, 2).unwrap();
        assert!(e.members.contains(1) && e.members.contains(4));
        let b = solve_pricing_bnb(&model, &pi, 0.0, 2);
        assert!((b.reduced_cost - e.reduced_cost).abs() < 1e-6);
    }

    #[test]
    fn enumeration_guard() {
        let ds = dataset(4, 6);
        let model = CostModel::new(&ds);
        assert!(matches!(
            pricing_enumerate_with_limit(&model, &[0.0; 6], 0.0, 1, 5),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn bnb_matches_enumeration_on_random_duals() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..10 {
            let ds = dataset(10 + seed, 8);
            let model = CostModel::new(&ds);
            for _ in 0..5 {
                let pi: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..4.0)).collect();
                let upsilon = rng.random_range(-1.0..1.0);
                let n = rng.random_range(1..=3);
                let e = pricing_enumerate(&model, &pi, upsilon, n).unwrap();
                let b = solve_pricing_bnb(&model, &pi, upsilon, n);
                assert!(
                    (e.reduced_cost - b.reduced_cost).abs() <= 1e-8,
                    "seed {seed}: enum {} {:?} vs bnb {} {:?}",
                    e.reduced_cost,
                    e.members,
                    b.reduced_cost,
                    b.members
                );
                assert!(model.weight_of(&b.members) >= n);
            }
        }
    }

    #[test]
    fn warm_pool_does_not_change_the_optimum() {
        let ds = dataset(21, 9);
        let model = CostModel::new(&ds);
        let pi: Vec<f64> = (0..9).map(|i| (i as f64) * 0.7 - 1.0).collect();
        let pool: Vec<Column> = [vec![0, 1], vec![2, 3, 4], vec![5, 6, 7, 8]]
            .iter()
            .map(|m| {
                let members = MemberSet::from_indices(m.iter().copied());
                Column { cost: model.sse(&members), members }
            })
            .collect();
        let cold = solve_pricing_bnb(&model, &pi, 0.0, 2);
        let warm = solve_pricing_bnb_warm(&model, &pi, 0.0, 2, &pool);
        assert!((cold.reduced_cost - warm.reduced_cost).abs() < 1e-9);
        assert!(warm.nodes_explored <= cold.nodes_explored);
    }
}
