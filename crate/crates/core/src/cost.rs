//! Cluster costs.
//!
//! `c_S` is the residual sum of squares of one regression fitted over all
//! observations of the entities in `S`. [`cluster_cost`] computes it by
//! stacking rows; [`CostModel`] prices the same quantity from cached
//! per-unit factors and memoizes results by member set. A unit is either a
//! single entity or a group of entities treated as one.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use parking_lot::Mutex;

use crate::data::{ensure_valid, Dataset, Partition};
use crate::error::{contract, Result};
use crate::gram::{add_into, GramLayout};
use crate::linalg::{fit_ols, Factor, FitResult};

/// Set of small indices stored as a bitset. Trailing zero words are never
/// kept, so equal sets hash equally.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct MemberSet {
    words: Vec<u64>,
}

impl MemberSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = Self::new();
        for i in iter {
            s.insert(i);
        }
        s
    }

    pub fn insert(&mut self, i: usize) {
        let w = i / 64;
        if w >= self.words.len() {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        let w = i / 64;
        if w < self.words.len() {
            self.words[w] &= !(1 << (i % 64));
            while self.words.last() == Some(&0) {
                self.words.pop();
            }
        }
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn without(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.remove(i);
        s
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic order of the sorted member lists.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        let mut a = self.iter();
        let mut b = other.iter();
        loop {
            match (a.next(), b.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(x), Some(y)) if x != y => return x.cmp(&y),
                _ => {}
            }
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }
}

impl fmt::Debug for MemberSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Stacks the observations of entities `members` and fits one regression.
pub fn cluster_cost(dataset: &Dataset, members: &[usize]) -> Result<FitResult> {
    if members.is_empty() {
        return contract("cluster cost of an empty set");
    }
    let j = dataset.num_predictors();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &i in members {
        if i >= dataset.len() {
            return contract(format!("entity index {i} out of range"));
        }
        let e = dataset.entity(i);
        x.extend_from_slice(&e.x);
        y.extend_from_slice(&e.y);
    }
    fit_ols(&x, y.len(), j, &y)
}

/// Total SSE of a feasible partition: the sum of its cluster costs.
pub fn partition_sse(dataset: &Dataset, p: &Partition) -> Result<f64> {
    ensure_valid(p, dataset)?;
    let mut total = 0.0;
    for members in p.clusters() {
        total += cluster_cost(dataset, &members)?.sse;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct Unit {
    pub members: Vec<usize>,
    pub factor: Factor,
    /// Packed Gram matrix in the model's [`GramLayout`].
    pub gram: Vec<f64>,
}

/// Factor-based cost oracle over units, with a shared memo of set costs.
pub struct CostModel<'d> {
    dataset: &'d Dataset,
    units: Vec<Unit>,
    entity_factors: Vec<Factor>,
    entity_grams: Vec<Vec<f64>>,
    layout: GramLayout,
    cache: Mutex<HashMap<MemberSet, f64>>,
}

impl<'d> CostModel<'d> {
    /// One unit per entity.
    pub fn new(dataset: &'d Dataset) -> Self {
        let j = dataset.num_predictors();
        let entity_factors: Vec<Factor> = dataset
            .entities()
            .iter()
            .map(|e| Factor::from_observations(&e.x, &e.y, j))
            .collect();
        let layout = GramLayout::new(dataset.entities(), j);
        let entity_grams: Vec<Vec<f64>> = dataset.entities().iter().map(|e| layout.entity_gram(e)).collect();
        let units = entity_factors
            .iter()
            .zip(&entity_grams)
            .enumerate()
            .map(|(i, (f, g))| Unit { members: vec![i], factor: f.clone(), gram: g.clone() })
            .collect();
        Self { dataset, units, entity_factors, entity_grams, layout, cache: Mutex::new(HashMap::new()) }
    }

    /// One unit per group of entities. Groups must be nonempty and disjoint.
    pub fn over_groups(dataset: &'d Dataset, groups: &[Vec<usize>]) -> Self {
        let base = Self::new(dataset);
        base.regroup(groups)
    }

    /// Same entity factors, new unit structure.
    pub fn regroup(&self, groups: &[Vec<usize>]) -> Self {
        let j = self.dataset.num_predictors();
        let units = groups
            .iter()
            .map(|g| {
                let mut factor = Factor::empty(j);
                let mut gram = vec![0.0; self.layout.packed_len()];
                for &i in g {
                    factor.merge(&self.entity_factors[i]);
                    add_into(&mut gram, &self.entity_grams[i]);
                }
                Unit { members: g.clone(), factor, gram }
            })
            .collect();
        Self {
            dataset: self.dataset,
            units,
            entity_factors: self.entity_factors.clone(),
            entity_grams: self.entity_grams.clone(),
            layout: self.layout.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn dataset(&self) -> &'d Dataset {
        self.dataset
    }

    pub fn num_units(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn layout(&self) -> &GramLayout {
        &self.layout
    }

    pub fn unit_gram(&self, u: usize) -> &[f64] {
        &self.units[u].gram
    }

    pub fn entity_gram(&self, i: usize) -> &[f64] {
        &self.entity_grams[i]
    }

    pub fn unit_factor(&self, u: usize) -> &Factor {
        &self.units[u].factor
    }

    pub fn entity_factor(&self, i: usize) -> &Factor {
        &self.entity_factors[i]
    }

    /// Number of entities in unit `u`.
    pub fn weight(&self, u: usize) -> usize {
        self.units[u].members.len()
    }

    pub fn weight_of(&self, set: &MemberSet) -> usize {
        set.iter().map(|u| self.weight(u)).sum()
    }

    /// Entities covered by a set of units, sorted.
    pub fn entities_of(&self, set: &MemberSet) -> Vec<usize> {
        let mut out: Vec<usize> = set.iter().flat_map(|u| self.units[u].members.iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Factor of the union, merged in increasing unit order.
    pub fn factor_of(&self, set: &MemberSet) -> Factor {
        let mut f = Factor::empty(self.dataset.num_predictors());
        for u in set.iter() {
            f.merge(&self.units[u].factor);
        }
        f
    }

    /// Cached `c_S`; zero for the empty set.
    pub fn sse(&self, set: &MemberSet) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        if let Some(&v) = self.cache.lock().get(set) {
            return v;
        }
        let v = self.factor_of(set).sse();
        self.cache.lock().insert(set.clone(), v);
        v
    }

    /// Records a cost computed elsewhere from the canonical merge order.
    pub(crate) fn remember(&self, set: &MemberSet, sse: f64) {
        self.cache.lock().entry(set.clone()).or_insert(sse);
    }

    pub fn fit(&self, set: &MemberSet) -> FitResult {
        if set.is_empty() {
            let j = self.dataset.num_predictors();
            return FitResult { beta: vec![0.0; j], sse: 0.0, rank: 0 };
        }
        self.factor_of(set).fit()
    }

    /// Cost of a plain list of entity indices (ignores grouping).
    pub fn entity_sse(&self, members: &[usize]) -> f64 {
        if members.is_empty() {
            return 0.0;
        }
        let mut f = Factor::empty(self.dataset.num_predictors());
        for &i in members {
            f.merge(&self.entity_factors[i]);
        }
        f.sse()
    }

    pub fn entity_fit(&self, members: &[usize]) -> FitResult {
        let mut f = Factor::empty(self.dataset.num_predictors());
        for &i in members {
            f.merge(&self.entity_factors[i]);
        }
        f.fit()
    }

    /// Sum of cluster costs over an entity-level partition, skipping validation.
    pub fn partition_cost(&self, p: &Partition) -> f64 {
        p.clusters().iter().map(|c| self.entity_sse(c)).sum()
    }

    pub fn cached_sets(&self) -> usize {
        self.cache.lock().len()
    }
}
