//! Cluster cost evaluation shared by the local-search heuristics.

use crate::cost::CostModel;
use crate::gram::add_into;

/// Screens entity sets through Gram matrices and confirms with the
/// orthogonal factor.
pub(crate) struct Evaluator<'m, 'd> {
    pub model: &'m CostModel<'d>,
    scratch: Vec<f64>,
    gram: Vec<f64>,
}

impl<'m, 'd> Evaluator<'m, 'd> {
    pub fn new(model: &'m CostModel<'d>) -> Self {
        let len = model.layout().packed_len();
        Self { model, scratch: Vec::new(), gram: vec![0.0; len] }
    }

    /// Approximate cost of `members` plus `extra`, minus `skip`.
    pub fn screened(&mut self, members: &[usize], extra: Option<usize>, skip: Option<usize>) -> f64 {
        self.gram.iter_mut().for_each(|v| *v = 0.0);
        let mut any = false;
        for &i in members.iter().chain(extra.iter()) {
            if Some(i) == skip {
                continue;
            }
            add_into(&mut self.gram, self.model.entity_gram(i));
            any = true;
        }
        if !any {
            return 0.0;
        }
        match self.model.layout().sse(&self.gram, &mut self.scratch) {
            Some(v) => v,
            None => self.exact(&collect(members, extra, skip)),
        }
    }

    /// Cost from the orthogonal factor.
    pub fn exact(&self, members: &[usize]) -> f64 {
        self.model.entity_sse(members)
    }

    pub fn exact_with(&self, members: &[usize], extra: Option<usize>, skip: Option<usize>) -> f64 {
        self.exact(&collect(members, extra, skip))
    }
}

fn collect(members: &[usize], extra: Option<usize>, skip: Option<usize>) -> Vec<usize> {
    let mut v: Vec<usize> = members.iter().copied().filter(|&i| Some(i) != skip).collect();
    if let Some(e) = extra {
        v.push(e);
    }
    v.sort_unstable();
    v
}
