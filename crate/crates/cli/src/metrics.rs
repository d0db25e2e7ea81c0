//! Comparison tables computed from run records.

use std::collections::BTreeMap;

use gclr_core::{gap_from_best, opt_gap, relative_improvement};
use serde::Serialize;

use crate::experiment::RunRecord;

/// Algorithms whose objective counts as the optimum.
pub const EXACT: [&str; 3] = ["cg", "cg-plain", "brute"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub instance_id: String,
    pub k: usize,
    pub algorithm: String,
    pub seed: u64,
    pub sse: f64,
    /// Gap to the best exact objective on the same instance, when one exists.
    pub opt_gap: Option<f64>,
    /// Gap to the best objective of any algorithm on the same instance.
    pub gap_from_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub instance_id: String,
    pub k: usize,
    pub first: String,
    pub second: String,
    /// Relative improvement of the second algorithm's best run over the first's.
    pub ri: f64,
}

fn by_instance(records: &[RunRecord]) -> BTreeMap<(String, usize), Vec<&RunRecord>> {
    let mut map: BTreeMap<(String, usize), Vec<&RunRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.sse.is_some()) {
        map.entry((r.instance_id.clone(), r.k)).or_default().push(r);
    }
    map
}

fn best_of<'a>(runs: impl Iterator<Item = &'a &'a RunRecord>) -> Option<f64> {
    runs.filter_map(|r| r.sse).reduce(f64::min)
}

pub fn metric_rows(records: &[RunRecord]) -> anyhow::Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for ((instance_id, k), runs) in by_instance(records) {
        let exact = best_of(runs.iter().filter(|r| EXACT.contains(&r.algorithm.as_str())));
        let all: Vec<f64> = runs.iter().filter_map(|r| r.sse).collect();
        for r in &runs {
            let sse = r.sse.expect("filtered");
            rows.push(MetricRow {
                instance_id: instance_id.clone(),
                k,
                algorithm: r.algorithm.clone(),
                seed: r.seed,
                sse,
                opt_gap: exact.map(|e| opt_gap(sse, e)).transpose()?,
                gap_from_best: gap_from_best(sse, &all)?,
            });
        }
    }
    Ok(rows)
}

/// Best-of-seeds relative improvement of `second` over `first` on every
/// instance where both ran.
pub fn improvement_rows(records: &[RunRecord], first: &str, second: &str) -> anyhow::Result<Vec<ImprovementRow>> {
    let mut rows = Vec::new();
    for ((instance_id, k), runs) in by_instance(records) {
        let a = best_of(runs.iter().filter(|r| r.algorithm == first));
        let b = best_of(runs.iter().filter(|r| r.algorithm == second));
        if let (Some(a), Some(b)) = (a, b) {
            rows.push(ImprovementRow {
                instance_id,
                k,
                first: first.to_string(),
                second: second.to_string(),
                ri: relative_improvement(a, b)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(instance: &str, algorithm: &str, seed: u64, sse: Option<f64>) -> RunRecord {
        RunRecord {
            instance_id: instance.into(),
            source: String::new(),
            algorithm: algorithm.into(),
            params: "{}".into(),
            k: 2,
            n: 2,
            seed,
            sse,
            wall_time_ms: 1.0,
            converged: true,
            partition: String::new(),
            error: String::new(),
        }
    }

    #[test]
    fn gaps_use_the_exact_and_overall_best() {
        let records = vec![
            record("a", "cg", 0, Some(100.0)),
            record("a", "ga-lloyd", 0, Some(105.0)),
            record("a", "spaeth", 0, Some(110.0)),
            record("a", "spaeth", 1, None),
            record("b", "spaeth", 0, Some(50.0)),
        ];
        let rows = metric_rows(&records).unwrap();
        assert_eq!(rows.len(), 4);
        let ga = rows.iter().find(|r| r.algorithm == "ga-lloyd").unwrap();
        assert!((ga.opt_gap.unwrap() - 0.05).abs() < 1e-15);
        let b = rows.iter().find(|r| r.instance_id == "b").unwrap();
        assert_eq!(b.opt_gap, None);
        assert_eq!(b.gap_from_best, 0.0);
    }

    #[test]
    fn improvement_takes_best_seeds() {
        let records = vec![
            record("a", "two-stage", 0, Some(120.0)),
            record("a", "ga-lloyd", 0, Some(110.0)),
            record("a", "ga-lloyd", 1, Some(100.0)),
            record("b", "ga-lloyd", 0, Some(100.0)),
        ];
        let rows = improvement_rows(&records, "two-stage", "ga-lloyd").unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].ri - 0.2).abs() < 1e-15);
    }
}
