//! Binary set partitioning over a fixed column pool by LP-based
//! depth-first branch-and-bound.

use super::lp::{self, LpError};
use super::master::{build_master, Column, StabilizationState};
use crate::error::{Error, Result};

const INTEGRALITY_TOL: f64 = 1e-9;

/// Picks exactly `k` pool columns covering each of `rows` units once, at
/// minimum total cost. Returns the chosen column indices in increasing order.
pub fn integerize(columns: &[Column], k: usize, rows: usize) -> Result<Vec<usize>> {
    let base = build_master(columns, k, &StabilizationState::unstabilized(rows));
    let mut search = Search { base, ncols: columns.len(), best: f64::INFINITY, best_set: None };
    let mut lower = vec![0.0; columns.len()];
    let mut upper = vec![f64::INFINITY; columns.len()];
    search.node(&mut lower, &mut upper)?;
    search.best_set.ok_or(Error::NoIntegralCover)
}

struct Search {
    base: lp::LpProblem,
    ncols: usize,
    best: f64,
    best_set: Option<Vec<usize>>,
}

impl Search {
    fn node(&mut self, lower: &mut [f64], upper: &mut [f64]) -> Result<()> {
        let mut problem = self.base.clone();
        for j in 0..self.ncols {
            problem.columns[j].lower = lower[j];
            problem.columns[j].upper = upper[j];
        }
        let sol = match lp::solve(&problem) {
            Ok(s) => s,
            Err(LpError::Infeasible(_)) => return Ok(()),
            Err(e) => return Err(Error::Solver(format!("integerize: {e}"))),
        };
        let cut = 1e-9 * self.best.abs().max(1.0);
        if sol.objective >= self.best - cut {
            return Ok(());
        }
        let z = &sol.x[..self.ncols];
        let branch = z
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - v.round()).abs() > INTEGRALITY_TOL)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(a.0.cmp(&b.0)))
            .map(|(j, _)| j);
        match branch {
            None => {
                self.best = sol.objective;
                self.best_set = Some((0..self.ncols).filter(|&j| z[j] > 0.5).collect());
            }
            Some(j) => {
                let (lo, hi) = (lower[j], upper[j]);
                lower[j] = 1.0;
                upper[j] = 1.0;
                self.node(lower, upper)?;
                lower[j] = lo;
                upper[j] = 0.0;
                self.node(lower, upper)?;
                upper[j] = hi;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::MemberSet;

    fn column(members: &[usize], cost: f64) -> Column {
        Column { members: MemberSet::from_indices(members.iter().copied()), cost }
    }

    #[test]
    fn integral_relaxation_passes_through() {
        let cols = vec![column(&[0, 1], 1.0), column(&[2, 3], 1.0), column(&[0, 2], 5.0)];
        assert_eq!(integerize(&cols, 2, 4).unwrap(), vec![0, 1]);
    }

    #[test]
    fn fractional_relaxation_is_resolved() {
        // The three pairs over rows 0..3 at 1/2 each form a cheap fractional cover.
        let cols = vec![
            column(&[0, 1], 1.0),
            column(&[1, 2], 1.0),
            column(&[0, 2], 1.0),
            column(&[3], 0.0),
            column(&[0, 1, 2], 3.5),
            column(&[2, 3], 1.2),
            column(&[0], 0.5),
            column(&[1], 0.5),
        ];
        let chosen = integerize(&cols, 3, 4).unwrap();
        let cost: f64 = chosen.iter().map(|&j| cols[j].cost).sum();
        // Brute force over all 3-subsets.
        let mut best = f64::INFINITY;
        for a in 0..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    let mut cover = [0; 4];
                    for &j in &[a, b, c] {
                        for i in cols[j].members.iter() {
                            cover[i] += 1;
                        }
                    }
                    if cover.iter().all(|&x| x == 1) {
                        best = best.min(cols[a].cost + cols[b].cost + cols[c].cost);
                    }
                }
            }
        }
        assert!((cost - best).abs() < 1e-12);
    }

    #[test]
    fn uncoverable_row() {
        let cols = vec![column(&[0, 1], 1.0), column(&[3], 1.0)];
        assert!(matches!(integerize(&cols, 2, 4), Err(Error::NoIntegralCover)));
    }
}
