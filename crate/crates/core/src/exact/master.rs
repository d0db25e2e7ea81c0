//! Stabilized restricted master problem.
//!
//! ```text
//! min  sum_S c_S z_S - delta^T q- + delta^T q+
//! s.t. sum_S z_S                     = K      (dual upsilon)
//!      sum_S a_iS z_S - q-_i + q+_i  = 1      (dual pi_i)
//!      0 <= q-, q+ <= xi,  z >= 0
//! ```
//!
//! With `xi = 0` this is the plain set-partitioning relaxation.

use serde::{Deserialize, Serialize};

use super::lp::{self, LpColumn, LpError, LpProblem};
use crate::cost::MemberSet;
use crate::error::{Error, Result};

/// Perturbation values below this are snapped to zero.
pub const XI_SNAP: f64 = 1e-6;

/// A candidate cluster in the column pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub members: MemberSet,
    pub cost: f64,
}

/// Penalty centers and box widths of the dual stabilization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationState {
    pub delta: Vec<f64>,
    pub xi: Vec<f64>,
    pub iteration: usize,
    pub k_max: usize,
}

impl StabilizationState {
    pub const DEFAULT_K_MAX: usize = 5000;

    /// `delta = 0`, `xi = 1` on every row.
    pub fn new(rows: usize) -> Self {
        Self { delta: vec![0.0; rows], xi: vec![1.0; rows], iteration: 0, k_max: Self::DEFAULT_K_MAX }
    }

    /// No perturbation at all: the plain restricted master.
    pub fn unstabilized(rows: usize) -> Self {
        Self { delta: vec![0.0; rows], xi: vec![0.0; rows], iteration: 0, k_max: Self::DEFAULT_K_MAX }
    }

    pub fn with_k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn rows(&self) -> usize {
        self.delta.len()
    }

    pub fn is_active(&self) -> bool {
        self.xi.iter().any(|&x| x > 0.0)
    }
}

/// Recenter the penalty at the current duals and shrink the box tenfold.
pub fn update_stabilization(stab: &StabilizationState, pi: &[f64]) -> StabilizationState {
    let xi = stab
        .xi
        .iter()
        .map(|&x| {
            let v = x / 10.0;
            if v < XI_SNAP {
                0.0
            } else {
                v
            }
        })
        .collect();
    StabilizationState { delta: pi.to_vec(), xi, iteration: stab.iteration, k_max: stab.k_max }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    /// Value of each pool column, in pool order.
    pub z: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    pub pi: Vec<f64>,
    pub upsilon: f64,
    pub objective: f64,
    pub dual_objective: f64,
}

impl MasterSolution {
    pub fn perturbation_free(&self) -> bool {
        self.q_minus.iter().chain(&self.q_plus).all(|&q| q <= 1e-12)
    }

    /// Indices of pool columns at value one when every `z` is 0 or 1.
    pub fn integral_support(&self, tol: f64) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        for (idx, &z) in self.z.iter().enumerate() {
            if (z - 1.0).abs() <= tol {
                out.push(idx);
            } else if z.abs() > tol {
                return None;
            }
        }
        Some(out)
    }

    /// Reduced cost `c_S - upsilon - sum_{i in S} pi_i`.
    pub fn reduced_cost(&self, members: &MemberSet, cost: f64) -> f64 {
        cost - self.upsilon - members.iter().map(|i| self.pi[i]).sum::<f64>()
    }
}

pub(crate) fn build_master(columns: &[Column], k: usize, stab: &StabilizationState) -> LpProblem {
    let rows = stab.rows();
    let mut rhs = vec![1.0; rows + 1];
    rhs[0] = k as f64;
    let mut lp_columns = Vec::with_capacity(columns.len() + 2 * rows);
    for c in columns {
        let mut entries = Vec::with_capacity(c.members.len() + 1);
        entries.push((0, 1.0));
        entries.extend(c.members.iter().map(|i| (i + 1, 1.0)));
        lp_columns.push(LpColumn { cost: c.cost, lower: 0.0, upper: f64::INFINITY, entries });
    }
    for i in 0..rows {
        lp_columns.push(LpColumn {
            cost: -stab.delta[i],
            lower: 0.0,
            upper: stab.xi[i],
            entries: vec![(i + 1, -1.0)],
        });
    }
    for i in 0..rows {
        lp_columns.push(LpColumn {
            cost: stab.delta[i],
            lower: 0.0,
            upper: stab.xi[i],
            entries: vec![(i + 1, 1.0)],
        });
    }
    LpProblem { rhs, columns: lp_columns }
}

/// Solves the stabilized restricted master over `columns` with `stab.rows()`
/// assignment rows.
pub fn solve_restricted_master(columns: &[Column], k: usize, stab: &StabilizationState) -> Result<MasterSolution> {
    let rows = stab.rows();
    let problem = build_master(columns, k, stab);
    let sol = lp::solve(&problem).map_err(|e| match e {
        LpError::Infeasible(_) => Error::MasterInfeasible,
        other => Error::Solver(format!(
            "{other} ({} rows, {} pool columns, xi max {:.1e})",
            rows + 1,
            columns.len(),
            stab.xi.iter().cloned().fold(0.0, f64::max)
        )),
    })?;
    let dual_objective = sol.dual_objective(&problem);
    let nz = columns.len();
    Ok(MasterSolution {
        z: sol.x[..nz].to_vec(),
        q_minus: sol.x[nz..nz + rows].to_vec(),
        q_plus: sol.x[nz + rows..].to_vec(),
        pi: sol.duals[1..].to_vec(),
        upsilon: sol.duals[0],
        objective: sol.objective,
        dual_objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(members: &[usize], cost: f64) -> Column {
        Column { members: MemberSet::from_indices(members.iter().copied()), cost }
    }

    #[test]
    fn shrink_rule() {
        let s = StabilizationState::new(3);
        let u = update_stabilization(&s, &[1.0, -2.0, 0.5]);
        assert_eq!(u.xi, vec![0.1; 3]);
        assert_eq!(u.delta, vec![1.0, -2.0, 0.5]);
        let tiny = StabilizationState { xi: vec![5e-7; 2], ..StabilizationState::new(2) };
        assert_eq!(update_stabilization(&tiny, &[0.0, 0.0]).xi, vec![0.0; 2]);
    }

    #[test]
    fn feasible_partition_columns_are_selected() {
        let cols = vec![column(&[0, 2], 3.0), column(&[1, 3], 4.5)];
        let sol = solve_restricted_master(&cols, 2, &StabilizationState::unstabilized(4)).unwrap();
        assert_eq!(sol.z, vec![1.0, 1.0]);
        assert!((sol.objective - 7.5).abs() < 1e-12);
        assert!((sol.objective - sol.dual_objective).abs() < 1e-9);
        assert!(sol.perturbation_free());
    }

    #[test]
    fn picks_cheapest_cover_of_cardinality_k() {
        // Pool {1},{2},{3},{2,3},{3,4},{1,2,4} on entities 1..4 (0-based here).
        let cols = vec![
            column(&[0], 1.0),
            column(&[1], 1.0),
            column(&[2], 1.0),
            column(&[1, 2], 1.5),
            column(&[2, 3], 2.0),
            column(&[0, 1, 3], 4.0),
        ];
        let sol = solve_restricted_master(&cols, 3, &StabilizationState::unstabilized(4)).unwrap();
        let support = sol.integral_support(1e-9).expect("integral");
        assert_eq!(support, vec![0, 1, 4]);
        assert!((sol.objective - 4.0).abs() < 1e-9);
        for (c, z) in cols.iter().zip(&sol.z) {
            let d = sol.reduced_cost(&c.members, c.cost);
            assert!(d > -1e-9);
            if *z > 1e-9 {
                assert!(d.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stabilized_master_respects_boxes() {
        let cols = vec![column(&[0, 1], 2.0), column(&[2], 1.0), column(&[0], 0.5), column(&[1, 2], 2.5)];
        let stab = StabilizationState { delta: vec![0.3, 0.1, 0.2], ..StabilizationState::new(3) };
        let sol = solve_restricted_master(&cols, 2, &stab).unwrap();
        for i in 0..3 {
            assert!(sol.q_minus[i] >= -1e-12 && sol.q_minus[i] <= 1.0 + 1e-12);
            assert!(sol.q_plus[i] >= -1e-12 && sol.q_plus[i] <= 1.0 + 1e-12);
            let cover: f64 = cols
                .iter()
                .zip(&sol.z)
                .filter(|(c, _)| c.members.contains(i))
                .map(|(_, z)| z)
                .sum();
            assert!((cover - sol.q_minus[i] + sol.q_plus[i] - 1.0).abs() < 1e-9);
        }
        assert!((sol.z.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        assert!((sol.objective - sol.dual_objective).abs() < 1e-7);
    }

    #[test]
    fn uncovered_row_without_perturbation_is_infeasible() {
        let cols = vec![column(&[0], 1.0), column(&[1], 1.0)];
        let err = solve_restricted_master(&cols, 2, &StabilizationState::unstabilized(3)).unwrap_err();
        assert!(matches!(err, Error::MasterInfeasible));
    }
}
