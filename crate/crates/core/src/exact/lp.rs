//! Dense bounded-variable primal simplex.
//!
//! Solves `min c^T x` subject to `A x = b`, `l <= x <= u` with finite lower
//! bounds. Phase one starts from one artificial per row; phase two keeps any
//! artificial left in the basis fixed at zero. The basis inverse is kept
//! explicitly (rows stay in the tens for restricted masters) and rebuilt
//! periodically. Pricing is Dantzig's rule, switching to Bland's rule while
//! pivots are degenerate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
    /// Nonzero `(row, value)` entries.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub rhs: Vec<f64>,
    pub columns: Vec<LpColumn>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals `y` with reduced costs `c_j - y^T A_j`.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    /// Objective of the bounded dual: `b^T y + sum_j (l_j max(d_j,0) + u_j min(d_j,0))`.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let mut total: f64 = problem.rhs.iter().zip(&self.duals).map(|(b, y)| b * y).sum();
        for (col, &d) in problem.columns.iter().zip(&self.reduced_costs) {
            if d > 0.0 {
                total += col.lower * d;
            } else if d < 0.0 && col.upper.is_finite() {
                total += col.upper * d;
            }
        }
        total
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("problem is infeasible (phase one residual {0:.3e})")]
    Infeasible(f64),
    #[error("problem is unbounded")]
    Unbounded,
    #[error("iteration limit of {0} pivots reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    Singular,
    #[error("invalid bounds on column {0}")]
    Bounds(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    Lower,
    Upper,
}

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const MAX_PIVOTS: usize = 200_000;

struct Simplex<'a> {
    problem: &'a LpProblem,
    m: usize,
    n: usize,
    art_sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    x: Vec<f64>,
    binv: Vec<f64>,
    pivots: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a LpProblem) -> Result<Self, LpError> {
        let m = problem.rhs.len();
        let n = problem.columns.len();
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut x = Vec::with_capacity(n + m);
        for (j, c) in problem.columns.iter().enumerate() {
            if !c.lower.is_finite() || c.upper < c.lower || c.upper.is_nan() {
                return Err(LpError::Bounds(j));
            }
            lower.push(c.lower);
            upper.push(c.upper);
            x.push(c.lower);
        }
        let mut residual = problem.rhs.clone();
        for c in &problem.columns {
            for &(i, v) in &c.entries {
                residual[i] -= v * c.lower;
            }
        }
        let art_sign: Vec<f64> = residual.iter().map(|&r| if r >= 0.0 { 1.0 } else { -1.0 }).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(residual[i].abs());
            binv[i * m + i] = art_sign[i];
        }
        let mut state = vec![State::Lower; n + m];
        let basis: Vec<usize> = (n..n + m).collect();
        for (pos, &b) in basis.iter().enumerate() {
            state[b] = State::Basic(pos);
        }
        Ok(Self {
            problem,
            m,
            n,
            art_sign,
            lower,
            upper,
            state,
            basis,
            x,
            binv,
            pivots: 0,
            since_refactor: 0,
        })
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n {
            ColumnRef::Sparse(&self.problem.columns[j].entries)
        } else {
            ColumnRef::Unit(j - self.n, self.art_sign[j - self.n])
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        match self.column(j) {
            ColumnRef::Sparse(entries) => {
                for &(i, v) in entries {
                    for (k, a) in alpha.iter_mut().enumerate() {
                        *a += self.binv[k * m + i] * v;
                    }
                }
            }
            ColumnRef::Unit(i, s) => {
                for (k, a) in alpha.iter_mut().enumerate() {
                    *a = self.binv[k * m + i] * s;
                }
            }
        }
        alpha
    }

    fn duals(&self, costs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &b) in self.basis.iter().enumerate() {
            let cb = costs[b];
            if cb == 0.0 {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += cb * self.binv[k * m + i];
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, costs: &[f64], y: &[f64]) -> f64 {
        let dot = match self.column(j) {
            ColumnRef::Sparse(entries) => entries.iter().map(|&(i, v)| y[i] * v).sum::<f64>(),
            ColumnRef::Unit(i, s) => y[i] * s,
        };
        costs[j] - dot
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        // Gauss-Jordan on [B | I].
        let mut a = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Sparse(entries) => {
                    for &(i, v) in entries {
                        a[i * m + pos] += v;
                    }
                }
                ColumnRef::Unit(i, s) => a[i * m + pos] = s,
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let piv = (k..m)
                .max_by(|&p, &q| a[p * m + k].abs().total_cmp(&a[q * m + k].abs()))
                .unwrap();
            if a[piv * m + k].abs() < 1e-12 {
                return Err(LpError::Singular);
            }
            if piv != k {
                for c in 0..m {
                    a.swap(k * m + c, piv * m + c);
                    inv.swap(k * m + c, piv * m + c);
                }
            }
            let d = a[k * m + k];
            for c in 0..m {
                a[k * m + c] /= d;
                inv[k * m + c] /= d;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = a[r * m + k];
                if f == 0.0 {
                    continue;
                }
                for c in 0..m {
                    a[r * m + c] -= f * a[k * m + c];
                    inv[r * m + c] -= f * inv[k * m + c];
                }
            }
        }
        self.binv = inv;
        // Recompute basic values from the nonbasic ones.
        let mut rhs = self.problem.rhs.clone();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], State::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            match self.column(j) {
                ColumnRef::Sparse(entries) => {
                    for &(i, v) in entries {
                        rhs[i] -= v * self.x[j];
                    }
                }
                ColumnRef::Unit(i, s) => rhs[i] -= s * self.x[j],
            }
        }
        for (k, &b) in self.basis.iter().enumerate() {
            self.x[b] = (0..m).map(|i| self.binv[k * m + i] * rhs[i]).sum();
        }
        self.since_refactor = 0;
        Ok(())
    }

    fn run(&mut self, costs: &[f64]) -> Result<(), LpError> {
        let m = self.m;
        let total = self.n + self.m;
        let cost_scale = costs.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        let d_tol = 1e-11 * cost_scale;
        let mut bland = false;
        loop {
            if self.pivots >= MAX_PIVOTS {
                return Err(LpError::IterationLimit(MAX_PIVOTS));
            }
            let y = self.duals(costs);
            let mut entering = None;
            let mut best_score = 0.0;
            for j in 0..total {
                let increase = match self.state[j] {
                    State::Basic(_) => continue,
                    State::Lower => true,
                    State::Upper => false,
                };
                if self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, costs, &y);
                let score = if increase { -d } else { d };
                if score > d_tol {
                    if bland {
                        entering = Some((j, increase));
                        break;
                    }
                    if score > best_score {
                        best_score = score;
                        entering = Some((j, increase));
                    }
                }
            }
            let Some((j, increase)) = entering else {
                return Ok(());
            };
            let alpha = self.ftran(j);
            let dir = if increase { 1.0 } else { -1.0 };

            let mut theta = self.upper[j] - self.lower[j];
            let mut leaving: Option<(usize, bool)> = None;
            for (k, &a) in alpha.iter().enumerate() {
                let delta = dir * a;
                let b = self.basis[k];
                let (limit, to_upper) = if delta > PIVOT_TOL {
                    ((self.x[b] - self.lower[b]) / delta, false)
                } else if delta < -PIVOT_TOL && self.upper[b].is_finite() {
                    ((self.upper[b] - self.x[b]) / -delta, true)
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = if limit < theta - 1e-12 {
                    true
                } else if limit <= theta + 1e-12 {
                    // Ties keep a bound flip; among rows, Bland takes the
                    // smallest variable, otherwise the largest pivot.
                    match leaving {
                        None => false,
                        Some((cur, _)) if bland => b < self.basis[cur],
                        Some((cur, _)) => a.abs() > alpha[cur].abs(),
                    }
                } else {
                    false
                };
                if better {
                    theta = limit;
                    leaving = Some((k, to_upper));
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded);
            }

            self.x[j] += dir * theta;
            for (k, &a) in alpha.iter().enumerate() {
                let b = self.basis[k];
                self.x[b] -= dir * theta * a;
            }
            bland = theta <= 1e-12;

            match leaving {
                None => {
                    // Bound flip.
                    self.state[j] = if increase { State::Upper } else { State::Lower };
                    self.x[j] = if increase { self.upper[j] } else { self.lower[j] };
                }
                Some((r, to_upper)) => {
                    let out = self.basis[r];
                    self.x[out] = if to_upper { self.upper[out] } else { self.lower[out] };
                    self.state[out] = if to_upper { State::Upper } else { State::Lower };
                    self.basis[r] = j;
                    self.state[j] = State::Basic(r);
                    let pivot = alpha[r];
                    for c in 0..m {
                        self.binv[r * m + c] /= pivot;
                    }
                    for (k, &a) in alpha.iter().enumerate() {
                        if k == r || a == 0.0 {
                            continue;
                        }
                        for c in 0..m {
                            self.binv[k * m + c] -= a * self.binv[r * m + c];
                        }
                    }
                    self.pivots += 1;
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY {
                        self.refactor()?;
                    }
                }
            }
        }
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Unit(usize, f64),
}

pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(problem)?;
    let n = s.n;
    let m = s.m;

    let mut phase_one = vec![0.0; n + m];
    for c in phase_one.iter_mut().skip(n) {
        *c = 1.0;
    }
    s.run(&phase_one)?;
    s.refactor()?;
    let infeasibility: f64 = s.x[n..].iter().sum();
    let rhs_scale = problem.rhs.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if infeasibility > 1e-8 * rhs_scale {
        return Err(LpError::Infeasible(infeasibility));
    }
    for a in n..n + m {
        s.upper[a] = 0.0;
        if !matches!(s.state[a], State::Basic(_)) {
            s.x[a] = 0.0;
            s.state[a] = State::Lower;
        }
    }

    let mut costs: Vec<f64> = problem.columns.iter().map(|c| c.cost).collect();
    costs.resize(n + m, 0.0);
    s.run(&costs)?;
    s.refactor()?;

    let duals = s.duals(&costs);
    let reduced_costs: Vec<f64> = (0..n).map(|j| s.reduced_cost(j, &costs, &duals)).collect();
    let x: Vec<f64> = (0..n)
        .map(|j| s.x[j].clamp(s.lower[j], s.upper[j]))
        .collect();
    let objective = x.iter().zip(&problem.columns).map(|(v, c)| v * c.cost).sum();
    Ok(LpSolution { x, duals, reduced_costs, objective, pivots: s.pivots })
}
