//! Linear programming: maximize a linear objective over linear constraints
//! with non-negative variables.
//!
//! Small and medium problems run through an in-crate dense two-phase simplex
//! with deterministic pivoting (largest reduced cost, smallest index on
//! ties; Bland's rule after a fixed pivot budget to guarantee termination).
//! Problems whose tableau would be impractically large are routed to a
//! sparse revised simplex (`microlp`), which is likewise deterministic.
//! Either way the result carries residuals checkable via [`verify`].

use crate::error::ScheduleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpConstraint {
    /// Sparse row, sorted by column, coefficients aggregated.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A maximization problem over non-negative variables.
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    /// Optional variable names for diagnostics; empty means unnamed.
    pub var_names: Vec<String>,
}

impl LpProblem {
    pub fn new(n_vars: usize) -> Self {
        LpProblem {
            n_vars,
            objective: vec![0.0; n_vars],
            constraints: Vec::new(),
            var_names: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        let mut sorted = coeffs;
        sorted.sort_unstable_by_key(|&(j, _)| j);
        let mut agg: Vec<(usize, f64)> = Vec::with_capacity(sorted.len());
        for (j, v) in sorted {
            debug_assert!(j < self.n_vars, "column {j} out of range");
            match agg.last_mut() {
                Some((lj, lv)) if *lj == j => *lv += v,
                _ => agg.push((j, v)),
            }
        }
        agg.retain(|&(_, v)| v != 0.0);
        self.constraints.push(LpConstraint { coeffs: agg, relation, rhs });
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.objective.len() != self.n_vars {
            return Err("objective arity mismatch".into());
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(format!("row {r} has non-finite rhs"));
            }
            for &(j, v) in &c.coeffs {
                if j >= self.n_vars {
                    return Err(format!("row {r} references column {j} out of {}", self.n_vars));
                }
                if !v.is_finite() {
                    return Err(format!("row {r}, column {j} has non-finite coefficient"));
                }
            }
        }
        Ok(())
    }

    /// Line-oriented text dump: objective row first, then constraint rows.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        write!(out, "max").unwrap();
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(out, " {j}:{c}").unwrap();
            }
        }
        out.push('\n');
        for c in &self.constraints {
            write!(out, "{} {}", c.relation.symbol(), c.rhs).unwrap();
            for &(j, v) in &c.coeffs {
                write!(out, " {j}:{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    DenseSimplex,
    SparseRevised,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub path: SolverPath,
}

impl LpSolution {
    pub fn into_optimal(self, context: &str) -> Result<LpSolution, ScheduleError> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(ScheduleError::Infeasible(context.to_string())),
            LpStatus::Unbounded => Err(ScheduleError::Solver(format!("{context}: unbounded"))),
            LpStatus::IterationLimit => Err(ScheduleError::Solver(format!("{context}: iteration limit"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub cost_tol: f64,
    /// Total pivot budget; defaults to 50 * (rows + cols).
    pub max_iter: Option<usize>,
    /// Tableau cell budget above which the sparse path is used.
    pub dense_cell_limit: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: 1e-9,
            cost_tol: 1e-9,
            max_iter: None,
            dense_cell_limit: 1 << 22,
        }
    }
}

pub fn solve(problem: &LpProblem) -> LpSolution {
    solve_with(problem, &LpOptions::default())
}

pub fn solve_with(problem: &LpProblem, opts: &LpOptions) -> LpSolution {
    debug_assert!(problem.validate().is_ok());
    let m = problem.constraints.len();
    let cells = m.saturating_mul(problem.n_vars + 2 * m);
    if cells > opts.dense_cell_limit {
        solve_sparse(problem)
    } else {
        DenseSimplex::new(problem, opts).run()
    }
}

/// Residuals of a solution against a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyReport {
    pub max_violation: f64,
    pub max_negativity: f64,
    pub objective_delta: f64,
    pub worst_row: Option<usize>,
}

impl VerifyReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_violation <= tol && self.max_negativity <= tol && self.objective_delta.abs() <= tol
    }
}

pub fn verify(problem: &LpProblem, solution: &LpSolution) -> VerifyReport {
    let x = &solution.values;
    let mut max_violation = 0.0f64;
    let mut worst_row = None;
    for (r, c) in problem.constraints.iter().enumerate() {
        let lhs: f64 = c.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
        let violation = match c.relation {
            Relation::Le => lhs - c.rhs,
            Relation::Ge => c.rhs - lhs,
            Relation::Eq => (lhs - c.rhs).abs(),
        }
        .max(0.0);
        if violation > max_violation {
            max_violation = violation;
            worst_row = Some(r);
        }
    }
    let max_negativity = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
    let recomputed: f64 = problem.objective.iter().zip(x).map(|(c, v)| c * v).sum();
    VerifyReport {
        max_violation,
        max_negativity,
        objective_delta: recomputed - solution.objective_value,
        worst_row,
    }
}

fn solve_sparse(problem: &LpProblem) -> LpSolution {
    use microlp::{ComparisonOp, OptimizationDirection, Problem};
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = problem
        .objective
        .iter()
        .map(|&c| p.add_var(c, (0.0, f64::INFINITY)))
        .collect();
    for c in &problem.constraints {
        let expr: Vec<(microlp::Variable, f64)> = c.coeffs.iter().map(|&(j, v)| (vars[j], v)).collect();
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Eq => ComparisonOp::Eq,
            Relation::Ge => ComparisonOp::Ge,
        };
        p.add_constraint(expr, op, c.rhs);
    }
    match p.solve() {
        Ok(sol) => {
            let values: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
            let objective_value = sol.objective();
            LpSolution {
                status: LpStatus::Optimal,
                values,
                objective_value,
                iterations: 0,
                path: SolverPath::SparseRevised,
            }
        }
        Err(microlp::Error::Infeasible) => LpSolution {
            status: LpStatus::Infeasible,
            values: vec![0.0; problem.n_vars],
            objective_value: f64::NAN,
            iterations: 0,
            path: SolverPath::SparseRevised,
        },
        Err(microlp::Error::Unbounded) => LpSolution {
            status: LpStatus::Unbounded,
            values: vec![0.0; problem.n_vars],
            objective_value: f64::NAN,
            iterations: 0,
            path: SolverPath::SparseRevised,
        },
        Err(e) => LpSolution {
            status: LpStatus::IterationLimit,
            values: vec![0.0; problem.n_vars],
            objective_value: f64::NAN,
            iterations: 0,
            path: SolverPath::SparseRevised,
        }
        .tap_log(e),
    }
}

trait TapLog {
    fn tap_log(self, e: microlp::Error) -> Self;
}

impl TapLog for LpSolution {
    fn tap_log(self, e: microlp::Error) -> Self {
        log::warn!("sparse lp solve failed: {e:?}");
        self
    }
}

/// Dense two-phase tableau simplex.
struct DenseSimplex {
    m: usize,
    n_vars: usize,
    n_cols: usize,
    /// m rows of n_cols coefficients plus rhs, row-major.
    tab: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    objective: Vec<f64>,
    artificial_start: usize,
    in_phase2: bool,
    feas_tol: f64,
    cost_tol: f64,
    pivot_tol: f64,
    max_iter: usize,
    bland_after: usize,
    iterations: usize,
}

impl DenseSimplex {
    fn new(problem: &LpProblem, opts: &LpOptions) -> Self {
        let m = problem.constraints.len();
        let n = problem.n_vars;
        // Column layout: original vars, one slack/surplus per inequality row,
        // artificials for rows that need them (after sign normalization).
        let mut n_slack = 0;
        let mut n_art = 0;
        let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::with_capacity(m);
        for c in &problem.constraints {
            let (coeffs, relation, rhs) = if c.rhs < 0.0 {
                let flipped = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|&(j, v)| (j, -v)).collect(), flipped, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            };
            if relation != Relation::Eq {
                n_slack += 1;
            }
            if relation != Relation::Le {
                n_art += 1;
            }
            rows.push((coeffs, relation, rhs));
        }
        let n_cols = n + n_slack + n_art;
        let width = n_cols + 1;
        let mut tab = vec![0.0; m * width];
        let mut basis = vec![0usize; m];
        let mut slack_col = n;
        let mut art_col = n + n_slack;
        for (r, (coeffs, relation, rhs)) in rows.iter().enumerate() {
            let row = &mut tab[r * width..(r + 1) * width];
            for &(j, v) in coeffs {
                row[j] = v;
            }
            row[n_cols] = *rhs;
            match relation {
                Relation::Le => {
                    row[slack_col] = 1.0;
                    basis[r] = slack_col;
                    slack_col += 1;
                }
                Relation::Ge => {
                    row[slack_col] = -1.0;
                    slack_col += 1;
                    row[art_col] = 1.0;
                    basis[r] = art_col;
                    art_col += 1;
                }
                Relation::Eq => {
                    row[art_col] = 1.0;
                    basis[r] = art_col;
                    art_col += 1;
                }
            }
        }
        let max_iter = opts.max_iter.unwrap_or(50 * (m + n_cols));
        DenseSimplex {
            m,
            n_vars: n,
            n_cols,
            tab,
            cost: vec![0.0; width],
            basis,
            objective: problem.objective.clone(),
            artificial_start: n + n_slack,
            in_phase2: false,
            feas_tol: opts.feas_tol,
            cost_tol: opts.cost_tol,
            pivot_tol: 1e-11,
            max_iter,
            bland_after: 3 * (m + n_cols),
            iterations: 0,
        }
    }

    fn width(&self) -> usize {
        self.n_cols + 1
    }

    fn run(mut self) -> LpSolution {
        // Phase 1: drive artificial variables to zero.
        if self.artificial_start < self.n_cols {
            for j in self.artificial_start..self.n_cols {
                self.cost[j] = -1.0;
            }
            self.reduce_cost_row();
            if let Some(status) = self.iterate() {
                return self.finish(status);
            }
            // cost[rhs] holds minus the phase-1 objective, i.e. the sum of
            // artificial values at the current vertex.
            let art_sum = self.cost[self.n_cols];
            if art_sum > self.feas_tol {
                return self.finish(LpStatus::Infeasible);
            }
            self.evict_artificials();
        }
        // Phase 2: original objective, artificial columns barred.
        self.in_phase2 = true;
        self.cost = vec![0.0; self.width()];
        self.cost[..self.n_vars].copy_from_slice(&self.objective.clone());
        self.reduce_cost_row();
        let status = self.iterate().unwrap_or(LpStatus::Optimal);
        self.finish(status)
    }

    /// Subtract basic-variable cost multiples so reduced costs of basic
    /// variables are zero.
    fn reduce_cost_row(&mut self) {
        let width = self.width();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row_off = r * width;
                for j in 0..width {
                    self.cost[j] -= cb * self.tab[row_off + j];
                }
            }
        }
    }

    /// Pivot until optimal; returns early with a terminal status on
    /// unboundedness or iteration exhaustion.
    fn iterate(&mut self) -> Option<LpStatus> {
        loop {
            if self.iterations >= self.max_iter {
                return Some(LpStatus::IterationLimit);
            }
            let bland = self.iterations >= self.bland_after;
            let entering = self.choose_entering(bland)?;
            let leaving = match self.choose_leaving(entering, bland) {
                Some(r) => r,
                None => return Some(LpStatus::Unbounded),
            };
            self.pivot(leaving, entering);
            self.iterations += 1;
        }
    }

    fn barred(&self, j: usize) -> bool {
        self.in_phase2 && j >= self.artificial_start
    }

    fn choose_entering(&self, bland: bool) -> Option<usize> {
        if bland {
            (0..self.n_cols).find(|&j| !self.barred(j) && self.cost[j] > self.cost_tol)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_cols {
                if self.barred(j) {
                    continue;
                }
                let c = self.cost[j];
                if c > self.cost_tol && best.map_or(true, |(_, bc)| c > bc) {
                    best = Some((j, c));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    fn choose_leaving(&self, entering: usize, bland: bool) -> Option<usize> {
        let width = self.width();
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let a = self.tab[r * width + entering];
            if a > self.pivot_tol {
                let ratio = self.tab[r * width + self.n_cols] / a;
                let better = match best {
                    None => true,
                    Some((br, bratio)) => {
                        ratio < bratio - 1e-12
                            || (ratio < bratio + 1e-12
                                && if bland {
                                    self.basis[r] < self.basis[br]
                                } else {
                                    r < br
                                })
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let pivot = self.tab[row * width + col];
        debug_assert!(pivot.abs() > self.pivot_tol);
        let inv = 1.0 / pivot;
        for j in 0..width {
            self.tab[row * width + j] *= inv;
        }
        self.tab[row * width + col] = 1.0;
        let pivot_row: Vec<f64> = self.tab[row * width..(row + 1) * width].to_vec();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.tab[r * width + col];
            if factor != 0.0 {
                let off = r * width;
                for j in 0..width {
                    self.tab[off + j] -= factor * pivot_row[j];
                }
                self.tab[off + col] = 0.0;
            }
        }
        let factor = self.cost[col];
        if factor != 0.0 {
            for j in 0..width {
                self.cost[j] -= factor * pivot_row[j];
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// After phase 1, pivot still-basic artificials out or drop their rows.
    fn evict_artificials(&mut self) {
        let width = self.width();
        let mut r = 0;
        while r < self.m {
            if self.basis[r] >= self.artificial_start {
                let pivot_col = (0..self.artificial_start)
                    .find(|&j| self.tab[r * width + j].abs() > self.pivot_tol);
                match pivot_col {
                    Some(j) => self.pivot(r, j),
                    None => {
                        // Redundant row: remove it entirely.
                        self.tab.drain(r * width..(r + 1) * width);
                        self.basis.remove(r);
                        self.m -= 1;
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    fn finish(&self, status: LpStatus) -> LpSolution {
        let width = self.width();
        let mut values = vec![0.0; self.n_vars];
        if status == LpStatus::Optimal || status == LpStatus::IterationLimit {
            for r in 0..self.m {
                let b = self.basis[r];
                if b < self.n_vars {
                    values[b] = self.tab[r * width + self.n_cols];
                }
            }
        }
        let objective_value = match status {
            LpStatus::Optimal | LpStatus::IterationLimit => -self.cost[self.n_cols],
            _ => f64::NAN,
        };
        LpSolution {
            status,
            values,
            objective_value,
            iterations: self.iterations,
            path: SolverPath::DenseSimplex,
        }
    }
}
