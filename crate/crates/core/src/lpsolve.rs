//! Dense two-phase simplex returning basic (vertex) optimal solutions.
//!
//! All variables are nonnegative. Entering columns are chosen by the most
//! negative reduced cost until a run of degenerate pivots is seen, after which
//! the solve falls back to Bland's rule for the rest of the phase. Ties are
//! always broken toward the lowest variable index, so runs are deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const ZERO_SNAP: f64 = 1e-12;
const DEGENERATE_RUN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint references undeclared variable {0}")]
    UnknownVariable(usize),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("simplex stalled after {iterations} pivots (cap {cap})")]
    IterationLimit { iterations: usize, cap: usize },
    #[error("solution violates constraint {row} by {violation:e}")]
    NumericalInstability { row: usize, violation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize c·x` subject to linear rows, with `x >= 0`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    names: Vec<String>,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, LpError> {
        if let Some(&(v, _)) = coeffs.iter().find(|(v, _)| *v >= self.names.len()) {
            return Err(LpError::UnknownVariable(v));
        }
        if !rhs.is_finite() || coeffs.iter().any(|(_, a)| !a.is_finite()) {
            return Err(LpError::NonFinite("constraint"));
        }
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn variable_name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Largest violation of any row at `x` (negative entries of `x` count too).
    pub fn max_violation(&self, x: &[f64]) -> (usize, f64) {
        let mut worst = (0, 0.0f64);
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.coeffs.iter().map(|&(v, a)| a * x[v]).sum();
            let scale =
                1.0 + c.rhs.abs() + c.coeffs.iter().map(|&(v, a)| (a * x[v]).abs()).sum::<f64>();
            let raw = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            let v = raw / scale;
            if v > worst.1 {
                worst = (i, v);
            }
        }
        let neg = x.iter().map(|&v| -v).fold(0.0f64, f64::max);
        if neg > worst.1 {
            worst = (usize::MAX, neg);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// The returned point is a basic feasible solution.
    pub basic: bool,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, var: usize) -> f64 {
        self.values[var]
    }

    fn without_point(status: LpStatus, n: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            values: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            basic: false,
            iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    width: usize, // columns + rhs
    cells: Vec<f64>,
    cost: Vec<f64>, // reduced costs; last entry is -objective
    basis: Vec<usize>,
    first_artificial: usize,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.cells[r * w + c];
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        self.cells[r * w + c] = 1.0;
        let (before, rest) = self.cells.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let factor = row[c];
            if factor != 0.0 {
                for (x, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= factor * pr;
                }
                row[c] = 0.0;
            }
        }
        let factor = self.cost[c];
        if factor != 0.0 {
            for (x, &pr) in self.cost.iter_mut().zip(pivot_row.iter()) {
                *x -= factor * pr;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn run(&mut self, allow_artificial: bool) -> Result<Outcome, LpError> {
        let limit = if allow_artificial {
            self.width - 1
        } else {
            self.first_artificial
        };
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..limit).find(|&j| self.cost[j] < -COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..limit {
                    let d = self.cost[j];
                    if d < -COST_TOL && best.is_none_or(|(_, b)| d < b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(c) = entering else {
                return Ok(Outcome::Optimal);
            };

            let rhs = self.rhs_col();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.at(i, rhs).max(0.0) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Outcome::Unbounded);
            };

            self.iterations += 1;
            if self.iterations > self.cap {
                return Err(LpError::IterationLimit {
                    iterations: self.iterations,
                    cap: self.cap,
                });
            }
            if ratio <= ZERO_SNAP {
                degenerate += 1;
                if degenerate >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.cells.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Solves the program, returning a basic optimal solution when one exists.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_variables();
    if lp.objective.iter().any(|c| !c.is_finite()) {
        return Err(LpError::NonFinite("objective"));
    }

    // Normalise rows to nonnegative right-hand sides.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(lp.constraints.len());
    for c in &lp.constraints {
        let mut dense = vec![0.0; n];
        for &(v, a) in &c.coeffs {
            dense[v] += a;
        }
        let (mut rel, mut rhs) = (c.relation, c.rhs);
        if rhs < 0.0 {
            dense.iter_mut().for_each(|a| *a = -*a);
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push((dense, rel, rhs));
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let first_slack = n;
    let first_artificial = n + slack_count;
    let cols = first_artificial + art_count;
    let width = cols + 1;

    let mut t = Tableau {
        rows: m,
        width,
        cells: vec![0.0; m * width],
        cost: vec![0.0; width],
        basis: vec![0; m],
        first_artificial,
        iterations: 0,
        cap: 50 * (n + m).max(1),
    };

    let (mut next_slack, mut next_art) = (first_slack, first_artificial);
    for (i, (dense, rel, rhs)) in rows.iter().enumerate() {
        let row = &mut t.cells[i * width..(i + 1) * width];
        row[..n].copy_from_slice(dense);
        row[cols] = *rhs;
        match rel {
            Relation::Le => {
                row[next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    // Phase 1: minimise the sum of artificials.
    if art_count > 0 {
        for i in 0..m {
            if t.basis[i] >= first_artificial {
                for j in 0..width {
                    if j < first_artificial || j == cols {
                        t.cost[j] -= t.at(i, j);
                    }
                }
            }
        }
        t.run(true)?;
        let infeasibility = -t.cost[cols];
        let rhs_scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * rhs_scale {
            return Ok(LpSolution::without_point(
                LpStatus::Infeasible,
                n,
                t.iterations,
            ));
        }
        // Drive remaining (zero-valued) artificials out of the basis; rows
        // where that is impossible are redundant.
        let mut i = 0;
        while i < t.rows {
            if t.basis[i] >= first_artificial {
                let col = (0..first_artificial).find(|&j| t.at(i, j).abs() > PIVOT_TOL);
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => t.remove_row(i),
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase 2 with the objective scaled to unit magnitude.
    let scale = lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let costs: Vec<f64> = if scale > 0.0 {
        lp.objective.iter().map(|c| c / scale).collect()
    } else {
        vec![0.0; n]
    };
    t.cost.iter_mut().for_each(|x| *x = 0.0);
    t.cost[..n].copy_from_slice(&costs);
    for i in 0..t.rows {
        let b = t.basis[i];
        let cb = if b < n { costs[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                let a = t.at(i, j);
                t.cost[j] -= cb * a;
            }
        }
    }
    for i in 0..t.rows {
        t.cost[t.basis[i]] = 0.0;
    }
    if t.run(false)? == Outcome::Unbounded {
        return Ok(LpSolution::without_point(
            LpStatus::Unbounded,
            n,
            t.iterations,
        ));
    }

    let mut values = vec![0.0; n];
    let mut positive = 0usize;
    for i in 0..t.rows {
        let b = t.basis[i];
        let v = t.at(i, cols);
        let v = if v.abs() < ZERO_SNAP { 0.0 } else { v };
        if v.abs() > FEAS_TOL {
            positive += 1;
        }
        if b < n {
            values[b] = v.max(0.0);
        }
    }

    let (row, violation) = lp.max_violation(&values);
    if violation > FEAS_TOL {
        return Err(LpError::NumericalInstability { row, violation });
    }
    let objective = lp.objective.iter().zip(&values).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective,
        basic: positive <= t.rows,
        iterations: t.iterations,
    })
}
