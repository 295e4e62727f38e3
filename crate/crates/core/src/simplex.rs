//! Revised simplex with a dense basis inverse and sparse columns.
//!
//! The solver minimizes `c.x` subject to `A x = b`, `x >= 0`. Columns may be
//! appended between solves, which is how row generation on the primal side
//! shows up here (column generation on the dual).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 200;
const DEGENERATE_BEFORE_PERTURBING: usize = 30;
const DEGENERATE_BEFORE_LEXICOGRAPHIC: usize = 200;
const MAX_PERTURBATIONS: usize = 4;
const PERTURBATION: f64 = 1e-7;

pub type SparseColumn = Vec<(usize, f64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct RevisedSimplex {
    rows: usize,
    rhs: Vec<f64>,
    columns: Vec<SparseColumn>,
    cost: Vec<f64>,
    enterable: Vec<bool>,
    basis: Vec<usize>,
    position: Vec<Option<usize>>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    pub pivots: usize,
    pub degenerate_pivots: usize,
    /// Devex reference weights.
    weights: Vec<f64>,
}

impl RevisedSimplex {
    pub fn new(rhs: Vec<f64>) -> Self {
        let rows = rhs.len();
        Self {
            rows,
            rhs,
            columns: Vec::new(),
            cost: Vec::new(),
            enterable: Vec::new(),
            basis: Vec::new(),
            position: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            since_refactor: 0,
            pivots: 0,
            degenerate_pivots: 0,
            weights: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn add_column(&mut self, column: SparseColumn, cost: f64) -> usize {
        debug_assert!(column.iter().all(|&(r, _)| r < self.rows));
        self.columns.push(column);
        self.cost.push(cost);
        self.enterable.push(true);
        self.position.push(None);
        self.weights.push(1.0);
        self.columns.len() - 1
    }

    pub fn set_cost(&mut self, column: usize, cost: f64) {
        self.cost[column] = cost;
    }

    pub fn set_enterable(&mut self, column: usize, enterable: bool) {
        self.enterable[column] = enterable;
    }

    /// Installs a starting basis; it must be nonsingular and primal feasible.
    pub fn set_basis(&mut self, basis: Vec<usize>) -> Result<()> {
        if basis.len() != self.rows {
            return Err(Error::Dimension("basis size must equal the row count".into()));
        }
        for p in self.position.iter_mut() {
            *p = None;
        }
        for (i, &j) in basis.iter().enumerate() {
            self.position[j] = Some(i);
        }
        self.basis = basis;
        self.refactor()?;
        if self.xb.iter().any(|&v| v < -FEASIBILITY_TOL) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.rows;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (i, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.columns[j] {
                b[(r, i)] = v;
            }
        }
        let inv = b.try_inverse().ok_or_else(|| Error::Invariant("singular simplex basis".into()))?;
        self.binv = (0..m).flat_map(|r| (0..m).map(move |c| (r, c))).map(|(r, c)| inv[(r, c)]).collect();
        self.xb = (0..m).map(|r| (0..m).map(|c| self.binv[r * m + c] * self.rhs[c]).sum()).collect();
        for v in self.xb.iter_mut() {
            if v.abs() < 1e-13 {
                *v = 0.0;
            }
        }
        self.since_refactor = 0;
        Ok(())
    }

    /// Simplex multipliers `pi = c_B B^-1`.
    pub fn duals(&self) -> Vec<f64> {
        let m = self.rows;
        let mut pi = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (p, &r) in pi.iter_mut().zip(row) {
                    *p += c * r;
                }
            }
        }
        pi
    }

    pub fn reduced_cost(&self, column: usize, pi: &[f64]) -> f64 {
        self.cost[column] - self.columns[column].iter().map(|&(r, v)| pi[r] * v).sum::<f64>()
    }

    pub fn objective(&self) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, &x)| self.cost[j] * x).sum()
    }

    /// Value of every column variable.
    pub fn primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.columns.len()];
        for (&j, &v) in self.basis.iter().zip(&self.xb) {
            x[j] = v.max(0.0);
        }
        x
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn is_basic(&self, column: usize) -> bool {
        self.position[column].is_some()
    }

    fn direction(&self, column: usize) -> Vec<f64> {
        let m = self.rows;
        let mut d = vec![0.0; m];
        for &(r, v) in &self.columns[column] {
            for (i, di) in d.iter_mut().enumerate() {
                *di += self.binv[i * m + r] * v;
            }
        }
        d
    }

    fn pivot(&mut self, entering: usize, leave_pos: usize, d: &[f64]) -> Result<()> {
        let m = self.rows;
        let piv = d[leave_pos];
        let theta = self.xb[leave_pos] / piv;
        let (head, rest) = self.binv.split_at_mut(leave_pos * m);
        let (prow, tail) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, row) in head.chunks_exact_mut(m).chain(tail.chunks_exact_mut(m)).enumerate() {
            let i = if i < leave_pos { i } else { i + 1 };
            let f = d[i];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i == leave_pos {
                *x = theta;
            } else {
                *x -= theta * d[i];
                if *x < 0.0 && *x > -1e-13 {
                    *x = 0.0;
                }
            }
        }
        let leaving = self.basis[leave_pos];
        self.position[leaving] = None;
        self.position[entering] = Some(leave_pos);
        self.basis[leave_pos] = entering;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Ratio test; `None` means the direction is unbounded. Outside Bland
    /// mode this is the two-pass Harris test, which prefers large pivots among
    /// rows that block within the feasibility tolerance.
    fn leaving(&self, d: &[f64], lexicographic: bool) -> Option<usize> {
        let candidates = || d.iter().enumerate().filter(|(_, &di)| di > PIVOT_TOL);
        if lexicographic {
            // lexicographic rule: among the minimum-ratio rows, smallest
            // (B^-1 row) / d_i; terminates under degeneracy
            let theta = candidates().map(|(i, &di)| self.xb[i].max(0.0) / di).fold(f64::INFINITY, f64::min);
            if !theta.is_finite() {
                return None;
            }
            let m = self.rows;
            let mut tied: Vec<usize> =
                candidates().filter(|(i, &di)| self.xb[*i].max(0.0) / di <= theta + 1e-12).map(|(i, _)| i).collect();
            let largest = tied.iter().map(|&i| d[i]).fold(0.0, f64::max);
            tied.retain(|&i| d[i] >= 1e-3 * largest);
            let lex_less = |a: usize, b: usize| -> bool {
                for k in 0..m {
                    let (va, vb) = (self.binv[a * m + k] / d[a], self.binv[b * m + k] / d[b]);
                    if va < vb - 1e-12 {
                        return true;
                    }
                    if va > vb + 1e-12 {
                        return false;
                    }
                }
                self.basis[a] < self.basis[b]
            };
            let mut best = tied[0];
            for &i in &tied[1..] {
                if lex_less(i, best) {
                    best = i;
                }
            }
            return Some(best);
        }
        let bound = candidates()
            .map(|(i, &di)| (self.xb[i].max(0.0) + FEASIBILITY_TOL) / di)
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        candidates()
            .filter(|(i, &di)| self.xb[*i].max(0.0) / di <= bound)
            .max_by(|l, r| l.1.total_cmp(r.1).then(r.0.cmp(&l.0)))
            .map(|(i, _)| i)
    }

    /// Iterates to optimality over the current columns.
    pub fn optimize(&mut self, max_pivots: usize) -> Result<Status> {
        let m = self.rows;
        let mut degenerate = 0usize;
        let mut pi = self.duals();
        let mut fresh = true;
        let mut pivots = 0;
        let mut original_rhs: Option<Vec<f64>> = None;
        let mut perturbations = 0;
        while pivots < max_pivots {
            if degenerate >= DEGENERATE_BEFORE_PERTURBING && original_rhs.is_none() && perturbations < MAX_PERTURBATIONS {
                original_rhs = Some(self.perturb(perturbations));
                perturbations += 1;
                degenerate = 0;
            }
            let lexicographic = degenerate >= DEGENERATE_BEFORE_LEXICOGRAPHIC;
            // (column, reduced cost, devex score)
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.columns.len() {
                if !self.enterable[j] || self.position[j].is_some() {
                    continue;
                }
                let rc = self.reduced_cost(j, &pi);
                if rc < -OPTIMALITY_TOL {
                    let score = rc * rc / self.weights[j];
                    if entering.map_or(true, |(_, _, best)| score > best) {
                        entering = Some((j, rc, score));
                    }
                }
            }
            let Some((q, rc, _)) = entering else {
                if !fresh {
                    // confirm optimality with exact multipliers
                    pi = self.duals();
                    fresh = true;
                    continue;
                }
                if let Some(rhs) = original_rhs.take() {
                    self.rhs = rhs;
                    self.refactor()?;
                    if self.restore_feasibility(max_pivots - pivots)? != Status::Optimal {
                        return Ok(Status::IterationLimit);
                    }
                    pi = self.duals();
                    degenerate = 0;
                    continue;
                }
                return Ok(Status::Optimal);
            };
            let d = self.direction(q);
            let Some(r) = self.leaving(&d, lexicographic) else {
                return Err(Error::Unbounded);
            };
            if self.xb[r].max(0.0) / d[r] <= 1e-12 {
                degenerate += 1;
                self.degenerate_pivots += 1;
            } else {
                degenerate = 0;
            }
            self.update_weights(q, r, d[r]);
            self.pivot(q, r, &d)?;
            pivots += 1;
            if self.since_refactor == 0 {
                pi = self.duals();
                fresh = true;
            } else {
                for (p, &b) in pi.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *p += rc * b;
                }
                fresh = false;
            }
        }
        Ok(Status::IterationLimit)
    }

    /// Shifts every basic value up by a small deterministic amount and moves
    /// the right-hand side to match; returns the unperturbed right-hand side.
    fn perturb(&mut self, round: usize) -> Vec<f64> {
        let saved = self.rhs.clone();
        let scale = PERTURBATION * (1.0 + self.xb.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
        for (i, x) in self.xb.iter_mut().enumerate() {
            // golden-ratio sequence: spread, reproducible offsets in [1, 2)
            let u = ((i + round * 7919) as f64 * 0.618_033_988_749_895).fract();
            *x = x.max(0.0) + scale * (1.0 + u);
        }
        let mut rhs = vec![0.0; self.rows];
        for (&j, &x) in self.basis.iter().zip(&self.xb) {
            for &(r, v) in &self.columns[j] {
                rhs[r] += v * x;
            }
        }
        self.rhs = rhs;
        saved
    }

    fn update_weights(&mut self, entering: usize, leave_pos: usize, alpha_q: f64) {
        let m = self.rows;
        let row = &self.binv[leave_pos * m..(leave_pos + 1) * m];
        let wq = self.weights[entering];
        for j in 0..self.columns.len() {
            if j == entering || self.position[j].is_some() || !self.enterable[j] {
                continue;
            }
            let alpha: f64 = self.columns[j].iter().map(|&(i, v)| row[i] * v).sum();
            if alpha != 0.0 {
                let ratio = alpha / alpha_q;
                let w = ratio * ratio * wq;
                if w > self.weights[j] {
                    self.weights[j] = w;
                }
            }
        }
        let leaving = self.basis[leave_pos];
        self.weights[leaving] = (wq / (alpha_q * alpha_q)).max(1.0);
    }

    /// Replaces the right-hand side, keeping the basis. The basis stays dual
    /// feasible, so [`Self::restore_feasibility`] can repair it.
    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.rows {
            return Err(Error::Dimension("right-hand side length differs from the row count".into()));
        }
        self.rhs = rhs;
        self.refactor()
    }

    /// Dual simplex from a dual-feasible basis until the basic solution is
    /// nonnegative.
    pub fn restore_feasibility(&mut self, max_pivots: usize) -> Result<Status> {
        let m = self.rows;
        let mut degenerate = 0usize;
        for _ in 0..max_pivots {
            let bland = degenerate >= DEGENERATE_BEFORE_PERTURBING;
            let mut leave: Option<usize> = None;
            for (i, &x) in self.xb.iter().enumerate() {
                if x < -FEASIBILITY_TOL {
                    let better = match leave {
                        None => true,
                        Some(l) if bland => self.basis[i] < self.basis[l],
                        Some(l) => x < self.xb[l],
                    };
                    if better {
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(Status::Optimal);
            };
            let pi = self.duals();
            let row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            // (column, ratio, |alpha|)
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.columns.len() {
                if !self.enterable[j] || self.position[j].is_some() {
                    continue;
                }
                let alpha: f64 = self.columns[j].iter().map(|&(i, v)| row[i] * v).sum();
                if alpha < -PIVOT_TOL {
                    let ratio = self.reduced_cost(j, &pi).max(0.0) / -alpha;
                    let better = match entering {
                        None => true,
                        Some((_, best, size)) => {
                            ratio < best - 1e-12 || (!bland && ratio <= best + 1e-12 && -alpha > size)
                        }
                    };
                    if better {
                        entering = Some((j, ratio, -alpha));
                    }
                }
            }
            let Some((q, ratio, _)) = entering else {
                return Err(Error::Infeasible);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let d = self.direction(q);
            self.pivot(q, r, &d)?;
        }
        Ok(Status::IterationLimit)
    }

    /// Drives zero-level basic columns in `forbidden` out of the basis where a
    /// replacement pivot exists.
    fn evict(&mut self, forbidden: &[bool]) -> Result<()> {
        let m = self.rows;
        for pos in 0..m {
            let j = self.basis[pos];
            if !forbidden[j] {
                continue;
            }
            let row: Vec<f64> = self.binv[pos * m..(pos + 1) * m].to_vec();
            let replacement = (0..self.columns.len()).find(|&k| {
                !forbidden[k]
                    && self.position[k].is_none()
                    && self.columns[k].iter().map(|&(r, v)| row[r] * v).sum::<f64>().abs() > 1e-7
            });
            if let Some(k) = replacement {
                let d = self.direction(k);
                self.pivot(k, pos, &d)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `maximize objective.x` subject to the constraints and `x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

impl LinearProgram {
    /// Two-phase solve.
    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.objective.len();
        let rows = self.constraints.len();
        if self.constraints.iter().any(|c| c.coefficients.len() != n) {
            return Err(Error::Dimension("constraint width differs from objective".into()));
        }
        let sign: Vec<f64> = self.constraints.iter().map(|c| if c.rhs < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut lp = RevisedSimplex::new(self.constraints.iter().zip(&sign).map(|(c, s)| c.rhs * s).collect());
        for j in 0..n {
            let col = self
                .constraints
                .iter()
                .zip(&sign)
                .enumerate()
                .filter(|(_, (c, _))| c.coefficients[j] != 0.0)
                .map(|(i, (c, s))| (i, c.coefficients[j] * s))
                .collect();
            lp.add_column(col, 0.0);
        }
        let mut basis = vec![usize::MAX; rows];
        for (i, (c, s)) in self.constraints.iter().zip(&sign).enumerate() {
            let slack = match c.sense {
                Sense::Le => 1.0,
                Sense::Ge => -1.0,
                Sense::Eq => continue,
            };
            let k = lp.add_column(vec![(i, slack * s)], 0.0);
            if slack * s > 0.0 {
                basis[i] = k;
            }
        }
        let mut artificial = vec![false; lp.column_count()];
        for (i, b) in basis.iter_mut().enumerate() {
            if *b == usize::MAX {
                *b = lp.add_column(vec![(i, 1.0)], 1.0);
                artificial.push(true);
            }
        }
        lp.set_basis(basis)?;
        let limit = 50 * (rows + lp.column_count()) + 1000;
        if lp.optimize(limit)? != Status::Optimal {
            return Err(Error::Invariant("phase one hit the pivot limit".into()));
        }
        if lp.objective() > FEASIBILITY_TOL * (1.0 + rows as f64) {
            return Err(Error::Infeasible);
        }
        for (j, &a) in artificial.iter().enumerate() {
            lp.set_cost(j, if a { 0.0 } else if j < n { -self.objective[j] } else { 0.0 });
            if a {
                lp.set_enterable(j, false);
            }
        }
        lp.evict(&artificial)?;
        if lp.optimize(limit)? != Status::Optimal {
            return Err(Error::Invariant("phase two hit the pivot limit".into()));
        }
        let x = lp.primal()[..n].to_vec();
        Ok(LpSolution { value: -lp.objective(), x })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(coefficients: Vec<f64>, rhs: f64) -> Constraint {
        Constraint { coefficients, sense: Sense::Le, rhs }
    }

    #[test]
    fn small_maximization() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3
        let lp = LinearProgram {
            objective: vec![3.0, 2.0],
            constraints: vec![le(vec![1.0, 1.0], 4.0), le(vec![1.0, 3.0], 6.0), le(vec![1.0, 0.0], 3.0)],
        };
        let s = lp.solve().unwrap();
        assert!((s.value - 11.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_one_with_equalities_and_ge() {
        // max -x - y, x + y = 2, x - y >= -1 (i.e. y <= x + 1), x <= 1.5
        let lp = LinearProgram {
            objective: vec![-1.0, -1.0],
            constraints: vec![
                Constraint { coefficients: vec![1.0, 1.0], sense: Sense::Eq, rhs: 2.0 },
                Constraint { coefficients: vec![1.0, -1.0], sense: Sense::Ge, rhs: -1.0 },
                le(vec![1.0, 0.0], 1.5),
            ],
        };
        assert!((lp.solve().unwrap().value + 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let infeasible = LinearProgram {
            objective: vec![1.0],
            constraints: vec![
                le(vec![1.0], 1.0),
                Constraint { coefficients: vec![1.0], sense: Sense::Ge, rhs: 2.0 },
            ],
        };
        assert!(matches!(infeasible.solve(), Err(Error::Infeasible)));
        let unbounded = LinearProgram { objective: vec![1.0, 0.0], constraints: vec![le(vec![-1.0, 1.0], 1.0)] };
        assert!(matches!(unbounded.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram {
            objective: vec![1.0, 1.0],
            constraints: vec![
                Constraint { coefficients: vec![1.0, 1.0], sense: Sense::Eq, rhs: 1.0 },
                Constraint { coefficients: vec![2.0, 2.0], sense: Sense::Eq, rhs: 2.0 },
            ],
        };
        assert!((lp.solve().unwrap().value - 1.0).abs() < 1e-12);
    }
}
