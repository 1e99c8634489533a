//! Linear programming: a dense revised simplex with an explicit basis inverse.
//!
//! Columns are stored sparsely. The [`Simplex`] object keeps its basis
//! between calls, so columns can be appended and costs changed, and the next
//! solve restarts from the previous optimal basis.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 60;
const DEGENERATE_SWITCH: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min c·x` subject to rows, `0 ≤ x ≤ u`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub costs: Vec<f64>,
    pub upper: Vec<Option<f64>>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            costs: vec![0.0; n_vars],
            upper: vec![None; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.costs.len()
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.costs.push(cost);
        self.upper.push(None);
        self.costs.len() - 1
    }

    pub fn add_row(&mut self, coefs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.rows.push(Row { coefs, relation, rhs });
        self.rows.len() - 1
    }

    fn check(&self) -> Result<()> {
        if self.upper.len() != self.costs.len() {
            return Err(Error::Input("upper bound vector length mismatch".into()));
        }
        if self.costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("non-finite cost".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(Error::Input(format!("row {r} has non-finite rhs")));
            }
            for &(j, a) in &row.coefs {
                if j >= self.costs.len() {
                    return Err(Error::Input(format!("row {r} references variable {j}")));
                }
                if !a.is_finite() {
                    return Err(Error::Input(format!("row {r} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }

    /// Fixed-point text in CPLEX LP format.
    pub fn to_lp_format(&self) -> String {
        fn term(out: &mut String, first: &mut bool, coef: f64, name: &str) {
            if coef >= 0.0 {
                if !*first {
                    out.push_str(" + ");
                }
                let _ = write!(out, "{coef:.9} {name}");
            } else {
                out.push_str(if *first { "- " } else { " - " });
                let _ = write!(out, "{:.9} {name}", -coef);
            }
            *first = false;
        }
        let mut out = String::from("Minimize\n obj: ");
        let mut first = true;
        for (j, &c) in self.costs.iter().enumerate() {
            if c != 0.0 {
                term(&mut out, &mut first, c, &format!("x{j}"));
            }
        }
        if first {
            out.push_str("0 x0");
        }
        out.push_str("\nSubject To\n");
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{r}: ");
            let mut first = true;
            for &(j, a) in &row.coefs {
                term(&mut out, &mut first, a, &format!("x{j}"));
            }
            if first {
                out.push_str("0 x0");
            }
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Ge => ">=",
                Relation::Eq => "=",
            };
            let _ = writeln!(out, " {rel} {:.9}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, u) in self.upper.iter().enumerate() {
            match u {
                Some(u) => {
                    let _ = writeln!(out, " 0 <= x{j} <= {u:.9}");
                }
                None => {
                    let _ = writeln!(out, " x{j} >= 0");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    /// One dual value per row: `≤` rows give values `≤ 0`, `≥` rows `≥ 0`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves `p` from scratch.
pub fn solve_lp(p: &LinearProgram) -> Result<LpResult> {
    let mut s = Simplex::new(p)?;
    Ok(s.solve())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Structural,
    Slack,
    Artificial,
}

/// Revised simplex with a persistent basis.
#[derive(Clone, Debug)]
pub struct Simplex {
    m: usize,
    n_user_rows: usize,
    cols: Vec<Vec<(u32, f64)>>,
    cost: Vec<f64>,
    kind: Vec<Kind>,
    structural: Vec<usize>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    phase_one_done: bool,
    since_refactor: usize,
    iterations: usize,
}

impl Simplex {
    pub fn new(p: &LinearProgram) -> Result<Self> {
        p.check()?;
        let mut rows: Vec<Row> = p.rows.clone();
        let n_user_rows = rows.len();
        for (j, u) in p.upper.iter().enumerate() {
            if let Some(u) = *u {
                rows.push(Row {
                    coefs: vec![(j, 1.0)],
                    relation: Relation::Le,
                    rhs: u,
                });
            }
        }
        let m = rows.len();
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); p.n_vars()];
        let mut row_sign = vec![1.0; m];
        let mut b = vec![0.0; m];
        for (r, row) in rows.iter_mut().enumerate() {
            if row.rhs < 0.0 {
                row_sign[r] = -1.0;
                row.rhs = -row.rhs;
                row.relation = match row.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            b[r] = row.rhs;
            for &(j, a) in &row.coefs {
                if a != 0.0 {
                    cols[j].push((r as u32, a * row_sign[r]));
                }
            }
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|e| e.0);
            // Merge repeated entries for the same row.
            let mut merged: Vec<(u32, f64)> = Vec::with_capacity(c.len());
            for &(r, a) in c.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += a,
                    _ => merged.push((r, a)),
                }
            }
            *c = merged;
        }
        let mut cost = p.costs.clone();
        let mut kind = vec![Kind::Structural; p.n_vars()];
        let structural: Vec<usize> = (0..p.n_vars()).collect();
        let mut basis = vec![usize::MAX; m];
        for (r, row) in rows.iter().enumerate() {
            match row.relation {
                Relation::Le => {
                    cols.push(vec![(r as u32, 1.0)]);
                    cost.push(0.0);
                    kind.push(Kind::Slack);
                    basis[r] = cols.len() - 1;
                }
                Relation::Ge => {
                    cols.push(vec![(r as u32, -1.0)]);
                    cost.push(0.0);
                    kind.push(Kind::Slack);
                }
                Relation::Eq => {}
            }
        }
        for r in 0..m {
            if basis[r] == usize::MAX {
                cols.push(vec![(r as u32, 1.0)]);
                cost.push(0.0);
                kind.push(Kind::Artificial);
                basis[r] = cols.len() - 1;
            }
        }
        let mut in_basis = vec![false; cols.len()];
        for &j in &basis {
            in_basis[j] = true;
        }
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = 1.0;
        }
        let phase_one_done = !kind.contains(&Kind::Artificial);
        Ok(Self {
            m,
            n_user_rows,
            cols,
            cost,
            kind,
            structural,
            xb: b.clone(),
            b,
            row_sign,
            basis,
            in_basis,
            binv,
            phase_one_done,
            since_refactor: 0,
            iterations: 0,
        })
    }

    pub fn n_structural(&self) -> usize {
        self.structural.len()
    }

    /// Appends a structural column; `coefs` index the user rows.
    pub fn add_column(&mut self, cost: f64, coefs: &[(usize, f64)]) -> usize {
        let mut col: Vec<(u32, f64)> = coefs
            .iter()
            .filter(|e| e.1 != 0.0)
            .map(|&(r, a)| {
                assert!(r < self.n_user_rows, "column references unknown row {r}");
                (r as u32, a * self.row_sign[r])
            })
            .collect();
        col.sort_by_key(|e| e.0);
        col.dedup_by(|later, first| {
            let same = later.0 == first.0;
            if same {
                first.1 += later.1;
            }
            same
        });
        self.cols.push(col);
        self.cost.push(cost);
        self.kind.push(Kind::Structural);
        self.in_basis.push(false);
        self.structural.push(self.cols.len() - 1);
        self.structural.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        let j = self.structural[var];
        self.cost[j] = cost;
    }

    fn phase_cost(&self, j: usize, phase: u8) -> f64 {
        if phase == 1 {
            if self.kind[j] == Kind::Artificial {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    fn refactor(&mut self) {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r as usize * m + k] += v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for r in 0..m {
            inv[r * m + r] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            for r in c + 1..m {
                if a[r * m + c].abs() > a[piv * m + c].abs() {
                    piv = r;
                }
            }
            assert!(a[piv * m + c].abs() > 1e-13, "singular basis during refactorization");
            if piv != c {
                for k in 0..m {
                    a.swap(piv * m + k, c * m + k);
                    inv.swap(piv * m + k, c * m + k);
                }
            }
            let p = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            self.xb[r] = row.iter().zip(&self.b).map(|(x, y)| x * y).sum();
        }
        self.since_refactor = 0;
    }

    fn duals_for(&self, phase: u8) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.phase_cost(j, phase);
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    #[inline]
    fn reduced_cost(&self, j: usize, y: &[f64], phase: u8) -> f64 {
        let mut d = self.phase_cost(j, phase);
        for &(r, a) in &self.cols[j] {
            d -= y[r as usize] * a;
        }
        d
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            let r = r as usize;
            for i in 0..m {
                alpha[i] += self.binv[i * m + r] * a;
            }
        }
        alpha
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let pr = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        self.xb[r] /= pr;
        let (xr, row_r): (f64, Vec<f64>) = (self.xb[r], self.binv[r * m..(r + 1) * m].to_vec());
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                let row = &mut self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    row[k] -= f * row_r[k];
                }
                self.xb[i] -= f * xr;
            }
        }
        let old = self.basis[r];
        self.in_basis[old] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Runs simplex iterations for `phase`. Returns false if unbounded.
    fn run(&mut self, phase: u8) -> bool {
        let mut degenerate = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let bland = degenerate >= DEGENERATE_SWITCH;
            let y = self.duals_for(phase);
            let mut enter = None;
            let mut best = -OPT_TOL;
            for j in 0..self.cols.len() {
                if self.in_basis[j] || (phase == 2 && self.kind[j] == Kind::Artificial) {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase);
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                return true;
            };
            let alpha = self.ftran(q);
            let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            let ptol = PIVOT_TOL * (1.0 + amax);
            // Harris two-pass test: bound the step with relaxed feasibility,
            // then take the largest pivot among the candidates within it.
            let is_art = |i: usize| phase == 2 && self.kind[self.basis[i]] == Kind::Artificial;
            let mut bound = f64::INFINITY;
            for i in 0..self.m {
                let a = alpha[i];
                if is_art(i) && a.abs() > ptol {
                    bound = 0.0;
                } else if a > ptol {
                    bound = bound.min((self.xb[i].max(0.0) + FEAS_TOL) / a);
                }
            }
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..self.m {
                let a = alpha[i];
                let ratio = if is_art(i) && a.abs() > ptol {
                    0.0
                } else if a > ptol {
                    self.xb[i].max(0.0) / a
                } else {
                    continue;
                };
                if ratio > bound {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(l) => {
                        if bland {
                            ratio < theta - 1e-12 || (ratio <= theta + 1e-12 && self.basis[i] < self.basis[l])
                        } else {
                            a.abs() > alpha[l].abs()
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    theta = ratio;
                }
            }
            let Some(r) = leave else {
                return false;
            };
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, q, &alpha);
        }
    }

    /// Optimizes from the current basis.
    pub fn solve(&mut self) -> LpResult {
        self.refactor();
        if !self.phase_one_done {
            self.run(1);
            self.refactor();
            let infeas: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&j, _)| self.kind[j] == Kind::Artificial)
                .map(|(_, &x)| x.max(0.0))
                .sum();
            if infeas > FEAS_TOL * (1.0 + self.b.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return self.result(LpStatus::Infeasible);
            }
            self.phase_one_done = true;
        }
        let bounded = self.run(2);
        self.refactor();
        if !bounded {
            return self.result(LpStatus::Unbounded);
        }
        let res = self.result(LpStatus::Optimal);
        #[cfg(debug_assertions)]
        self.debug_certify(&res);
        res
    }

    fn result(&self, status: LpStatus) -> LpResult {
        let mut xfull = vec![0.0; self.cols.len()];
        for (k, &j) in self.basis.iter().enumerate() {
            xfull[j] = self.xb[k].max(0.0);
        }
        let x: Vec<f64> = self.structural.iter().map(|&j| xfull[j]).collect();
        let objective = self.structural.iter().map(|&j| self.cost[j] * xfull[j]).sum();
        let y = self.duals_for(2);
        let duals = (0..self.n_user_rows).map(|r| y[r] * self.row_sign[r]).collect();
        LpResult {
            status,
            x,
            duals,
            objective,
            iterations: self.iterations,
        }
    }

    #[cfg(debug_assertions)]
    fn debug_certify(&self, res: &LpResult) {
        let y = self.duals_for(2);
        let scale = 1.0 + res.objective.abs();
        let dual_obj: f64 = y.iter().zip(&self.b).map(|(a, b)| a * b).sum();
        debug_assert!(
            (dual_obj - res.objective).abs() <= 1e-6 * scale,
            "duality gap {} vs {}",
            dual_obj,
            res.objective
        );
        let mut lhs = vec![0.0; self.m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                lhs[r as usize] += a * self.xb[k];
            }
        }
        for r in 0..self.m {
            debug_assert!((lhs[r] - self.b[r]).abs() <= 1e-6 * (1.0 + self.b[r].abs()), "row {r} residual");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_row() {
        let mut p = LinearProgram::new(1);
        p.costs[0] = 1.0;
        p.add_row(vec![(0, 1.0)], Relation::Ge, 3.0);
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-9);
        assert!((r.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bound_row() {
        let mut p = LinearProgram::new(1);
        p.costs[0] = -1.0;
        p.add_row(vec![(0, 1.0)], Relation::Le, 5.0);
        let r = solve_lp(&p).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 5.0).abs() < 1e-9);
        assert!((r.duals[0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded() {
        let mut p = LinearProgram::new(1);
        p.costs[0] = -1.0;
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible() {
        let mut p = LinearProgram::new(1);
        p.add_row(vec![(0, 1.0)], Relation::Le, 1.0);
        p.add_row(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut p = LinearProgram::new(1);
        p.add_row(vec![(3, 1.0)], Relation::Le, 1.0);
        assert!(solve_lp(&p).is_err());
    }

    #[test]
    fn classic_two_variable_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 -> (2, 6), 36.
        let mut p = LinearProgram::new(2);
        p.costs = vec![-3.0, -5.0];
        p.add_row(vec![(0, 1.0)], Relation::Le, 4.0);
        p.add_row(vec![(1, 2.0)], Relation::Le, 12.0);
        p.add_row(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let r = solve_lp(&p).unwrap();
        assert!((r.objective + 36.0).abs() < 1e-9);
        assert!((r.x[0] - 2.0).abs() < 1e-9 && (r.x[1] - 6.0).abs() < 1e-9);
        let dual_obj: f64 = r.duals.iter().zip([4.0, 12.0, 18.0]).map(|(a, b)| a * b).sum();
        assert!((dual_obj - r.objective).abs() < 1e-9);
    }

    #[test]
    fn equality_with_negative_rhs_and_warm_column() {
        // min x + y, x - y = -2 -> y = 2.
        let mut p = LinearProgram::new(2);
        p.costs = vec![1.0, 1.0];
        p.add_row(vec![(0, 1.0), (1, -1.0)], Relation::Eq, -2.0);
        let mut s = Simplex::new(&p).unwrap();
        let r = s.solve();
        assert!((r.objective - 2.0).abs() < 1e-9);
        // A new column z with -z in the row and cost 0.5 is cheaper than y.
        s.add_column(0.5, &[(0, -1.0)]);
        let r = s.solve();
        assert!((r.objective - 1.0).abs() < 1e-9);
        assert!((r.x[2] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn repeated_row_entries_are_summed() {
        // min x, 2x ≥ 3 given as two entries of 1 -> x = 1.5, and again after refactoring.
        let mut p = LinearProgram::new(0);
        p.add_row(vec![], Relation::Ge, 3.0);
        let mut s = Simplex::new(&p).unwrap();
        s.add_column(1.0, &[(0, 1.0), (0, 1.0)]);
        for _ in 0..2 {
            let r = s.solve();
            assert_eq!(r.status, LpStatus::Optimal);
            assert!((r.x[0] - 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn export_mentions_all_rows() {
        let mut p = LinearProgram::new(2);
        p.costs = vec![1.0, -2.0];
        p.upper[1] = Some(3.0);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Ge, 1.0);
        let text = p.to_lp_format();
        assert!(text.contains("c0: 1.000000000 x0 + 1.000000000 x1 >= 1.000000000"));
        assert!(text.contains("0 <= x1 <= 3.000000000"));
    }
}
