//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Problems are stated as
//!
//! ```text
//! maximize  cᵀz
//! s.t.      G z ≤ h
//!           E z = e
//!           l ≤ z ≤ u      (either side optional)
//! ```
//!
//! and converted to standard form (nonnegative variables, one slack or
//! artificial column per row). Everything here is tiny, so the tableau is a
//! plain `Vec<Vec<f64>>` and pivots are exhaustive row operations.

use serde::Serialize;

use crate::linalg::dot;

/// Minimum magnitude of an acceptable pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
/// Constraint tolerance used when accepting a solution.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    inequality: Vec<Vec<f64>>,
    inequality_rhs: Vec<f64>,
    equality: Vec<Vec<f64>>,
    equality_rhs: Vec<f64>,
    lower: Vec<Option<f64>>,
    upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// `num_vars` variables with zero objective and `z ≥ 0`.
    pub fn new(num_vars: usize) -> LinearProgram {
        LinearProgram {
            objective: vec![0.0; num_vars],
            inequality: Vec::new(),
            inequality_rhs: Vec::new(),
            equality: Vec::new(),
            equality_rhs: Vec::new(),
            lower: vec![Some(0.0); num_vars],
            upper: vec![None; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn maximize(mut self, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), self.num_vars(), "objective length");
        self.objective = c;
        self
    }

    pub fn set_objective(&mut self, var: usize, c: f64) {
        self.objective[var] = c;
    }

    /// Adds `row · z ≤ rhs`.
    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars(), "constraint length");
        self.inequality.push(row);
        self.inequality_rhs.push(rhs);
    }

    /// Adds `row · z ≥ rhs`, stored as `−row · z ≤ −rhs`.
    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        assert_eq!(row.len(), self.num_vars(), "constraint length");
        self.equality.push(row);
        self.equality_rhs.push(rhs);
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, None, None);
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn inequalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.inequality.iter().map(Vec::as_slice).zip(self.inequality_rhs.iter().copied())
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.equality.iter().map(Vec::as_slice).zip(self.equality_rhs.iter().copied())
    }

    pub fn bounds(&self, var: usize) -> (Option<f64>, Option<f64>) {
        (self.lower[var], self.upper[var])
    }

    pub fn num_inequalities(&self) -> usize {
        self.inequality.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equality.len()
    }

    /// Largest violation of any constraint or bound at `z`.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, rhs) in self.inequalities() {
            worst = worst.max(dot(row, z) - rhs);
        }
        for (row, rhs) in self.equalities() {
            worst = worst.max((dot(row, z) - rhs).abs());
        }
        for (v, &zv) in z.iter().enumerate() {
            if let Some(l) = self.lower[v] {
                worst = worst.max(l - zv);
            }
            if let Some(u) = self.upper[v] {
                worst = worst.max(zv - u);
            }
        }
        worst
    }

    fn scale(&self) -> f64 {
        let rows = self.inequality.iter().chain(&self.equality).flatten();
        let rhs = self.inequality_rhs.iter().chain(&self.equality_rhs);
        rows.chain(rhs).fold(1.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot limit reached or the final basis failed its own checks.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Optimal point; empty unless `status == Optimal`.
    pub solution: Vec<f64>,
    pub value: f64,
    /// One dual per inequality row (nonnegative) followed by one per
    /// equality row; empty unless optimal.
    pub dual_values: Vec<f64>,
    /// Dual objective including bound multipliers.
    pub dual_value: f64,
    pub pivots: usize,
}

impl LpOutcome {
    fn without_solution(status: LpStatus, pivots: usize) -> LpOutcome {
        LpOutcome {
            status,
            solution: Vec::new(),
            value: f64::NAN,
            dual_values: Vec::new(),
            dual_value: f64::NAN,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(lp: &LinearProgram) -> LpOutcome {
    let sf = StandardForm::build(lp);
    let mut tab = Tableau::new(&sf);
    let pivot_limit = 200 * (tab.m + tab.ncols) + 1000;

    if let Some(status) = tab.run_phase_one(pivot_limit) {
        return LpOutcome::without_solution(status, tab.pivots);
    }
    let feas_tol = FEASIBILITY_TOL * lp.scale();
    if tab.objective_value() < -feas_tol {
        return LpOutcome::without_solution(LpStatus::Infeasible, tab.pivots);
    }
    tab.evict_artificials();
    tab.load_cost(&sf.cost);
    if let Some(status) = tab.run(pivot_limit, false) {
        return LpOutcome::without_solution(status, tab.pivots);
    }

    let zs = tab.structural_values(sf.n_struct);
    let solution = sf.recover(&zs);
    if lp.max_violation(&solution) > feas_tol {
        return LpOutcome::without_solution(LpStatus::NumericalFailure, tab.pivots);
    }
    let row_duals = tab.row_duals();
    let dual_value = dot(&row_duals, &sf.rhs) + sf.cost_offset;
    let mut dual_values = vec![0.0; lp.num_inequalities() + lp.num_equalities()];
    for (r, origin) in sf.origin.iter().enumerate() {
        match *origin {
            RowOrigin::Inequality(k) => dual_values[k] = row_duals[r],
            RowOrigin::Equality(k) => dual_values[lp.num_inequalities() + k] = row_duals[r],
            RowOrigin::Bound => {}
        }
    }
    LpOutcome {
        status: LpStatus::Optimal,
        value: dot(&lp.objective, &solution),
        solution,
        dual_values,
        dual_value,
        pivots: tab.pivots,
    }
}

/// Any feasible point (the phase-one auxiliary with a zero objective).
pub fn find_feasible(lp: &LinearProgram) -> LpOutcome {
    let zeroed = lp.clone().maximize(vec![0.0; lp.num_vars()]);
    solve_lp(&zeroed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowOrigin {
    Inequality(usize),
    Equality(usize),
    Bound,
}

/// `z_v = offset + Σ coef · z'_col` with every `z'` nonnegative.
#[derive(Debug, Clone)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    n_struct: usize,
    vars: Vec<VarMap>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
    origin: Vec<RowOrigin>,
    cost: Vec<f64>,
    cost_offset: f64,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> StandardForm {
        let mut vars = Vec::with_capacity(lp.num_vars());
        let mut n_struct = 0;
        let mut bound_rows = Vec::new();
        for v in 0..lp.num_vars() {
            let map = match (lp.lower[v], lp.upper[v]) {
                (Some(l), u) => {
                    if let Some(u) = u {
                        bound_rows.push((n_struct, u - l));
                    }
                    n_struct += 1;
                    VarMap { offset: l, cols: vec![(n_struct - 1, 1.0)] }
                }
                (None, Some(u)) => {
                    n_struct += 1;
                    VarMap { offset: u, cols: vec![(n_struct - 1, -1.0)] }
                }
                (None, None) => {
                    n_struct += 2;
                    VarMap { offset: 0.0, cols: vec![(n_struct - 2, 1.0), (n_struct - 1, -1.0)] }
                }
            };
            vars.push(map);
        }

        let lift = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
            let mut out = vec![0.0; n_struct];
            let mut shifted = rhs;
            for (v, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                shifted -= a * vars[v].offset;
                for &(col, coef) in &vars[v].cols {
                    out[col] += a * coef;
                }
            }
            (out, shifted)
        };

        let mut sf_rows = Vec::new();
        let mut rhs = Vec::new();
        let mut kinds = Vec::new();
        let mut origin = Vec::new();
        for (k, (row, h)) in lp.inequalities().enumerate() {
            let (r, b) = lift(row, h);
            sf_rows.push(r);
            rhs.push(b);
            kinds.push(RowKind::Le);
            origin.push(RowOrigin::Inequality(k));
        }
        for (k, (row, e)) in lp.equalities().enumerate() {
            let (r, b) = lift(row, e);
            sf_rows.push(r);
            rhs.push(b);
            kinds.push(RowKind::Eq);
            origin.push(RowOrigin::Equality(k));
        }
        for (col, width) in bound_rows {
            let mut r = vec![0.0; n_struct];
            r[col] = 1.0;
            sf_rows.push(r);
            rhs.push(width);
            kinds.push(RowKind::Le);
            origin.push(RowOrigin::Bound);
        }

        let (cost, cost_offset) = {
            let mut c = vec![0.0; n_struct];
            let mut off = 0.0;
            for (v, &cv) in lp.objective.iter().enumerate() {
                off += cv * vars[v].offset;
                for &(col, coef) in &vars[v].cols {
                    c[col] += cv * coef;
                }
            }
            (c, off)
        };

        StandardForm { n_struct, vars, rows: sf_rows, rhs, kinds, origin, cost, cost_offset }
    }

    fn recover(&self, zs: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .map(|m| m.offset + m.cols.iter().map(|&(c, coef)| coef * zs[c]).sum::<f64>())
            .collect()
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Identity column of each row (slack or artificial).
    ident: Vec<usize>,
    /// `+1` or `−1`: the factor applied to the row to make its rhs nonnegative.
    sign: Vec<f64>,
    art_start: usize,
    pivots: usize,
}

impl Tableau {
    fn new(sf: &StandardForm) -> Tableau {
        let m = sf.rows.len();
        let n_slack = sf.kinds.iter().filter(|k| **k == RowKind::Le).count();
        let sign: Vec<f64> = sf.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
        let n_art = (0..m).filter(|&r| sf.kinds[r] == RowKind::Eq || sign[r] < 0.0).count();
        let art_start = sf.n_struct + n_slack;
        let ncols = art_start + n_art;

        let mut t = vec![vec![0.0; ncols + 1]; m + 1];
        let mut ident = vec![0; m];
        let (mut next_slack, mut next_art) = (sf.n_struct, art_start);
        for r in 0..m {
            let s = sign[r];
            for (c, &a) in sf.rows[r].iter().enumerate() {
                t[r][c] = s * a;
            }
            t[r][ncols] = s * sf.rhs[r];
            if sf.kinds[r] == RowKind::Le {
                t[r][next_slack] = s;
                if s > 0.0 {
                    ident[r] = next_slack;
                }
                next_slack += 1;
            }
            if sf.kinds[r] == RowKind::Eq || s < 0.0 {
                t[r][next_art] = 1.0;
                ident[r] = next_art;
                next_art += 1;
            }
        }
        Tableau { m, ncols, t, basis: ident.clone(), ident, sign, art_start, pivots: 0 }
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.art_start
    }

    /// Phase one maximizes `−Σ artificials`.
    fn run_phase_one(&mut self, pivot_limit: usize) -> Option<LpStatus> {
        let cost: Vec<f64> = (0..self.ncols).map(|c| if self.is_artificial(c) { -1.0 } else { 0.0 }).collect();
        self.set_objective_row(&cost);
        match self.run(pivot_limit, true) {
            Some(LpStatus::Unbounded) => Some(LpStatus::NumericalFailure),
            other => other,
        }
    }

    fn load_cost(&mut self, structural_cost: &[f64]) {
        let mut cost = vec![0.0; self.ncols];
        cost[..structural_cost.len()].copy_from_slice(structural_cost);
        self.set_objective_row(&cost);
    }

    /// Objective row holds `c_B B⁻¹ A_j − c_j`, and `c_B B⁻¹ b` in the rhs slot.
    fn set_objective_row(&mut self, cost: &[f64]) {
        let mut obj = vec![0.0; self.ncols + 1];
        for (c, o) in obj.iter_mut().take(self.ncols).enumerate() {
            *o = -cost[c];
        }
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (o, a) in obj.iter_mut().zip(&self.t[r]) {
                    *o += cb * a;
                }
            }
        }
        self.t[self.m] = obj;
    }

    fn objective_value(&self) -> f64 {
        self.t[self.m][self.ncols]
    }

    /// Bland's rule: lowest-index improving column, lowest-index leaving
    /// variable among ratio ties.
    fn run(&mut self, pivot_limit: usize, allow_artificial: bool) -> Option<LpStatus> {
        loop {
            let obj = &self.t[self.m];
            let entering = (0..self.ncols)
                .filter(|&c| allow_artificial || !self.is_artificial(c))
                .find(|&c| obj[c] < -PIVOT_TOL);
            let Some(col) = entering else {
                return None;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.t[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.t[r][self.ncols] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Some(LpStatus::Unbounded);
            };
            if self.pivots >= pivot_limit {
                return Some(LpStatus::NumericalFailure);
            }
            self.pivot(row, col);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Pivots zero-level artificials out of the basis where a structural or
    /// slack column allows it; rows with no such column are redundant.
    fn evict_artificials(&mut self) {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let best = (0..self.art_start)
                .map(|c| (c, self.t[r][c].abs()))
                .filter(|&(_, a)| a > PIVOT_TOL)
                .fold(None, |acc: Option<(usize, f64)>, cur| match acc {
                    Some(a) if a.1 >= cur.1 => Some(a),
                    _ => Some(cur),
                });
            if let Some((c, _)) = best {
                self.pivot(r, c);
            }
        }
    }

    fn structural_values(&self, n_struct: usize) -> Vec<f64> {
        let mut z = vec![0.0; n_struct];
        for r in 0..self.m {
            if self.basis[r] < n_struct {
                z[self.basis[r]] = self.t[r][self.ncols];
            }
        }
        z
    }

    /// Duals of the standard-form rows in their original orientation.
    /// The identity column of each row has zero phase-two cost, so its
    /// reduced cost is the dual of the (sign-normalized) row.
    fn row_duals(&self) -> Vec<f64> {
        (0..self.m).map(|r| self.sign[r] * self.t[self.m][self.ident[r]]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_maximum() {
        let mut lp = LinearProgram::new(2).maximize(vec![1.0, 1.0]);
        lp.add_le(vec![1.0, 0.0], 1.0);
        lp.add_le(vec![0.0, 1.0], 1.0);
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.solution, vec![1.0, 1.0]);
        assert_eq!(out.value, 2.0);
        assert_eq!(out.dual_values, vec![1.0, 1.0]);
        assert!((out.dual_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray() {
        let lp = LinearProgram::new(1).maximize(vec![1.0]);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn feasible_point_on_simplex() {
        let mut lp = LinearProgram::new(2);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        let out = find_feasible(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!(lp.max_violation(&out.solution) <= 1e-12);
        assert!(out.solution.iter().any(|&v| v == 1.0), "expected a vertex, got {:?}", out.solution);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.add_le(vec![1.0], -1.0);
        assert_eq!(find_feasible(&lp).status, LpStatus::Infeasible);
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, Some(2.0), Some(1.0));
        assert_eq!(find_feasible(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min |z − 3| over z ∈ [−5, 2], written as max −t with t ≥ ±(z − 3).
        let mut lp = LinearProgram::new(2).maximize(vec![0.0, -1.0]);
        lp.set_bounds(0, Some(-5.0), Some(2.0));
        lp.set_free(1);
        lp.add_le(vec![1.0, -1.0], 3.0);
        lp.add_le(vec![-1.0, -1.0], -3.0);
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.solution[0] - 2.0).abs() < 1e-12);
        assert!((out.value + 1.0).abs() < 1e-12);
        assert!((out.dual_value - out.value).abs() < 1e-12);
    }

    #[test]
    fn upper_bound_only() {
        let mut lp = LinearProgram::new(1).maximize(vec![1.0]);
        lp.set_bounds(0, None, Some(4.0));
        let out = solve_lp(&lp);
        assert_eq!(out.solution, vec![4.0]);
        assert!((out.dual_value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(2).maximize(vec![1.0, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.value - 2.0).abs() < 1e-12);
        assert!((out.dual_value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::new(4).maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let out = solve_lp(&lp);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_identical_runs() {
        let mut lp = LinearProgram::new(3).maximize(vec![1.0, 2.0, -1.0]);
        lp.add_le(vec![1.0, 1.0, 1.0], 4.0);
        lp.add_ge(vec![1.0, -1.0, 0.0], -1.0);
        lp.add_eq(vec![0.0, 1.0, 1.0], 2.0);
        let a = solve_lp(&lp);
        let b = solve_lp(&lp);
        assert_eq!(a, b);
    }
}
