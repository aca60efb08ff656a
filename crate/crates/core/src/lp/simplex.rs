//! Dense two-phase primal simplex on a condensed (Tucker) tableau.
//!
//! Only nonbasic columns are stored, so a problem with `m` inequality rows and
//! `k` structural variables needs an `(m + 2) x (k + 2)` tableau no matter how
//! many slacks it has. Each row reads
//!
//! ```text
//! basic_i = sum_j T[i][j] * nonbasic_j + T[i][const]
//! ```
//!
//! and a pivot is a Jordan exchange of one basic and one nonbasic variable.
//! Equality rows are exchanged out first and their slack column deleted; free
//! variables are exchanged into the basis and their rows set aside. Phase one
//! adds a single artificial column and minimises it. Entering and leaving
//! variables are chosen by Bland's rule, so the run is deterministic.

use serde::{Deserialize, Serialize};

/// Pivot and feasibility tolerance.
pub const LP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `minimize c.x` subject to the constraints and `x_j >= lower_j`
/// (`None` marks a free variable).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    /// All variables bounded below by zero.
    pub fn new(objective: Vec<f64>) -> Self {
        let k = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![Some(0.0); k],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, sense, rhs });
        self
    }

    pub fn set_lower_bound(&mut self, var: usize, bound: Option<f64>) -> &mut Self {
        self.lower_bounds[var] = bound;
        self
    }

    fn validate(&self) -> Result<(), String> {
        let k = self.num_vars();
        if self.lower_bounds.len() != k {
            return Err(format!(
                "{} lower bounds for {k} variables",
                self.lower_bounds.len()
            ));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("objective has a non-finite coefficient".into());
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != k {
                return Err(format!(
                    "constraint {i} has {} coefficients for {k} variables",
                    c.coeffs.len()
                ));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(format!("constraint {i} has a non-finite entry"));
            }
        }
        if self.lower_bounds.iter().flatten().any(|l| !l.is_finite()) {
            return Err("lower bounds must be finite or free".into());
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            match c.sense {
                Sense::Le => (lhs - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - lhs).max(0.0),
                Sense::Eq => (lhs - c.rhs).abs(),
            }
        });
        let bounds = self
            .lower_bounds
            .iter()
            .zip(x)
            .map(|(l, v)| l.map_or(0.0, |l| (l - v).max(0.0)));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The input was malformed (dimension mismatch, non-finite data).
    Invalid,
}

/// Variable that is basic in a tableau row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisLabel {
    Variable(usize),
    Slack(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; meaningful only when optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic variable of each remaining constraint row at termination.
    pub basis: Vec<BasisLabel>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, k: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![f64::NAN; k],
            objective: f64::NAN,
            basis: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Label {
    Var(usize),
    Slack(usize),
    Artificial,
}

impl Label {
    /// Bland ordering: structurals, then slacks, then the artificial.
    fn rank(self, num_vars: usize) -> usize {
        match self {
            Label::Var(j) => j,
            Label::Slack(i) => num_vars + i,
            Label::Artificial => usize::MAX,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RowKind {
    /// Basic variable must stay non-negative.
    Active,
    /// Holds a free variable; excluded from ratio tests.
    Free,
    /// Redundant row, ignored.
    Dropped,
}

struct Tableau {
    /// `rows + 2` rows (objective, phase-one objective last), `cols + 1` columns (constant last).
    data: Vec<f64>,
    width: usize,
    rows: usize,
    row_labels: Vec<Label>,
    row_kind: Vec<RowKind>,
    col_labels: Vec<Label>,
    col_alive: Vec<bool>,
    num_vars: usize,
    iterations: usize,
    max_iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn constant_col(&self) -> usize {
        self.width - 1
    }

    fn objective_row(&self) -> usize {
        self.rows
    }

    fn phase_one_row(&self) -> usize {
        self.rows + 1
    }

    /// Jordan exchange of the basic variable of row `r` with the nonbasic of column `s`.
    fn exchange(&mut self, r: usize, s: usize) {
        let w = self.width;
        let p = self.at(r, s);
        debug_assert!(p != 0.0);
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows + 2 {
            if i == r {
                continue;
            }
            let factor = self.data[i * w + s] / p;
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for (j, v) in row.iter_mut().enumerate() {
                if j != s {
                    *v -= factor * pivot_row[j];
                }
            }
            row[s] = factor;
        }
        let row = &mut self.data[r * w..(r + 1) * w];
        for (j, v) in row.iter_mut().enumerate() {
            *v = if j == s { 1.0 / p } else { -pivot_row[j] / p };
        }
        std::mem::swap(&mut self.row_labels[r], &mut self.col_labels[s]);
    }

    fn kill_column(&mut self, s: usize) {
        self.col_alive[s] = false;
        for i in 0..self.rows + 2 {
            self.data[i * self.width + s] = 0.0;
        }
    }

    /// Column in row `r` with the largest magnitude entry, skipping dead columns.
    fn best_column_in_row(&self, r: usize, allow: impl Fn(Label) -> bool) -> Option<usize> {
        (0..self.constant_col())
            .filter(|&j| self.col_alive[j] && allow(self.col_labels[j]))
            .map(|j| (j, self.at(r, j).abs()))
            .filter(|&(_, a)| a > LP_TOLERANCE)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j)
    }

    /// Bland's-rule primal simplex minimising the given objective row.
    fn run(&mut self, obj: usize) -> Outcome {
        let kc = self.constant_col();
        loop {
            let entering = (0..kc)
                .filter(|&j| self.col_alive[j] && self.at(obj, j) < -LP_TOLERANCE)
                .min_by_key(|&j| self.col_labels[j].rank(self.num_vars));
            let Some(s) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                if self.row_kind[i] != RowKind::Active {
                    continue;
                }
                let a = self.at(i, s);
                if a >= -LP_TOLERANCE {
                    continue;
                }
                let ratio = self.at(i, kc).max(0.0) / -a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((best, br)) => {
                        if ratio < br - LP_TOLERANCE
                            || (ratio <= br + LP_TOLERANCE
                                && self.row_labels[i].rank(self.num_vars)
                                    < self.row_labels[best].rank(self.num_vars))
                        {
                            Some((i, ratio))
                        } else {
                            Some((best, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            if self.iterations >= self.max_iterations {
                return Outcome::IterationLimit;
            }
            self.iterations += 1;
            self.exchange(r, s);
        }
    }
}

/// Solves `lp` to an optimal vertex, or reports why it could not.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let k = lp.num_vars();
    if lp.validate().is_err() {
        return LpSolution::failed(LpStatus::Invalid, k, 0);
    }
    let m = lp.constraints.len();
    let width = k + 2; // structurals, artificial, constant
    let art_col = k;
    let mut data = vec![0.0; (m + 2) * width];

    // Shift bounded variables so every nonbasic sits at zero: x = lower + x'.
    let shift: Vec<f64> = lp.lower_bounds.iter().map(|l| l.unwrap_or(0.0)).collect();
    for (i, c) in lp.constraints.iter().enumerate() {
        let rhs = c.rhs - c.coeffs.iter().zip(&shift).map(|(a, s)| a * s).sum::<f64>();
        // Row as y_i = a.x - b >= 0 (or = 0), with Le rows negated.
        let sign = if c.sense == Sense::Le { -1.0 } else { 1.0 };
        for j in 0..k {
            data[i * width + j] = sign * c.coeffs[j];
        }
        data[i * width + width - 1] = -sign * rhs;
    }
    for j in 0..k {
        data[m * width + j] = lp.objective[j];
    }

    let mut t = Tableau {
        data,
        width,
        rows: m,
        row_labels: (0..m).map(Label::Slack).collect(),
        row_kind: vec![RowKind::Active; m],
        col_labels: (0..k).map(Label::Var).chain([Label::Artificial]).collect(),
        col_alive: (0..k).map(|_| true).chain([false]).collect(),
        num_vars: k,
        iterations: 0,
        max_iterations: 50 * (m + k).max(1),
    };
    let kc = t.constant_col();
    let free = |j: usize| lp.lower_bounds[j].is_none();

    // Equality rows: exchange the slack out of the basis and delete its column.
    for i in 0..m {
        if lp.constraints[i].sense != Sense::Eq {
            continue;
        }
        match t.best_column_in_row(i, |l| l != Label::Artificial) {
            Some(s) => {
                t.exchange(i, s);
                t.kill_column(s);
                if let Label::Var(j) = t.row_labels[i] {
                    if free(j) {
                        t.row_kind[i] = RowKind::Free;
                    }
                }
            }
            None if t.at(i, kc).abs() <= LP_TOLERANCE => t.row_kind[i] = RowKind::Dropped,
            None => return LpSolution::failed(LpStatus::Infeasible, k, 0),
        }
    }

    // Free variables still nonbasic: move them into the basis.
    for s in 0..k {
        if !(t.col_alive[s] && matches!(t.col_labels[s], Label::Var(j) if free(j))) {
            continue;
        }
        let row = (0..m)
            .filter(|&i| t.row_kind[i] == RowKind::Active)
            .map(|i| (i, t.at(i, s).abs()))
            .filter(|&(_, a)| a > LP_TOLERANCE)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match row {
            Some((r, _)) => {
                t.exchange(r, s);
                t.row_kind[r] = RowKind::Free;
            }
            None if t.at(m, s).abs() > LP_TOLERANCE => return LpSolution::failed(LpStatus::Unbounded, k, 0),
            None => t.kill_column(s),
        }
    }

    // Phase one, only needed when some active row starts negative.
    let most_negative = (0..m)
        .filter(|&i| t.row_kind[i] == RowKind::Active)
        .map(|i| (i, t.at(i, kc)))
        .filter(|&(_, b)| b < -LP_TOLERANCE)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if let Some((r, _)) = most_negative {
        t.col_alive[art_col] = true;
        for i in 0..m {
            if t.row_kind[i] == RowKind::Active {
                t.data[i * width + art_col] = 1.0;
            }
        }
        let p1 = t.phase_one_row();
        t.data[p1 * width + art_col] = 1.0;
        t.exchange(r, art_col);
        match t.run(p1) {
            Outcome::Optimal => {}
            Outcome::IterationLimit => return LpSolution::failed(LpStatus::IterationLimit, k, t.iterations),
            // The artificial is bounded below by zero, so this cannot happen.
            Outcome::Unbounded => return LpSolution::failed(LpStatus::Infeasible, k, t.iterations),
        }
        if t.at(p1, kc) > LP_TOLERANCE {
            return LpSolution::failed(LpStatus::Infeasible, k, t.iterations);
        }
        if let Some(r) = (0..m).find(|&i| t.row_labels[i] == Label::Artificial) {
            match t.best_column_in_row(r, |l| l != Label::Artificial) {
                Some(s) => t.exchange(r, s),
                None => t.row_kind[r] = RowKind::Dropped,
            }
        }
        if let Some(s) = (0..kc).find(|&j| t.col_labels[j] == Label::Artificial) {
            t.kill_column(s);
        }
    }

    match t.run(t.objective_row()) {
        Outcome::Optimal => {}
        Outcome::Unbounded => return LpSolution::failed(LpStatus::Unbounded, k, t.iterations),
        Outcome::IterationLimit => return LpSolution::failed(LpStatus::IterationLimit, k, t.iterations),
    }

    let mut x = shift;
    let mut basis = Vec::new();
    for i in 0..m {
        if t.row_kind[i] == RowKind::Dropped {
            continue;
        }
        match t.row_labels[i] {
            Label::Var(j) => {
                let v = t.at(i, kc);
                // Clamp rounding noise on bounded variables.
                x[j] += if t.row_kind[i] == RowKind::Active {
                    v.max(0.0)
                } else {
                    v
                };
                basis.push(BasisLabel::Variable(j));
            }
            Label::Slack(c) => basis.push(BasisLabel::Slack(c)),
            Label::Artificial => {}
        }
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        basis,
        iterations: t.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn single_bound() {
        let lp = LinearProgram::new(vec![1.0]);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert_eq!(sol.x, vec![0.0]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(vec![0.0]);
        lp.add_constraint(vec![1.0], Sense::Ge, 1.0)
            .add_constraint(vec![1.0], Sense::Le, 0.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_constraint(vec![1.0, -1.0], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.add_constraint(vec![1.0, 0.0], Sense::Le, 4.0)
            .add_constraint(vec![0.0, 2.0], Sense::Le, 12.0)
            .add_constraint(vec![3.0, 2.0], Sense::Le, 18.0);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert_close(sol.x[0], 2.0);
        assert_close(sol.x[1], 6.0);
        assert_close(sol.objective, -36.0);
    }

    #[test]
    fn equalities_lower_bounds_and_free_variables() {
        // min x + y + z s.t. x + y = 3, y - z >= -1, x >= 1, y >= 0.5, z free, z >= -2 via row
        let mut lp = LinearProgram::new(vec![1.0, 1.0, 1.0]);
        lp.set_lower_bound(0, Some(1.0))
            .set_lower_bound(1, Some(0.5))
            .set_lower_bound(2, None);
        lp.add_constraint(vec![1.0, 1.0, 0.0], Sense::Eq, 3.0)
            .add_constraint(vec![0.0, 1.0, -1.0], Sense::Ge, -1.0)
            .add_constraint(vec![0.0, 0.0, 1.0], Sense::Ge, -2.0);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal(), "{sol:?}");
        assert_close(sol.objective, 1.0);
        assert_close(sol.x[2], -2.0);
        assert!(lp.max_violation(&sol.x) < 1e-9);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0, 1.0], Sense::Eq, 1.0)
            .add_constraint(vec![2.0, 2.0], Sense::Eq, 2.0);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert_close(sol.objective, 1.0);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example; Bland's rule must terminate at objective -0.05.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0)
            .add_constraint(vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0)
            .add_constraint(vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
        let sol = solve_lp(&lp);
        assert!(sol.is_optimal());
        assert_close(sol.objective, -0.05);
    }

    #[test]
    fn malformed_input_is_reported() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0], Sense::Ge, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Invalid);
    }
}
