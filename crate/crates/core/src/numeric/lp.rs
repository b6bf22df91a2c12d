//! Dense two-phase simplex. Problems here are tiny (a few hundred columns
//! at most), so a full tableau is simpler and accurate enough; the final
//! basic solution is re-solved from the original matrix to shed pivoting
//! round-off.

use nalgebra::{DMatrix, DVector};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    rel: Relation,
    rhs: f64,
}

/// `max` or `min` of `c·x` subject to linear rows, `x >= 0` unless a
/// variable is declared free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    maximize: bool,
    rows: Vec<Row>,
    free: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            maximize: true,
            rows: Vec::new(),
            free: vec![false; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        let mut lp = Self::maximize(objective);
        lp.maximize = false;
        lp
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_free(&mut self, j: usize) {
        self.free[j] = true;
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.objective.len(), "row width");
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `m` constraint rows followed by the cost row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    artificial_start: usize,
    /// standard-form column for each original variable (and its negative part)
    pos_col: Vec<usize>,
    neg_col: Vec<Option<usize>>,
    /// normalized standard-form matrix and rhs, kept for polishing
    a0: Vec<Vec<f64>>,
    b0: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let mut pos_col = Vec::with_capacity(n);
        let mut neg_col = Vec::with_capacity(n);
        let mut col = 0;
        for j in 0..n {
            pos_col.push(col);
            col += 1;
            if lp.free[j] {
                neg_col.push(Some(col));
                col += 1;
            } else {
                neg_col.push(None);
            }
        }
        let structural = col;
        // normalize rhs >= 0
        let rows: Vec<Row> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < 0.0 {
                    Row {
                        coeffs: r.coeffs.iter().map(|v| -v).collect(),
                        rel: match r.rel {
                            Relation::Le => Relation::Ge,
                            Relation::Ge => Relation::Le,
                            Relation::Eq => Relation::Eq,
                        },
                        rhs: -r.rhs,
                    }
                } else {
                    r.clone()
                }
            })
            .collect();
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.rel != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.rel != Relation::Le).count();
        let artificial_start = structural + n_slack;
        let ncols = artificial_start + n_art;
        let mut t = vec![vec![0.0; ncols + 1]; m + 1];
        let mut basis = vec![0; m];
        let mut slack = structural;
        let mut art = artificial_start;
        for (i, r) in rows.iter().enumerate() {
            for j in 0..n {
                t[i][pos_col[j]] = r.coeffs[j];
                if let Some(nc) = neg_col[j] {
                    t[i][nc] = -r.coeffs[j];
                }
            }
            t[i][ncols] = r.rhs;
            match r.rel {
                Relation::Le => {
                    t[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    t[i][slack] = -1.0;
                    slack += 1;
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        let a0 = t[..m].iter().map(|r| r[..ncols].to_vec()).collect();
        let b0 = t[..m].iter().map(|r| r[ncols]).collect();
        Tableau {
            m,
            ncols,
            t,
            basis,
            artificial_start,
            pos_col,
            neg_col,
            a0,
            b0,
        }
    }

    fn set_costs(&mut self, costs: &[f64]) {
        let nc = self.ncols;
        let m = self.m;
        for j in 0..=nc {
            self.t[m][j] = if j < nc { costs[j] } else { 0.0 };
        }
        for i in 0..m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=nc {
                    let v = self.t[i][j];
                    self.t[m][j] -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let nc = self.ncols;
        let p = self.t[r][c];
        for j in 0..=nc {
            self.t[r][j] /= p;
        }
        self.t[r][c] = 1.0;
        let pivot_row = self.t[r].clone();
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[i][c];
            if f != 0.0 {
                let row = &mut self.t[i];
                for j in 0..=nc {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes the cost row over columns `< allowed`. Returns false when
    /// unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        let m = self.m;
        let nc = self.ncols;
        let mut degenerate_run = 0usize;
        let max_iter = 50 * (m + nc) + 1000;
        for _ in 0..max_iter {
            let bland = degenerate_run > 20;
            let mut enter = None;
            let mut best = COST_EPS;
            for j in 0..allowed {
                let d = self.t[m][j];
                if d > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..m {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][nc] / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if ratio < best_ratio - 1e-14 {
                                true
                            } else if ratio <= best_ratio + 1e-14 {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    a > self.t[l][c]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio.min(best_ratio);
                    }
                }
            }
            let Some(r) = leave else { return false };
            if self.t[r][nc].abs() < 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
        true
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let nc = self.ncols;
        let scale = 1.0 + self.b0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if self.artificial_start < nc {
            let mut costs = vec![0.0; nc];
            for c in costs.iter_mut().skip(self.artificial_start) {
                *c = -1.0;
            }
            self.set_costs(&costs);
            self.optimize(nc);
            let infeas = self.t[self.m][nc];
            // cost row rhs holds +sum of artificials at this point
            if infeas.abs() > 1e-9 * scale {
                return LpOutcome::Infeasible;
            }
            // drive artificials out of the basis, dropping redundant rows
            let mut i = 0;
            while i < self.m {
                if self.basis[i] >= self.artificial_start {
                    let col = (0..self.artificial_start)
                        .filter(|&j| self.t[i][j].abs() > 1e-9)
                        .max_by(|&a, &b| self.t[i][a].abs().total_cmp(&self.t[i][b].abs()));
                    match col {
                        Some(j) => self.pivot(i, j),
                        None => {
                            self.t.remove(i);
                            self.basis.remove(i);
                            self.a0.remove(i);
                            self.b0.remove(i);
                            self.m -= 1;
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }
        let sign = if lp.maximize { 1.0 } else { -1.0 };
        let mut costs = vec![0.0; nc];
        for (j, &c) in lp.objective.iter().enumerate() {
            costs[self.pos_col[j]] = sign * c;
            if let Some(ncol) = self.neg_col[j] {
                costs[ncol] = -sign * c;
            }
        }
        self.set_costs(&costs);
        if !self.optimize(self.artificial_start) {
            return LpOutcome::Unbounded;
        }
        let std_x = self.polished_solution();
        let x: Vec<f64> = (0..lp.objective.len())
            .map(|j| {
                let mut v = std_x[self.pos_col[j]];
                if let Some(ncol) = self.neg_col[j] {
                    v -= std_x[ncol];
                }
                v
            })
            .collect();
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal(LpSolution { x, value })
    }

    fn polished_solution(&self) -> Vec<f64> {
        let nc = self.ncols;
        let mut x = vec![0.0; nc];
        for i in 0..self.m {
            x[self.basis[i]] = self.t[i][nc].max(0.0);
        }
        if self.m == 0 {
            return x;
        }
        let b = DMatrix::from_fn(self.m, self.m, |i, k| self.a0[i][self.basis[k]]);
        let rhs = DVector::from_iterator(self.m, self.b0.iter().copied());
        if let Some(sol) = b.lu().solve(&rhs) {
            let close = (0..self.m).all(|k| {
                (sol[k] - x[self.basis[k]]).abs() <= 1e-7 * (1.0 + x[self.basis[k]].abs())
            });
            if close && sol.iter().all(|v| v.is_finite()) {
                for k in 0..self.m {
                    x[self.basis[k]] = sol[k].max(0.0);
                }
            }
        }
        x
    }
}
