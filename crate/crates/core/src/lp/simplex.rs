//! Two-phase bounded-variable primal simplex on a dense tableau.
//!
//! Every row `i` becomes `r_i - a_i x = 0` with a logical variable `r_i`
//! carrying the row bounds, so the right-hand side is identically zero and
//! all bound information lives on columns. Rows that the starting point
//! violates get an artificial column for phase one.
//!
//! The ratio test is Harris' two-pass rule; after a run of degenerate pivots
//! the solver falls back to Bland's rule until progress resumes. The final
//! basis is refactorised from the original columns so that reported primal
//! values and duals do not carry accumulated tableau drift.

use nalgebra::{DMatrix, DVector};

use super::{LinearProgram, LpError, LpSolution, LpStatus, RowId, FEASIBILITY_TOL};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const HARRIS_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-14;
const DEGENERATE_RUN: usize = 50;
const REFRESH_EVERY: usize = 100;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    n_struct: usize,
    n_cols: usize,
    /// Row-major `m x n_cols`, equal to `B^-1 A_full`.
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    /// Basis row of each column, or `usize::MAX` when nonbasic.
    pos: Vec<usize>,
    row_scale: Vec<f64>,
    /// Sign of each artificial column, indexed by artificial number.
    art_sign: Vec<f64>,
    art_row: Vec<usize>,
    struct_cost: Vec<f64>,
}

pub(super) fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let mut tab = Tableau::build(lp);

    if !tab.art_row.is_empty() {
        tab.set_costs(Phase::One);
        if let Outcome::Unbounded = tab.iterate()? {
            return Err(LpError::NumericalFailure("phase one reported unbounded".into()));
        }
        let infeasibility: f64 = (tab.first_art()..tab.n_cols).map(|j| tab.x[j]).sum();
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution::not_optimal(LpStatus::Infeasible));
        }
        tab.expel_artificials();
    }

    tab.set_costs(Phase::Two);
    match tab.iterate()? {
        Outcome::Unbounded => Ok(LpSolution::not_optimal(LpStatus::Unbounded)),
        Outcome::Optimal => tab.extract(lp),
    }
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.vars.len();
        let m = lp.rows.len();

        let mut x = Vec::with_capacity(n + 2 * m);
        let mut lo = Vec::with_capacity(n + 2 * m);
        let mut hi = Vec::with_capacity(n + 2 * m);
        for v in &lp.vars {
            lo.push(v.lower);
            hi.push(v.upper);
            x.push(if v.lower.is_finite() {
                v.lower
            } else if v.upper.is_finite() {
                v.upper
            } else {
                0.0
            });
        }

        let row_scale: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| {
                let s = r.coeffs.iter().fold(0.0f64, |acc, &(_, c)| acc.max(c.abs()));
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();

        // Logical columns n..n+m.
        let mut activity = vec![0.0; m];
        for (i, r) in lp.rows.iter().enumerate() {
            let s = row_scale[i];
            lo.push(r.lower / s);
            hi.push(r.upper / s);
            activity[i] = r.coeffs.iter().map(|&(v, c)| c / s * x[v.0]).sum();
            x.push(0.0);
        }

        // Decide which rows need an artificial.
        let mut art_row = Vec::new();
        let mut art_sign = Vec::new();
        let mut basis = vec![0usize; m];
        for i in 0..m {
            let li = n + i;
            let act = activity[i];
            if act >= lo[li] - HARRIS_TOL && act <= hi[li] + HARRIS_TOL {
                x[li] = act;
                basis[i] = li;
            } else {
                let v = if act < lo[li] { lo[li] } else { hi[li] };
                x[li] = v;
                art_row.push(i);
                art_sign.push(if act - v >= 0.0 { 1.0 } else { -1.0 });
            }
        }
        let first_art = n + m;
        for (k, &i) in art_row.iter().enumerate() {
            lo.push(0.0);
            hi.push(f64::INFINITY);
            x.push((activity[i] - x[n + i]).abs());
            basis[i] = first_art + k;
        }
        let n_cols = first_art + art_row.len();

        let mut t = vec![0.0; m * n_cols];
        let mut art_of_row = vec![usize::MAX; m];
        for (k, &i) in art_row.iter().enumerate() {
            art_of_row[i] = k;
        }
        for (i, r) in lp.rows.iter().enumerate() {
            let s = row_scale[i];
            let sign = if art_of_row[i] == usize::MAX {
                1.0
            } else {
                art_sign[art_of_row[i]]
            };
            let row = &mut t[i * n_cols..(i + 1) * n_cols];
            for &(v, c) in &r.coeffs {
                row[v.0] -= sign * c / s;
            }
            row[n + i] = sign;
            if art_of_row[i] != usize::MAX {
                row[first_art + art_of_row[i]] = 1.0;
            }
        }

        let mut pos = vec![usize::MAX; n_cols];
        for (i, &b) in basis.iter().enumerate() {
            pos[b] = i;
        }

        Self {
            m,
            n_struct: n,
            n_cols,
            t,
            lo,
            hi,
            x,
            cost: vec![0.0; n_cols],
            d: vec![0.0; n_cols],
            basis,
            pos,
            row_scale,
            art_sign,
            art_row,
            struct_cost: lp.vars.iter().map(|v| v.cost).collect(),
        }
    }

    fn first_art(&self) -> usize {
        self.n_struct + self.m
    }

    fn set_costs(&mut self, phase: Phase) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        match phase {
            Phase::One => {
                for j in self.first_art()..self.n_cols {
                    self.cost[j] = 1.0;
                }
            }
            Phase::Two => self.cost[..self.n_struct].copy_from_slice(&self.struct_cost),
        }
        self.refresh_reduced_costs();
    }

    fn refresh_reduced_costs(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.n_cols..(i + 1) * self.n_cols];
            for (dj, &tij) in self.d.iter_mut().zip(row) {
                *dj -= cb * tij;
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn refresh_basic_values(&mut self) {
        for i in 0..self.m {
            let row = &self.t[i * self.n_cols..(i + 1) * self.n_cols];
            let mut v = 0.0;
            for (j, &tij) in row.iter().enumerate() {
                if tij != 0.0 && self.pos[j] == usize::MAX {
                    v -= tij * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Picks an entering column and its direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n_cols {
            if self.pos[j] != usize::MAX || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let at_lo = self.x[j] <= self.lo[j];
            let at_hi = self.x[j] >= self.hi[j];
            let dir = if dj < -OPT_TOL && !at_hi {
                1.0
            } else if dj > OPT_TOL && !at_lo {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Outcome, LpError> {
        let max_iter = 50 * (self.m + self.n_cols) + 1000;
        let mut degenerate = 0usize;
        let mut bland = false;
        for iter in 0..max_iter {
            if iter > 0 && iter % REFRESH_EVERY == 0 {
                self.refresh_basic_values();
                self.refresh_reduced_costs();
            }
            let Some((q, dir)) = self.price(bland) else {
                return Ok(Outcome::Optimal);
            };

            let flip = self.hi[q] - self.lo[q];
            let step = if bland {
                self.ratio_bland(q, dir)
            } else {
                self.ratio_harris(q, dir)
            };

            let theta = match step {
                None if flip.is_infinite() => return Ok(Outcome::Unbounded),
                Some((_, th)) if th < flip => th,
                _ => {
                    // Bound flip without a basis change.
                    self.shift(q, dir, flip);
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                    degenerate = 0;
                    bland = false;
                    continue;
                }
            };
            let r = step.map(|(r, _)| r).unwrap_or_default();

            self.shift(q, dir, theta);
            let leaving = self.basis[r];
            let alpha = self.t[r * self.n_cols + q] * dir;
            self.x[leaving] = if alpha > 0.0 {
                self.lo[leaving]
            } else {
                self.hi[leaving]
            };
            self.pivot(r, q);

            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
        Err(LpError::NumericalFailure(format!(
            "iteration limit reached ({} rows, {} columns)",
            self.m, self.n_cols
        )))
    }

    fn shift(&mut self, q: usize, dir: f64, theta: f64) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for i in 0..self.m {
            let a = self.t[i * self.n_cols + q];
            if a != 0.0 {
                self.x[self.basis[i]] -= a * dir * theta;
            }
        }
    }

    fn row_ratio(&self, i: usize, alpha: f64, slack: f64) -> Option<f64> {
        let b = self.basis[i];
        if alpha > 0.0 {
            self.lo[b]
                .is_finite()
                .then(|| (self.x[b] - self.lo[b] + slack) / alpha)
        } else {
            self.hi[b]
                .is_finite()
                .then(|| (self.hi[b] - self.x[b] + slack) / -alpha)
        }
    }

    fn ratio_harris(&self, q: usize, dir: f64) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            let alpha = self.t[i * self.n_cols + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some(r) = self.row_ratio(i, alpha, HARRIS_TOL) {
                bound = bound.min(r);
            }
        }
        if bound.is_infinite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut best_alpha = 0.0;
        for i in 0..self.m {
            let alpha = self.t[i * self.n_cols + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some(r) = self.row_ratio(i, alpha, 0.0) {
                if r <= bound && alpha.abs() > best_alpha {
                    best_alpha = alpha.abs();
                    best = Some((i, r.max(0.0)));
                }
            }
        }
        best
    }

    fn ratio_bland(&self, q: usize, dir: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let alpha = self.t[i * self.n_cols + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            if let Some(r) = self.row_ratio(i, alpha, 0.0) {
                let r = r.max(0.0);
                let better = match best {
                    None => true,
                    Some((bi, br)) => r < br || (r == br && self.basis[i] < self.basis[bi]),
                };
                if better {
                    best = Some((i, r));
                }
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.n_cols;
        let piv = self.t[r * nc + q];
        let inv = 1.0 / piv;
        let mut nz = Vec::new();
        for j in 0..nc {
            let v = &mut self.t[r * nc + j];
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < DROP_TOL {
                    *v = 0.0;
                } else {
                    nz.push(j);
                }
            }
        }
        self.t[r * nc + q] = 1.0;
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&j| (j, self.t[r * nc + j])).collect();

        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * nc..(i + 1) * nc];
            for &(j, pj) in &pivot_row {
                let v = row[j] - f * pj;
                row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
            }
            row[q] = 0.0;
        }

        let f = self.d[q];
        if f != 0.0 {
            for &(j, pj) in &pivot_row {
                self.d[j] -= f * pj;
            }
        }
        self.d[q] = 0.0;

        let leaving = self.basis[r];
        self.pos[leaving] = usize::MAX;
        self.basis[r] = q;
        self.pos[q] = r;
    }

    fn expel_artificials(&mut self) {
        let first = self.first_art();
        for i in 0..self.m {
            if self.basis[i] < first {
                continue;
            }
            let mut best = None;
            let mut best_abs = 1e-7;
            for j in 0..first {
                if self.pos[j] != usize::MAX {
                    continue;
                }
                let a = self.t[i * self.n_cols + j].abs();
                if a > best_abs {
                    best_abs = a;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let art = self.basis[i];
                self.pivot(i, j);
                self.x[art] = 0.0;
            }
        }
        for j in first..self.n_cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.pos[j] == usize::MAX {
                self.x[j] = 0.0;
            }
        }
        self.refresh_basic_values();
    }

    fn extract(&mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let m = self.m;
        let n = self.n_struct;

        // Column-wise view of the structural part.
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, r) in lp.rows.iter().enumerate() {
            let s = self.row_scale[i];
            for &(v, c) in &r.coeffs {
                cols[v.0].push((i, -c / s));
            }
        }
        let art_row = self.art_row.clone();
        let art_sign = self.art_sign.clone();
        // Column `j` of `[-A/s | I | art]` as `(row, value)` pairs.
        let column = |j: usize| -> Vec<(usize, f64)> {
            if j < n {
                cols[j].clone()
            } else if j < n + m {
                vec![(j - n, 1.0)]
            } else {
                let k = j - n - m;
                vec![(art_row[k], art_sign[k])]
            }
        };

        let refined = if m > 0 {
            let mut bmat = DMatrix::<f64>::zeros(m, m);
            for (k, &b) in self.basis.iter().enumerate() {
                for (i, v) in column(b) {
                    bmat[(i, k)] += v;
                }
            }
            let mut rhs = DVector::<f64>::zeros(m);
            for j in 0..self.n_cols {
                if self.pos[j] != usize::MAX || self.x[j] == 0.0 {
                    continue;
                }
                for (i, v) in column(j) {
                    rhs[i] -= v * self.x[j];
                }
            }
            let cb = DVector::<f64>::from_iterator(m, self.basis.iter().map(|&b| self.cost[b]));
            let lu = bmat.clone().lu();
            let xb = lu.solve(&rhs);
            let y = bmat.transpose().lu().solve(&cb);
            match (xb, y) {
                (Some(xb), Some(y)) => Some((xb, y)),
                _ => None,
            }
        } else {
            Some((DVector::zeros(0), DVector::zeros(0)))
        };

        let violation = |tab: &Self, vals: &dyn Fn(usize) -> f64| -> f64 {
            (0..m).fold(0.0f64, |w, i| {
                let b = tab.basis[i];
                let v = vals(i);
                w.max(tab.lo[b] - v).max(v - tab.hi[b])
            })
        };

        let y: Vec<f64> = match refined {
            Some((xb, y)) => {
                let refined_viol = violation(self, &|i| xb[i]);
                let tableau_viol = violation(self, &|i| self.x[self.basis[i]]);
                if refined_viol <= tableau_viol.max(FEASIBILITY_TOL * 1e-3) {
                    for i in 0..m {
                        self.x[self.basis[i]] = xb[i];
                    }
                }
                y.iter().copied().collect()
            }
            None => {
                // Reduced costs of logical columns carry -y.
                (0..m).map(|i| -self.d[n + i]).collect()
            }
        };

        let worst = violation(self, &|i| self.x[self.basis[i]]);
        if worst > FEASIBILITY_TOL {
            return Err(LpError::NumericalFailure(format!(
                "basic solution violates bounds by {worst:e}"
            )));
        }
        // Snap basic values that sit within tolerance outside their bounds.
        for &b in &self.basis {
            self.x[b] = self.x[b].clamp(self.lo[b], self.hi[b]);
        }

        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = lp.objective_at(&x);

        let mut dual_objective = 0.0;
        for j in 0..self.first_art() {
            if self.pos[j] != usize::MAX || self.x[j] == 0.0 {
                continue;
            }
            let dj = self.cost[j] - column(j).iter().map(|&(i, v)| y[i] * v).sum::<f64>();
            dual_objective += dj * self.x[j];
        }

        let row_duals: Vec<f64> = (0..m).map(|i| -y[i] / self.row_scale[i]).collect();
        let priced = lp
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.priced)
            .map(|(i, _)| RowId(i))
            .collect();

        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            dual_objective: Some(dual_objective),
            row_duals,
            priced,
        })
    }
}
