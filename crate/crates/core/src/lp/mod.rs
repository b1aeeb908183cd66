//! Linear programs with bounded variables and ranged rows, solved by an
//! embedded simplex that also reports row duals.
//!
//! All programs are minimisations. A row is `lower <= sum(coef * x) <= upper`;
//! equalities use `lower == upper`. The dual of a row is the derivative of the
//! optimal objective with respect to the row's active bound, so the dual of a
//! `supply = demand` balance is the marginal cost of serving one more unit of
//! demand.

mod dump;
mod simplex;

pub use dump::write_lp_format;

use thiserror::Error;

/// Absolute primal feasibility tolerance, applied after row scaling.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Relative tolerance for the strong-duality check.
pub const DUALITY_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub(crate) usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
    /// Duals of priced rows are part of the solution contract.
    pub priced: bool,
}

/// Row sense helper for [`LinearProgram::add_row`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Eq(f64),
    Le(f64),
    Ge(f64),
    Range(f64, f64),
}

impl Bound {
    fn limits(self) -> (f64, f64) {
        match self {
            Bound::Eq(b) => (b, b),
            Bound::Le(b) => (f64::NEG_INFINITY, b),
            Bound::Ge(b) => (b, f64::INFINITY),
            Bound::Range(lo, hi) => (lo, hi),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("row `{row}` references undeclared variable #{var}")]
    UnknownVariable { row: String, var: usize },
    #[error("`{name}` has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("`{name}` has a non-finite coefficient or cost")]
    NonFinite { name: String },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        bound: Bound,
    ) -> RowId {
        let (lower, upper) = bound.limits();
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            lower,
            upper,
            priced: false,
        });
        RowId(self.rows.len() - 1)
    }

    /// Adds a row whose dual must be reported.
    pub fn add_priced_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        bound: Bound,
    ) -> RowId {
        let id = self.add_row(name, coeffs, bound);
        self.rows[id.0].priced = true;
        id
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn set_cost(&mut self, id: VarId, cost: f64) {
        self.vars[id.0].cost = cost;
    }

    pub fn add_cost(&mut self, id: VarId, cost: f64) {
        self.vars[id.0].cost += cost;
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[id.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(LpError::NonFinite { name: v.name.clone() });
            }
            if v.lower > v.upper {
                return Err(LpError::InvertedBounds {
                    name: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for r in &self.rows {
            if r.lower.is_nan() || r.upper.is_nan() {
                return Err(LpError::NonFinite { name: r.name.clone() });
            }
            if r.lower > r.upper {
                return Err(LpError::InvertedBounds {
                    name: r.name.clone(),
                    lower: r.lower,
                    upper: r.upper,
                });
            }
            for &(v, c) in &r.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(LpError::UnknownVariable {
                        row: r.name.clone(),
                        var: v.0,
                    });
                }
                if !c.is_finite() {
                    return Err(LpError::NonFinite { name: r.name.clone() });
                }
            }
        }
        Ok(())
    }

    /// Row activity `sum(coef * x)` for a candidate point.
    pub fn activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].coeffs.iter().map(|&(v, c)| c * x[v.0]).sum()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    /// Largest bound or row violation of `x`, each row measured after
    /// dividing by its largest absolute coefficient.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, &xi) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xi).max(xi - v.upper);
        }
        for (i, r) in self.rows.iter().enumerate() {
            let scale = r.coeffs.iter().fold(0.0f64, |m, &(_, c)| m.max(c.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let act = self.activity(RowId(i), x);
            worst = worst.max((r.lower - act) / scale).max((act - r.upper) / scale);
        }
        worst
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.validate()?;
        simplex::solve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values, one per variable. Empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Objective of the dual program at the reported multipliers.
    pub dual_objective: Option<f64>,
    /// Row duals (objective increase per unit increase of the row bound).
    row_duals: Vec<f64>,
    priced: Vec<RowId>,
}

impl LpSolution {
    pub(crate) fn not_optimal(status: LpStatus) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective: f64::NAN,
            dual_objective: None,
            row_duals: Vec::new(),
            priced: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.x[v.0]
    }

    pub fn dual(&self, row: RowId) -> f64 {
        self.row_duals[row.0]
    }

    /// Duals of the rows tagged as priced, in insertion order.
    pub fn priced_duals(&self) -> impl Iterator<Item = (RowId, f64)> + '_ {
        self.priced.iter().map(|&r| (r, self.row_duals[r.0]))
    }

    pub fn duality_gap(&self) -> Option<f64> {
        self.dual_objective.map(|d| (self.objective - d).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("min3", vec![(x, 1.0)], Bound::Ge(3.0));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 3.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn two_generator_merit_order_with_dual() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var("a", 0.0, 60.0, 10.0);
        let b = lp.add_var("b", 0.0, 60.0, 20.0);
        let bal = lp.add_priced_row("balance", vec![(a, 1.0), (b, 1.0)], Bound::Eq(100.0));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(a) - 60.0).abs() < 1e-9);
        assert!((sol.value(b) - 40.0).abs() < 1e-9);
        assert!((sol.objective - 1400.0).abs() < 1e-9);
        assert!((sol.dual(bal) - 20.0).abs() < 1e-9);
        assert_eq!(sol.priced_duals().count(), 1);
        assert!(sol.duality_gap().unwrap() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_row("le1", vec![(x, 1.0)], Bound::Le(1.0));
        lp.add_row("ge2", vec![(x, 1.0)], Bound::Ge(2.0));
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_row("r", vec![(x, 1.0), (y, -1.0)], Bound::Le(4.0));
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn ge_row_dual_sign() {
        // min 3x s.t. x >= 5: raising the bound by one costs 3.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, f64::INFINITY, 3.0);
        let r = lp.add_priced_row("need", vec![(x, 2.0)], Bound::Ge(10.0));
        let sol = lp.solve().unwrap();
        assert!((sol.value(x) - 5.0).abs() < 1e-9);
        assert!((sol.dual(r) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn inactive_row_has_zero_dual() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 0.0, 10.0, 1.0);
        let r = lp.add_priced_row("loose", vec![(x, 1.0)], Bound::Le(50.0));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.dual(r), 0.0);
    }

    #[test]
    fn free_variables_and_ranges() {
        // min |x - 2| style: min t s.t. -t <= x - 2 <= t, x in [-inf, inf]
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let t = lp.add_var("t", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("p", vec![(x, 1.0), (t, -1.0)], Bound::Le(2.0));
        lp.add_row("n", vec![(x, 1.0), (t, 1.0)], Bound::Ge(2.0));
        lp.add_row("band", vec![(x, 1.0)], Bound::Range(5.0, 7.0));
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 5.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_program_rejected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 2.0, 1.0, 0.0);
        lp.add_row("r", vec![(x, 1.0)], Bound::Le(1.0));
        assert!(matches!(lp.solve(), Err(LpError::InvertedBounds { .. })));
        let mut lp = LinearProgram::new();
        lp.add_row("r", vec![(VarId(3), 1.0)], Bound::Le(1.0));
        assert!(matches!(lp.solve(), Err(LpError::UnknownVariable { .. })));
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let mut lp = LinearProgram::new();
        let vars: Vec<_> = (0..6)
            .map(|i| lp.add_var(format!("g{i}"), 0.0, 10.0 + i as f64, 1.0 + (i % 3) as f64))
            .collect();
        lp.add_priced_row(
            "bal",
            vars.iter().map(|&v| (v, 1.0)).collect(),
            Bound::Eq(37.5),
        );
        lp.add_row("pair", vec![(vars[0], 1.0), (vars[3], -2.0)], Bound::Range(-3.0, 3.0));
        let a = lp.solve().unwrap();
        let b = lp.solve().unwrap();
        assert_eq!(a, b);
    }
}
