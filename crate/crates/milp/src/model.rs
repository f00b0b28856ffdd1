//! Solver-independent MILP representation.
//!
//! A [`MilpModel`] owns a variable table, a list of sparse linear rows and a
//! minimization objective. Variable ids are dense indices handed out in
//! insertion order and never change, so callers can keep them in their own
//! lookup tables.

use std::collections::HashSet;
use std::fmt;

use crate::error::ModelError;

/// Absolute tolerance used by [`MilpModel::evaluate`].
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Dense variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Dense constraint index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstrId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Le => "<=",
            Comparator::Eq => "=",
            Comparator::Ge => ">=",
        })
    }
}

/// One linear row `Σ coef·x cmp rhs`. Terms are sorted by variable id and
/// contain no duplicates and no zero coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.cmp {
            Comparator::Le => (lhs - self.rhs).max(0.0),
            Comparator::Ge => (self.rhs - lhs).max(0.0),
            Comparator::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>()
    }
}

/// Result of checking an assignment against a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub feasible: bool,
    pub worst_violation: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Objective,
    var_names: HashSet<String>,
    constr_names: HashSet<String>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.push_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        self.push_var(name, VarKind::Continuous, lower, upper)
    }

    fn push_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> Result<VarId, ModelError> {
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if !self.var_names.insert(name.clone()) {
            return Err(ModelError::DuplicateName(name));
        }
        self.vars.push(Variable { name, kind, lower, upper });
        Ok(VarId(self.vars.len() - 1))
    }

    /// Adds a row with an automatically generated name `c<index>`.
    pub fn add_constraint(
        &mut self,
        row: &[(VarId, f64)],
        cmp: Comparator,
        rhs: f64,
    ) -> Result<ConstrId, ModelError> {
        let mut name = format!("c{}", self.constraints.len());
        while self.constr_names.contains(&name) {
            name.push('_');
        }
        self.add_named_constraint(name, row, cmp, rhs)
    }

    pub fn add_named_constraint(
        &mut self,
        name: impl Into<String>,
        row: &[(VarId, f64)],
        cmp: Comparator,
        rhs: f64,
    ) -> Result<ConstrId, ModelError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(ModelError::InvalidName(name));
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
        let terms = self.normalize(row, &name)?;
        if !self.constr_names.insert(name.clone()) {
            return Err(ModelError::DuplicateName(name));
        }
        self.constraints.push(Constraint { name, terms, cmp, rhs });
        Ok(ConstrId(self.constraints.len() - 1))
    }

    /// Replaces the objective (always minimized).
    pub fn set_objective(&mut self, coeffs: &[(VarId, f64)], constant: f64) -> Result<(), ModelError> {
        if !constant.is_finite() {
            return Err(ModelError::NonFinite("objective".into()));
        }
        let terms = self.normalize(coeffs, "objective")?;
        self.objective = Objective { terms, constant };
        Ok(())
    }

    /// Tightens or relaxes the bounds of an existing variable. Binary
    /// variables may only be restricted inside `[0, 1]`.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self.vars.get_mut(var.0).ok_or(ModelError::UnknownVariable(var.0))?;
        let bad = lower.is_nan() || upper.is_nan() || lower > upper;
        let bad = bad || (v.kind == VarKind::Binary && (lower < 0.0 || upper > 1.0));
        if bad {
            return Err(ModelError::InvalidBounds { name: v.name.clone(), lower, upper });
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    fn normalize(&self, row: &[(VarId, f64)], owner: &str) -> Result<Vec<(VarId, f64)>, ModelError> {
        let mut terms: Vec<(VarId, f64)> = Vec::with_capacity(row.len());
        for &(v, a) in row {
            if v.0 >= self.vars.len() {
                return Err(ModelError::UnknownVariable(v.0));
            }
            if !a.is_finite() {
                return Err(ModelError::NonFinite(owner.to_string()));
            }
            terms.push((v, a));
        }
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        Ok(merged)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Checks bounds, rows and binary integrality of `x` at
    /// [`FEASIBILITY_TOL`] and computes the objective.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ModelError> {
        self.evaluate_with_tol(x, FEASIBILITY_TOL)
    }

    pub fn evaluate_with_tol(&self, x: &[f64], tol: f64) -> Result<Evaluation, ModelError> {
        if x.len() != self.vars.len() {
            return Err(ModelError::AssignmentLength { expected: self.vars.len(), got: x.len() });
        }
        let mut worst: f64 = 0.0;
        for (v, &val) in self.vars.iter().zip(x) {
            if val.is_nan() {
                worst = f64::INFINITY;
                continue;
            }
            worst = worst.max(v.lower - val).max(val - v.upper);
            if v.kind == VarKind::Binary {
                worst = worst.max((val - val.round()).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(x));
        }
        Ok(Evaluation { feasible: worst <= tol, worst_violation: worst, objective: self.objective.value(x) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_bounds_are_unit_interval() {
        let mut m = MilpModel::new();
        let b = m.add_binary("b").unwrap();
        let v = m.variable(b);
        assert_eq!((v.lower, v.upper), (0.0, 1.0));
        assert_eq!(v.kind, VarKind::Binary);
    }

    #[test]
    fn unknown_variable_in_row_is_rejected() {
        let mut m = MilpModel::new();
        m.add_binary("b").unwrap();
        let err = m.add_constraint(&[(VarId(3), 1.0)], Comparator::Le, 1.0).unwrap_err();
        assert!(matches!(err, ModelError::UnknownVariable(3)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new();
        m.add_binary("x").unwrap();
        assert!(matches!(m.add_continuous("x", 0.0, 1.0), Err(ModelError::DuplicateName(_))));
        assert!(matches!(m.add_binary("1x"), Err(ModelError::InvalidName(_))));
    }

    #[test]
    fn empty_objective_is_constant_zero() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0).unwrap();
        let ev = m.evaluate(&[2.0]).unwrap();
        assert_eq!(ev.objective, 0.0);
        m.set_objective(&[(x, 3.0)], 1.5).unwrap();
        assert_eq!(m.evaluate(&[2.0]).unwrap().objective, 7.5);
    }

    #[test]
    fn rows_merge_duplicates_and_drop_zeros() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        m.add_constraint(&[(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)], Comparator::Ge, 0.0).unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(x, 2.5)]);
    }

    #[test]
    fn lower_above_upper_rejected() {
        let mut m = MilpModel::new();
        assert!(m.add_continuous("x", 2.0, 1.0).is_err());
    }

    fn two_var() -> (MilpModel, VarId, VarId) {
        // min x + 2y  s.t. x + y >= 1, x <= 0.75
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let y = m.add_continuous("y", 0.0, 10.0).unwrap();
        m.add_constraint(&[(x, 1.0), (y, 1.0)], Comparator::Ge, 1.0).unwrap();
        m.add_constraint(&[(x, 1.0)], Comparator::Le, 0.75).unwrap();
        m.set_objective(&[(x, 1.0), (y, 2.0)], 0.0).unwrap();
        (m, x, y)
    }

    #[test]
    fn evaluate_hand_optimum() {
        let (m, _, _) = two_var();
        let ev = m.evaluate(&[0.75, 0.25]).unwrap();
        assert!(ev.feasible);
        assert!((ev.objective - 1.25).abs() < 1e-15);
    }

    #[test]
    fn evaluate_reports_worst_violation() {
        let (m, _, _) = two_var();
        let ev = m.evaluate(&[0.25, 0.25]).unwrap();
        assert!(!ev.feasible);
        assert!((ev.worst_violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn evaluate_tolerance_boundary() {
        let (m, _, _) = two_var();
        let ev = m.evaluate(&[0.75, 0.25 - 1e-7]).unwrap();
        assert!(ev.feasible);
        assert!(ev.worst_violation > 0.0);
    }

    #[test]
    fn evaluate_missing_variable() {
        let (m, _, _) = two_var();
        assert!(matches!(m.evaluate(&[0.0]), Err(ModelError::AssignmentLength { .. })));
    }

    #[test]
    fn evaluate_checks_integrality() {
        let mut m = MilpModel::new();
        m.add_binary("b").unwrap();
        assert!(!m.evaluate(&[0.5]).unwrap().feasible);
        assert!(m.evaluate(&[1.0]).unwrap().feasible);
    }
}
