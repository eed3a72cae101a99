//! Solver-facing linear program: named columns with bounds and integrality,
//! named rows with a relation and right-hand side, sparse objective.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    /// Sorted by column, no duplicate columns, no explicit zeros.
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    /// Constraint family: the row name up to the first `[`.
    pub fn family(&self) -> &str {
        family_of(&self.name)
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row, divided by `max(1, max |a|)`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        let raw = match self.relation {
            Relation::Le => act - self.rhs,
            Relation::Ge => self.rhs - act,
            Relation::Eq => (act - self.rhs).abs(),
        }
        .max(0.0);
        let norm = self.coeffs.iter().fold(1.0f64, |m, &(_, a)| m.max(a.abs()));
        raw / norm
    }
}

pub fn family_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

/// Minimization problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
}

impl Problem {
    pub fn new(name: impl Into<String>) -> Self {
        Problem { name: name.into(), ..Default::default() }
    }

    pub fn add_column(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        self.columns.push(Column { name: name.into(), kind, lower, upper });
        self.columns.len() - 1
    }

    /// Adds a row; duplicate columns are merged and zeros dropped.
    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        let coeffs = normalize_coeffs(coeffs);
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.columns.len()));
        self.rows.push(Row { name: name.into(), coeffs, relation, rhs });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, f64)>, constant: f64) {
        self.objective = normalize_coeffs(coeffs);
        self.objective_constant = constant;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    pub fn num_integral(&self) -> usize {
        self.columns.iter().filter(|c| c.kind.is_integral()).count()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Copy with every integer column relaxed to continuous.
    pub fn relaxed(&self) -> Problem {
        let mut p = self.clone();
        for c in &mut p.columns {
            c.kind = VarKind::Continuous;
        }
        p
    }
}

pub fn normalize_coeffs(mut coeffs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    coeffs.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
    for (j, a) in coeffs {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += a,
            _ => out.push((j, a)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}
