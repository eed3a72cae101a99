//! Feasibility residuals of a candidate vector, grouped by row family.

use std::collections::BTreeMap;

use serde::Serialize;

use super::problem::Problem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyResidual {
    pub max_violation: f64,
    pub worst_row: String,
    pub rows_violated: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub tol: f64,
    pub families: BTreeMap<String, FamilyResidual>,
    pub max_bound_violation: f64,
    pub worst_bound_column: Option<String>,
    pub max_integrality_deviation: f64,
    pub worst_integral_column: Option<String>,
    pub length_mismatch: bool,
}

impl ResidualReport {
    pub fn max_row_violation(&self) -> f64 {
        self.families.values().fold(0.0, |m, f| m.max(f.max_violation))
    }

    /// Families with at least one row violated beyond the tolerance.
    pub fn flagged(&self) -> Vec<&str> {
        self.families
            .iter()
            .filter(|(_, f)| f.max_violation > self.tol)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn is_feasible(&self) -> bool {
        !self.length_mismatch
            && self.max_row_violation() <= self.tol
            && self.max_bound_violation <= self.tol
            && self.max_integrality_deviation <= self.tol
    }
}

/// Row violations are divided by `max(1, max |a_ij|)` of the row.
pub fn check_solution(problem: &Problem, x: &[f64], tol: f64) -> ResidualReport {
    let mut report = ResidualReport {
        tol,
        families: BTreeMap::new(),
        max_bound_violation: 0.0,
        worst_bound_column: None,
        max_integrality_deviation: 0.0,
        worst_integral_column: None,
        length_mismatch: x.len() != problem.columns.len(),
    };
    if report.length_mismatch {
        return report;
    }
    for row in &problem.rows {
        let v = row.violation(x);
        let fam = report.families.entry(row.family().to_string()).or_insert_with(|| FamilyResidual {
            max_violation: 0.0,
            worst_row: String::new(),
            rows_violated: 0,
            rows: 0,
        });
        fam.rows += 1;
        if v > tol {
            fam.rows_violated += 1;
        }
        if fam.rows == 1 || v > fam.max_violation {
            fam.max_violation = fam.max_violation.max(v);
            fam.worst_row = row.name.clone();
        }
    }
    for (j, col) in problem.columns.iter().enumerate() {
        let v = (col.lower - x[j]).max(x[j] - col.upper).max(0.0);
        if v > report.max_bound_violation {
            report.max_bound_violation = v;
            report.worst_bound_column = Some(col.name.clone());
        }
        if col.kind.is_integral() {
            let d = (x[j] - x[j].round()).abs();
            if d > report.max_integrality_deviation {
                report.max_integrality_deviation = d;
                report.worst_integral_column = Some(col.name.clone());
            }
        }
    }
    report
}
