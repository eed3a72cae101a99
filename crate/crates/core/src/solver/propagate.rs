//! Activity-based bound tightening.

use super::problem::{Problem, Relation};

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible;

/// Tightens `lower`/`upper` in place using row activity bounds.
/// Returns the number of bound changes, or `Infeasible` if some row can
/// no longer be satisfied.
pub fn propagate(
    problem: &Problem,
    lower: &mut [f64],
    upper: &mut [f64],
    max_passes: usize,
) -> Result<usize, Infeasible> {
    let integral: Vec<bool> = problem.columns.iter().map(|c| c.kind.is_integral()).collect();
    let mut changes = 0;
    for j in 0..lower.len() {
        if integral[j] {
            lower[j] = (lower[j] - INT_TOL).ceil();
            upper[j] = (upper[j] + INT_TOL).floor();
        }
        if lower[j] > upper[j] + bound_tol(lower[j]) {
            return Err(Infeasible);
        }
    }
    for _ in 0..max_passes {
        let mut changed = 0;
        for row in &problem.rows {
            let (lo_r, hi_r) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            // Activity bounds with counts of infinite contributions.
            let (mut min_act, mut min_inf, mut max_act, mut max_inf) = (0.0, 0usize, 0.0, 0usize);
            for &(j, a) in &row.coeffs {
                let (lo_c, hi_c) = if a > 0.0 { (a * lower[j], a * upper[j]) } else { (a * upper[j], a * lower[j]) };
                if lo_c.is_finite() {
                    min_act += lo_c;
                } else {
                    min_inf += 1;
                }
                if hi_c.is_finite() {
                    max_act += hi_c;
                } else {
                    max_inf += 1;
                }
            }
            let tol = 1e-6 * (1.0 + row.rhs.abs());
            if min_inf == 0 && min_act > hi_r + tol {
                return Err(Infeasible);
            }
            if max_inf == 0 && max_act < lo_r - tol {
                return Err(Infeasible);
            }
            for &(j, a) in &row.coeffs {
                let (lo_c, hi_c) = if a > 0.0 { (a * lower[j], a * upper[j]) } else { (a * upper[j], a * lower[j]) };
                // Residual activity excluding column j.
                let min_rest = match (min_inf, lo_c.is_finite()) {
                    (0, _) => Some(min_act - lo_c),
                    (1, false) => Some(min_act),
                    _ => None,
                };
                let max_rest = match (max_inf, hi_c.is_finite()) {
                    (0, _) => Some(max_act - hi_c),
                    (1, false) => Some(max_act),
                    _ => None,
                };
                let mut new_lo = lower[j];
                let mut new_up = upper[j];
                if let (Some(rest), true) = (min_rest, hi_r.is_finite()) {
                    let bound = (hi_r - rest) / a;
                    if a > 0.0 {
                        new_up = new_up.min(bound);
                    } else {
                        new_lo = new_lo.max(bound);
                    }
                }
                if let (Some(rest), true) = (max_rest, lo_r.is_finite()) {
                    let bound = (lo_r - rest) / a;
                    if a > 0.0 {
                        new_lo = new_lo.max(bound);
                    } else {
                        new_up = new_up.min(bound);
                    }
                }
                if integral[j] {
                    new_lo = (new_lo - INT_TOL).ceil();
                    new_up = (new_up + INT_TOL).floor();
                }
                let width = upper[j] - lower[j];
                let min_gain = if integral[j] {
                    0.5
                } else if width.is_finite() {
                    1e-3 * width.max(1e-9)
                } else {
                    1e-3 * new_lo.abs().max(new_up.abs()).max(1.0)
                };
                if new_lo > lower[j] + min_gain {
                    lower[j] = if integral[j] { new_lo } else { new_lo - 1e-9 * new_lo.abs().max(1.0) };
                    changed += 1;
                }
                if new_up < upper[j] - min_gain {
                    upper[j] = if integral[j] { new_up } else { new_up + 1e-9 * new_up.abs().max(1.0) };
                    changed += 1;
                }
                if lower[j] > upper[j] {
                    if lower[j] > upper[j] + bound_tol(lower[j]) {
                        return Err(Infeasible);
                    }
                    let mid = if integral[j] { lower[j].round() } else { 0.5 * (lower[j] + upper[j]) };
                    lower[j] = mid;
                    upper[j] = mid;
                }
            }
        }
        changes += changed;
        if changed == 0 {
            break;
        }
    }
    Ok(changes)
}

fn bound_tol(v: f64) -> f64 {
    1e-6 * (1.0 + v.abs().min(1e12))
}
