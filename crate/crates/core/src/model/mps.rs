//! Free-format MPS and LP-format export, plus an MPS reader for the files
//! this crate writes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::solver::{Problem, Relation, VarKind};

const OBJ_ROW: &str = "obj";
const RHS_SET: &str = "rhs";
const BOUND_SET: &str = "bnd";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unsupported section {section}")]
    Unsupported { line: usize, section: String },
    #[error("missing ENDATA")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn to_mps_string(problem: &Problem) -> String {
    let mut out = String::new();
    let name = if problem.name.is_empty() { "model" } else { problem.name.as_str() };
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {OBJ_ROW}");
    for row in &problem.rows {
        let t = match row.relation {
            Relation::Le => 'L',
            Relation::Ge => 'G',
            Relation::Eq => 'E',
        };
        let _ = writeln!(out, " {t} {}", row.name);
    }

    // Column-major entries, objective first, then rows in order.
    let n = problem.columns.len();
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, row) in problem.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            entries[j].push((i, a));
        }
    }
    let mut obj = vec![0.0; n];
    for &(j, c) in &problem.objective {
        obj[j] = c;
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0usize;
    for (j, col) in problem.columns.iter().enumerate() {
        let integral = col.kind.is_integral();
        if integral != in_int {
            let kind = if integral { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " M{marker} 'MARKER' '{kind}'");
            marker += 1;
            in_int = integral;
        }
        let mut fields: Vec<(&str, f64)> = Vec::with_capacity(entries[j].len() + 1);
        if obj[j] != 0.0 || entries[j].is_empty() {
            fields.push((OBJ_ROW, obj[j]));
        }
        fields.extend(entries[j].iter().map(|&(i, a)| (problem.rows[i].name.as_str(), a)));
        for chunk in fields.chunks(2) {
            let _ = write!(out, " {}", col.name);
            for (row, a) in chunk {
                let _ = write!(out, " {row} {}", format_number(*a));
            }
            out.push('\n');
        }
    }
    if in_int {
        let _ = writeln!(out, " M{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    if problem.objective_constant != 0.0 {
        let _ = writeln!(out, " {RHS_SET} {OBJ_ROW} {}", format_number(-problem.objective_constant));
    }
    for row in &problem.rows {
        if row.rhs != 0.0 {
            let _ = writeln!(out, " {RHS_SET} {} {}", row.name, format_number(row.rhs));
        }
    }

    let mut bounds = String::new();
    for col in &problem.columns {
        let (lo, up) = (col.lower, col.upper);
        let name = &col.name;
        if lo == up {
            let _ = writeln!(bounds, " FX {BOUND_SET} {name} {}", format_number(lo));
            continue;
        }
        match (lo == f64::NEG_INFINITY, up == f64::INFINITY) {
            (true, true) => {
                let _ = writeln!(bounds, " FR {BOUND_SET} {name}");
            }
            (true, false) => {
                let _ = writeln!(bounds, " MI {BOUND_SET} {name}");
                let _ = writeln!(bounds, " UP {BOUND_SET} {name} {}", format_number(up));
            }
            (false, up_inf) => {
                if lo != 0.0 {
                    let _ = writeln!(bounds, " LO {BOUND_SET} {name} {}", format_number(lo));
                }
                if !up_inf {
                    let _ = writeln!(bounds, " UP {BOUND_SET} {name} {}", format_number(up));
                } else if col.kind.is_integral() {
                    let _ = writeln!(bounds, " PL {BOUND_SET} {name}");
                }
            }
        }
    }
    if !bounds.is_empty() {
        out.push_str("BOUNDS\n");
        out.push_str(&bounds);
    }
    out.push_str("ENDATA\n");
    out
}

pub fn write_mps(problem: &Problem, path: &Path) -> Result<(), MpsError> {
    std::fs::write(path, to_mps_string(problem))?;
    Ok(())
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

pub fn parse_mps(text: &str) -> Result<Problem, MpsError> {
    let mut problem = Problem::new("");
    let mut section = Section::None;
    let mut obj_name: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut row_coeffs: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut integer = false;
    let mut explicit_bounds: Vec<bool> = Vec::new();
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let syntax = |reason: String| MpsError::Syntax { line, reason };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with([' ', '\t']) {
            match tokens[0] {
                "NAME" => problem.name = tokens.get(1).unwrap_or(&"").to_string(),
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(MpsError::Unsupported { line, section: other.to_string() }),
            }
            continue;
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| syntax(format!("bad number {s:?}")));
        match section {
            Section::None => return Err(syntax("data before a section header".into())),
            Section::Rows => {
                let [kind, name] = tokens[..] else { return Err(syntax("expected: type name".into())) };
                let relation = match kind {
                    "N" => {
                        if obj_name.is_none() {
                            obj_name = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Relation::Le,
                    "G" => Relation::Ge,
                    "E" => Relation::Eq,
                    _ => return Err(syntax(format!("unknown row type {kind}"))),
                };
                row_index.insert(name.to_string(), problem.rows.len());
                problem.rows.push(crate::solver::Row { name: name.to_string(), coeffs: Vec::new(), relation, rhs: 0.0 });
                row_coeffs.push(Vec::new());
            }
            Section::Columns => {
                if tokens.len() == 3 && tokens[1] == "'MARKER'" {
                    match tokens[2] {
                        "'INTORG'" => integer = true,
                        "'INTEND'" => integer = false,
                        m => return Err(syntax(format!("unknown marker {m}"))),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(syntax("expected: column row value [row value]".into()));
                }
                let name = tokens[0];
                let j = match col_index.get(name) {
                    Some(&j) => j,
                    None => {
                        let kind = if integer { VarKind::Integer } else { VarKind::Continuous };
                        problem.columns.push(crate::solver::Column {
                            name: name.to_string(),
                            kind,
                            lower: 0.0,
                            upper: f64::INFINITY,
                        });
                        explicit_bounds.push(false);
                        col_index.insert(name.to_string(), problem.columns.len() - 1);
                        problem.columns.len() - 1
                    }
                };
                for pair in tokens[1..].chunks(2) {
                    let v = num(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        objective.push((j, v));
                    } else {
                        let i = *row_index.get(pair[0]).ok_or_else(|| syntax(format!("unknown row {}", pair[0])))?;
                        row_coeffs[i].push((j, v));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(syntax("expected: set row value [row value]".into()));
                }
                for pair in tokens[1..].chunks(2) {
                    let v = num(pair[1])?;
                    if Some(pair[0]) == obj_name.as_deref() {
                        problem.objective_constant = -v;
                    } else {
                        let i = *row_index.get(pair[0]).ok_or_else(|| syntax(format!("unknown row {}", pair[0])))?;
                        problem.rows[i].rhs = v;
                    }
                }
            }
            Section::Bounds => {
                if tokens.len() < 3 {
                    return Err(syntax("expected: type set column [value]".into()));
                }
                let j = *col_index.get(tokens[2]).ok_or_else(|| syntax(format!("unknown column {}", tokens[2])))?;
                let value = || tokens.get(3).ok_or_else(|| syntax("missing bound value".into())).and_then(|s| num(s));
                let col = &mut problem.columns[j];
                explicit_bounds[j] = true;
                match tokens[0] {
                    "UP" => col.upper = value()?,
                    "LO" => col.lower = value()?,
                    "FX" => {
                        let v = value()?;
                        col.lower = v;
                        col.upper = v;
                    }
                    "FR" => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    "MI" => col.lower = f64::NEG_INFINITY,
                    "PL" => col.upper = f64::INFINITY,
                    "BV" => {
                        col.kind = VarKind::Binary;
                        col.lower = 0.0;
                        col.upper = 1.0;
                    }
                    "LI" => {
                        col.kind = VarKind::Integer;
                        col.lower = value()?;
                    }
                    "UI" => {
                        col.kind = VarKind::Integer;
                        col.upper = value()?;
                    }
                    t => return Err(syntax(format!("unknown bound type {t}"))),
                }
            }
        }
    }
    if !ended {
        return Err(MpsError::Truncated);
    }
    for (j, col) in problem.columns.iter_mut().enumerate() {
        if col.kind == VarKind::Integer {
            if !explicit_bounds[j] {
                col.upper = 1.0;
            }
            if col.lower == 0.0 && col.upper == 1.0 {
                col.kind = VarKind::Binary;
            }
        }
    }
    for (row, coeffs) in problem.rows.iter_mut().zip(row_coeffs) {
        row.coeffs = crate::solver::normalize_coeffs(coeffs);
    }
    problem.objective = crate::solver::normalize_coeffs(objective);
    Ok(problem)
}

pub fn read_mps(path: &Path) -> Result<Problem, MpsError> {
    parse_mps(&std::fs::read_to_string(path)?)
}

/// LP-format names may not contain brackets or dashes in every reader.
fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '[' => '(',
            ']' => ')',
            '-' => '_',
            c => c,
        })
        .collect()
}

fn lp_terms(out: &mut String, terms: &[(usize, f64)], problem: &Problem) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (k, &(j, a)) in terms.iter().enumerate() {
        if k > 0 && k % 6 == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", format_number(a.abs()), lp_name(&problem.columns[j].name));
    }
}

pub fn to_lp_string(problem: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", problem.name);
    out.push_str("Minimize\n obj:");
    lp_terms(&mut out, &problem.objective, problem);
    if problem.objective_constant != 0.0 {
        let _ = write!(out, " + {}", format_number(problem.objective_constant));
    }
    out.push_str("\nSubject To\n");
    for row in &problem.rows {
        let _ = write!(out, " {}:", lp_name(&row.name));
        lp_terms(&mut out, &row.coeffs, problem);
        let _ = writeln!(out, " {} {}", row.relation, format_number(row.rhs));
    }
    out.push_str("Bounds\n");
    for col in &problem.columns {
        let name = lp_name(&col.name);
        match (col.lower, col.upper) {
            (l, u) if l == u => {
                let _ = writeln!(out, " {name} = {}", format_number(l));
            }
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " {name} free");
            }
            (l, u) => {
                let lo = if l == f64::NEG_INFINITY { "-inf".to_string() } else { format_number(l) };
                let up = if u == f64::INFINITY { "+inf".to_string() } else { format_number(u) };
                let _ = writeln!(out, " {lo} <= {name} <= {up}");
            }
        }
    }
    for (header, kind) in [("Binaries", VarKind::Binary), ("Generals", VarKind::Integer)] {
        let names: Vec<String> =
            problem.columns.iter().filter(|c| c.kind == kind).map(|c| lp_name(&c.name)).collect();
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{header}");
        for chunk in names.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trivial() -> Problem {
        let mut p = Problem::new("trivial");
        let x = p.add_column("x", VarKind::Continuous, 0.0, f64::INFINITY);
        p.add_row("c1", vec![(x, 1.0)], Relation::Ge, 3.0);
        p.set_objective(vec![(x, 1.0)], 0.0);
        p
    }

    #[test]
    fn trivial_golden() {
        let golden = "NAME trivial\nROWS\n N obj\n G c1\nCOLUMNS\n x obj 1 c1 1\nRHS\n rhs c1 3\nENDATA\n";
        assert_eq!(to_mps_string(&trivial()), golden);
    }

    #[test]
    fn no_constraints() {
        let mut p = Problem::new("empty");
        let x = p.add_column("x", VarKind::Continuous, 0.0, 5.0);
        p.set_objective(vec![(x, -1.0)], 0.0);
        let text = to_mps_string(&p);
        assert!(text.contains("ROWS\n N obj\nCOLUMNS\n"));
        assert_eq!(parse_mps(&text).unwrap(), p);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [1.0, -2.5, 0.1, 1e-7, 3.3333333333333335, 1e20, -7.25e-12, 0.40625, 123456.789] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(1e-7), "1e-7");
    }

    #[test]
    fn round_trip_with_markers_and_bounds() {
        let mut p = Problem::new("rt");
        let a = p.add_column("a", VarKind::Continuous, -1.5, 4.0);
        let b = p.add_column("b", VarKind::Binary, 0.0, 1.0);
        let c = p.add_column("c", VarKind::Binary, 0.0, 1.0);
        let d = p.add_column("d", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        let e = p.add_column("e", VarKind::Integer, 0.0, 7.0);
        let f = p.add_column("f", VarKind::Continuous, 2.0, 2.0);
        p.add_row("r1", vec![(a, 1.0), (b, 2.0), (d, -0.1)], Relation::Le, 4.0);
        p.add_row("r2", vec![(c, 1.0), (e, 3.0)], Relation::Eq, 1.0);
        p.add_row("r3", vec![(a, 1.0), (f, 1e-8)], Relation::Ge, -2.0);
        p.set_objective(vec![(a, 1.0), (e, -0.25)], 1.5);
        let text = to_mps_string(&p);
        assert_eq!(text.matches("'INTORG'").count(), 2);
        let q = parse_mps(&text).unwrap();
        assert_eq!(q, p);
        assert_eq!(to_mps_string(&q), text);
    }

    #[test]
    fn rejects_ranges_and_truncation() {
        let text = "NAME t\nROWS\n N obj\n L c\nCOLUMNS\n x c 1\nRHS\n rhs c 1\nRANGES\n rng c 2\nENDATA\n";
        assert!(matches!(parse_mps(text), Err(MpsError::Unsupported { .. })));
        assert!(matches!(parse_mps("NAME t\nROWS\n N obj\n"), Err(MpsError::Truncated)));
    }

    #[test]
    fn lp_format_lists_sections() {
        let lp = to_lp_string(&trivial());
        assert!(lp.contains("Minimize\n obj: + 1 x\nSubject To\n c1: + 1 x >= 3\n"));
        assert!(lp.ends_with("End\n"));
    }
}
