//! Embedded LP/MILP solver: bounded revised simplex for relaxations and
//! branch-and-bound on integer columns.

mod bnb;
mod check;
mod problem;
mod propagate;
mod simplex;

use serde::Serialize;

pub use bnb::{solve_milp, MilpOptions};
pub use check::{check_solution, FamilyResidual, ResidualReport};
pub use problem::{family_of, normalize_coeffs, Column, Problem, Relation, Row, VarKind};
pub use propagate::{propagate, Infeasible};
pub use simplex::{LpOptions, LpSolution, LpStatus, ScaledLp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    Unbounded,
    LimitReached,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGap => "feasible-gap",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::LimitReached => "limit-reached",
        }
    }

    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap | SolveStatus::LimitReached)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    /// Branch-and-bound nodes processed, not counting the root.
    pub nodes: u64,
    pub lp_solves: u64,
    pub bland_switches: u64,
    pub wall_ms: f64,
    /// Root relaxation objective after bound tightening.
    pub root_bound: Option<f64>,
    /// Global lower bound after each processed node.
    pub bound_trace: Vec<f64>,
    /// (nodes processed so far, objective) at each incumbent improvement.
    pub incumbents: Vec<(u64, f64)>,
}

impl SolveStats {
    // A proven bound stays valid, so the trace keeps the running maximum;
    // an incumbent accepted within tolerance can sit just below it.
    fn record_bound(&mut self, b: f64) {
        if b.is_finite() {
            let last = self.bound_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
            self.bound_trace.push(b.max(last));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: f64,
    /// `(objective - best_bound) / max(1, |objective|)`.
    pub gap: Option<f64>,
    pub solution: Option<Vec<f64>>,
    pub stats: SolveStats,
    pub diagnostics: Vec<String>,
}

impl SolveResult {
    fn without_solution(status: SolveStatus) -> Self {
        SolveResult {
            status,
            objective: None,
            best_bound: f64::NEG_INFINITY,
            gap: None,
            solution: None,
            stats: SolveStats::default(),
            diagnostics: Vec::new(),
        }
    }
}

/// Solves the continuous relaxation of `problem`.
pub fn solve_lp(problem: &Problem, opts: &LpOptions) -> SolveResult {
    let start = std::time::Instant::now();
    let lp = ScaledLp::new(problem);
    let lo: Vec<f64> = problem.columns.iter().map(|c| c.lower).collect();
    let up: Vec<f64> = problem.columns.iter().map(|c| c.upper).collect();
    let sol = lp.solve(&lo, &up, opts);
    let mut r = match sol.status {
        LpStatus::Optimal => SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(sol.objective),
            best_bound: sol.objective,
            gap: Some(0.0),
            solution: Some(sol.x),
            stats: SolveStats::default(),
            diagnostics: Vec::new(),
        },
        LpStatus::Infeasible => SolveResult::without_solution(SolveStatus::Infeasible),
        LpStatus::Unbounded => SolveResult::without_solution(SolveStatus::Unbounded),
        LpStatus::IterationLimit => {
            let mut r = SolveResult::without_solution(SolveStatus::LimitReached);
            r.diagnostics.push(format!("simplex iteration limit {} reached", opts.max_iterations));
            r
        }
    };
    r.stats.simplex_iterations = sol.iterations as u64;
    r.stats.lp_solves = 1;
    r.stats.bland_switches = sol.bland_switches as u64;
    r.stats.root_bound = r.objective;
    r.stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    r
}
