//! Depth-first branch-and-bound with best-bound backtracking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::check::check_solution;
use super::problem::Problem;
use super::propagate::propagate;
use super::simplex::{LpOptions, LpStatus, ScaledLp};
use super::{SolveResult, SolveStats, SolveStatus};

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub gap_tol: f64,
    pub node_limit: u64,
    pub time_limit: Option<Duration>,
    pub int_tol: f64,
    /// Tolerance used to accept an incumbent.
    pub check_tol: f64,
    pub propagate_passes: usize,
    pub lp: LpOptions,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_tol: 1e-6,
            node_limit: 1_000_000,
            time_limit: None,
            int_tol: 1e-6,
            check_tol: 1e-6,
            propagate_passes: 20,
            lp: LpOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    depth: u32,
    bound: f64,
    /// Branching decisions from the root: (column, lower, upper).
    changes: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap order: lowest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

pub fn solve_milp(problem: &Problem, opts: &MilpOptions) -> SolveResult {
    let start = Instant::now();
    let n = problem.columns.len();
    let integral: Vec<bool> = problem.columns.iter().map(|c| c.kind.is_integral()).collect();
    let mut stats = SolveStats::default();
    let finish = |mut r: SolveResult, stats: SolveStats| {
        r.stats = stats;
        r.stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        r
    };

    let mut root_lo: Vec<f64> = problem.columns.iter().map(|c| c.lower).collect();
    let mut root_up: Vec<f64> = problem.columns.iter().map(|c| c.upper).collect();
    if propagate(problem, &mut root_lo, &mut root_up, opts.propagate_passes).is_err() {
        return finish(SolveResult::without_solution(SolveStatus::Infeasible), stats);
    }
    let lp = ScaledLp::new(problem);

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut current = Some(Node { id: 0, depth: 0, bound: f64::NEG_INFINITY, changes: Vec::new() });
    let mut next_id = 1u64;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    // Lowest bound among nodes that left the open set without being resolved
    // to infeasibility: pruned by bound or abandoned after an LP failure.
    let mut closed_min = f64::INFINITY;
    let mut lp_failures = 0usize;
    let mut limit_hit = None;
    let mut lo = vec![0.0; n];
    let mut up = vec![0.0; n];

    while let Some(node) = current.take().or_else(|| heap.pop()) {
        if node.id != 0 {
            let timed_out = opts.time_limit.is_some_and(|t| start.elapsed() >= t);
            if stats.nodes >= opts.node_limit || timed_out {
                limit_hit = Some(if timed_out { "time limit" } else { "node limit" });
                heap.push(node);
                break;
            }
            stats.nodes += 1;
        }
        let prune_tol = |inc: f64| opts.gap_tol * inc.abs().max(1.0);
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - prune_tol(*inc) {
                closed_min = closed_min.min(node.bound);
                stats.record_bound(global_bound(&heap, None, closed_min, incumbent.as_ref()));
                continue;
            }
        }

        lo.copy_from_slice(&root_lo);
        up.copy_from_slice(&root_up);
        for &(j, l, u) in &node.changes {
            lo[j] = l;
            up[j] = u;
        }
        if node.id != 0 && propagate(problem, &mut lo, &mut up, opts.propagate_passes).is_err() {
            stats.record_bound(global_bound(&heap, None, closed_min, incumbent.as_ref()));
            continue;
        }
        let sol = lp.solve(&lo, &up, &opts.lp);
        stats.lp_solves += 1;
        stats.simplex_iterations += sol.iterations as u64;
        stats.bland_switches += sol.bland_switches as u64;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                if node.id == 0 {
                    return finish(SolveResult::without_solution(SolveStatus::Infeasible), stats);
                }
                stats.record_bound(global_bound(&heap, None, closed_min, incumbent.as_ref()));
                continue;
            }
            LpStatus::Unbounded if node.id == 0 => {
                return finish(SolveResult::without_solution(SolveStatus::Unbounded), stats);
            }
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                if node.id == 0 {
                    let mut r = SolveResult::without_solution(SolveStatus::LimitReached);
                    r.diagnostics.push("root relaxation hit the simplex iteration limit".into());
                    return finish(r, stats);
                }
                lp_failures += 1;
                closed_min = closed_min.min(node.bound);
                continue;
            }
        }
        let bound = sol.objective.max(node.bound);
        if node.id == 0 {
            stats.root_bound = Some(sol.objective);
        }
        if let Some((inc, _)) = &incumbent {
            if bound >= inc - prune_tol(*inc) {
                closed_min = closed_min.min(bound);
                stats.record_bound(global_bound(&heap, None, closed_min, incumbent.as_ref()));
                continue;
            }
        }

        // Most fractional integer column, ties to the lowest index.
        let mut branch = None;
        let mut best_dist = opts.int_tol;
        for j in 0..n {
            if !integral[j] {
                continue;
            }
            let f = sol.x[j] - sol.x[j].floor();
            let dist = f.min(1.0 - f);
            if dist > best_dist {
                best_dist = dist;
                branch = Some(j);
            }
        }

        match branch {
            None => {
                match polish(problem, &lp, &lo, &up, &sol.x, &integral, opts, &mut stats) {
                    Some((obj, x)) => {
                        if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                            stats.incumbents.push((stats.nodes, obj));
                            incumbent = Some((obj, x));
                        }
                    }
                    None => {
                        lp_failures += 1;
                        closed_min = closed_min.min(bound);
                    }
                }
            }
            Some(j) => {
                let x = sol.x[j];
                let mut down = node.changes.clone();
                down.push((j, lo[j], x.floor()));
                let mut upc = node.changes;
                upc.push((j, x.ceil(), up[j]));
                let depth = node.depth + 1;
                let down = Node { id: next_id, depth, bound, changes: down };
                let upn = Node { id: next_id + 1, depth, bound, changes: upc };
                next_id += 2;
                // Dive into the up branch: fixing a binary to one commits to a
                // decision and reaches integral leaves far sooner than
                // excluding one option at a time.
                let (first, second) = (upn, down);
                heap.push(second);
                current = Some(first);
            }
        }
        stats.record_bound(global_bound(&heap, current.as_ref(), closed_min, incumbent.as_ref()));
    }

    let open_min = heap.iter().map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let mut best_bound = open_min.min(closed_min);
    if let Some((inc, _)) = &incumbent {
        best_bound = best_bound.min(*inc);
    }
    let mut result = match incumbent {
        Some((obj, x)) => {
            let gap = (obj - best_bound).max(0.0) / obj.abs().max(1.0);
            let status = if gap <= opts.gap_tol {
                SolveStatus::Optimal
            } else if limit_hit.is_some() {
                SolveStatus::LimitReached
            } else {
                SolveStatus::FeasibleGap
            };
            SolveResult {
                status,
                objective: Some(obj),
                best_bound,
                gap: Some(gap),
                solution: Some(x),
                stats: SolveStats::default(),
                diagnostics: Vec::new(),
            }
        }
        None => {
            let status = if limit_hit.is_some() || lp_failures > 0 {
                SolveStatus::LimitReached
            } else {
                SolveStatus::Infeasible
            };
            let mut r = SolveResult::without_solution(status);
            r.best_bound = best_bound;
            r
        }
    };
    if let Some(why) = limit_hit {
        result.diagnostics.push(format!("stopped at {why}"));
    }
    if lp_failures > 0 {
        result.diagnostics.push(format!("{lp_failures} node relaxations failed and were abandoned"));
    }
    finish(result, stats)
}

fn global_bound(heap: &BinaryHeap<Node>, current: Option<&Node>, closed_min: f64, inc: Option<&(f64, Vec<f64>)>) -> f64 {
    let mut b = heap.peek().map_or(f64::INFINITY, |n| n.bound).min(closed_min);
    if let Some(c) = current {
        b = b.min(c.bound);
    }
    if let Some((v, _)) = inc {
        b = b.min(*v);
    }
    b
}

/// Turns an integral relaxation point into a verified incumbent: integers
/// are rounded and fixed, continuous columns re-optimized.
#[allow(clippy::too_many_arguments)]
fn polish(
    problem: &Problem,
    lp: &ScaledLp,
    lo: &[f64],
    up: &[f64],
    x: &[f64],
    integral: &[bool],
    opts: &MilpOptions,
    stats: &mut SolveStats,
) -> Option<(f64, Vec<f64>)> {
    let mut cand = x.to_vec();
    let mut all_fixed = true;
    for j in 0..cand.len() {
        if integral[j] {
            cand[j] = cand[j].round();
            all_fixed &= lo[j] == up[j];
        }
    }
    if all_fixed && check_solution(problem, &cand, opts.check_tol).is_feasible() {
        return Some((problem.objective_value(&cand), cand));
    }
    let mut plo = lo.to_vec();
    let mut pup = up.to_vec();
    for j in 0..cand.len() {
        if integral[j] {
            plo[j] = cand[j];
            pup[j] = cand[j];
        }
    }
    if propagate(problem, &mut plo, &mut pup, opts.propagate_passes).is_ok() {
        let sol = lp.solve(&plo, &pup, &opts.lp);
        stats.lp_solves += 1;
        stats.simplex_iterations += sol.iterations as u64;
        if sol.status == LpStatus::Optimal {
            let mut xs = sol.x;
            for j in 0..xs.len() {
                if integral[j] {
                    xs[j] = cand[j];
                }
            }
            if check_solution(problem, &xs, opts.check_tol).is_feasible() {
                return Some((problem.objective_value(&xs), xs));
            }
        }
    }
    if check_solution(problem, &cand, opts.check_tol).is_feasible() {
        return Some((problem.objective_value(&cand), cand));
    }
    None
}
