//! Bounded-variable revised primal simplex.
//!
//! Computational form: `A x + s = 0` where every row gets a logical `s_i`
//! whose bounds encode the row relation. The basis inverse is kept in
//! product form and rebuilt from scratch every `refactor_every` pivots.

use super::problem::{Problem, Relation};

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    pub max_iterations: usize,
    /// Non-improving iterations before switching to Bland's rule.
    pub stall_limit: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            pivot_tol: 1e-9,
            refactor_every: 100,
            max_iterations: 500_000,
            stall_limit: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values in original units (meaningful when optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub bland_switches: usize,
}

/// Scaled, column-major copy of a problem that can be solved repeatedly
/// under different column bounds.
#[derive(Debug, Clone)]
pub struct ScaledLp {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    cost: Vec<f64>,
    cost_orig: Vec<f64>,
    obj_const: f64,
    /// Activity range of each row, `lo ≤ a_i x ≤ hi`, original units.
    row_lo: Vec<f64>,
    row_hi: Vec<f64>,
}

fn pow2_round(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

impl ScaledLp {
    pub fn new(problem: &Problem) -> Self {
        let m = problem.rows.len();
        let n = problem.columns.len();
        let mut counts = vec![0usize; n];
        for row in &problem.rows {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_start = vec![0usize; n + 1];
        for j in 0..n {
            col_start[j + 1] = col_start[j] + counts[j];
        }
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0f64; nnz];
        let mut fill = col_start.clone();
        for (i, row) in problem.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        // Geometric scaling, a few alternating passes, powers of two only.
        let mut row_scale = vec![1.0f64; m];
        let mut col_scale = vec![1.0f64; n];
        for _ in 0..6 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0f64; m];
            for j in 0..n {
                for k in col_start[j]..col_start[j + 1] {
                    let v = (col_val[k] * col_scale[j]).abs();
                    let i = col_row[k];
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row_scale[i] = pow2_round(1.0 / (rmin[i] * rmax[i]).sqrt());
                }
            }
            for j in 0..n {
                let mut cmin = f64::INFINITY;
                let mut cmax = 0.0f64;
                for k in col_start[j]..col_start[j + 1] {
                    let v = (col_val[k] * row_scale[col_row[k]]).abs();
                    cmin = cmin.min(v);
                    cmax = cmax.max(v);
                }
                if cmax > 0.0 {
                    col_scale[j] = pow2_round(1.0 / (cmin * cmax).sqrt());
                }
            }
        }
        for j in 0..n {
            for k in col_start[j]..col_start[j + 1] {
                col_val[k] *= row_scale[col_row[k]] * col_scale[j];
            }
        }

        let mut cost_orig = vec![0.0; n];
        for &(j, c) in &problem.objective {
            cost_orig[j] += c;
        }
        let cmax = (0..n).fold(0.0f64, |a, j| a.max((cost_orig[j] * col_scale[j]).abs()));
        let obj_scale = if cmax > 0.0 { pow2_round(1.0 / cmax) } else { 1.0 };
        let cost = (0..n).map(|j| cost_orig[j] * col_scale[j] * obj_scale).collect();

        let mut row_lo = vec![f64::NEG_INFINITY; m];
        let mut row_hi = vec![f64::INFINITY; m];
        for (i, row) in problem.rows.iter().enumerate() {
            match row.relation {
                Relation::Le => row_hi[i] = row.rhs,
                Relation::Ge => row_lo[i] = row.rhs,
                Relation::Eq => {
                    row_lo[i] = row.rhs;
                    row_hi[i] = row.rhs;
                }
            }
        }

        ScaledLp {
            m,
            n,
            col_start,
            col_row,
            col_val,
            row_scale,
            col_scale,
            cost,
            cost_orig,
            obj_const: problem.objective_constant,
            row_lo,
            row_hi,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }


    /// Solves with the given structural bounds (original units).
    pub fn solve(&self, lower: &[f64], upper: &[f64], opts: &LpOptions) -> LpSolution {
        assert_eq!(lower.len(), self.n);
        assert_eq!(upper.len(), self.n);
        let mut w = Work::new(self, lower, upper, opts);
        let status = w.run();
        let x: Vec<f64> = (0..self.n).map(|j| w.x[j] * self.col_scale[j]).collect();
        let objective = self.obj_const + (0..self.n).map(|j| self.cost_orig[j] * x[j]).sum::<f64>();
        LpSolution { status, x, objective, iterations: w.iterations, bland_switches: w.bland_switches }
    }
}

struct Eta {
    pivot: usize,
    pivot_val: f64,
    entries: Vec<(usize, f64)>,
}

struct Work<'a> {
    lp: &'a ScaledLp,
    opts: &'a LpOptions,
    nv: usize,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Position in the basis, or `usize::MAX` for nonbasic.
    pos: Vec<usize>,
    etas: Vec<Eta>,
    since_refactor: usize,
    iterations: usize,
    bland_switches: usize,
}

const NONBASIC: usize = usize::MAX;
/// Bland's rule ignores pivot size; tiny pivots under it wreck the
/// factorization, so it only considers pivots at least this large.
const BLAND_PIVOT_TOL: f64 = 1e-7;
/// Relative disagreement between the column and row views of a pivot
/// that triggers a fresh factorization.
const PIVOT_CHECK_TOL: f64 = 1e-7;

impl<'a> Work<'a> {
    fn new(lp: &'a ScaledLp, lower: &[f64], upper: &[f64], opts: &'a LpOptions) -> Self {
        let (m, n) = (lp.m, lp.n);
        let nv = n + m;
        let mut lo = vec![0.0; nv];
        let mut up = vec![0.0; nv];
        for j in 0..n {
            lo[j] = lower[j] / lp.col_scale[j];
            up[j] = upper[j] / lp.col_scale[j];
        }
        for i in 0..m {
            let r = lp.row_scale[i];
            lo[n + i] = -lp.row_hi[i] * r;
            up[n + i] = -lp.row_lo[i] * r;
        }
        let mut x = vec![0.0; nv];
        for j in 0..n {
            x[j] = nonbasic_value(lo[j], up[j]);
        }
        let basis: Vec<usize> = (n..nv).collect();
        let mut pos = vec![NONBASIC; nv];
        for (p, &v) in basis.iter().enumerate() {
            pos[v] = p;
        }
        let mut w = Work {
            lp,
            opts,
            nv,
            lo,
            up,
            x,
            basis,
            pos,
            etas: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            bland_switches: 0,
        };
        w.recompute_basic();
        w
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.lp.n {
            for k in self.lp.col_start[j]..self.lp.col_start[j + 1] {
                out[self.lp.col_row[k]] = self.lp.col_val[k];
            }
        } else {
            out[j - self.lp.n] = 1.0;
        }
    }

    fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let vp = v[eta.pivot];
            if vp != 0.0 {
                let t = vp / eta.pivot_val;
                v[eta.pivot] = t;
                for &(i, a) in &eta.entries {
                    v[i] -= a * t;
                }
            }
        }
    }

    fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = y[eta.pivot];
            for &(i, a) in &eta.entries {
                s -= y[i] * a;
            }
            y[eta.pivot] = s / eta.pivot_val;
        }
    }

    fn push_eta(&mut self, pivot: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, a)| i != pivot && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta { pivot, pivot_val: alpha[pivot], entries });
    }

    fn recompute_basic(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        let mut rhs = vec![0.0; m];
        for j in 0..self.nv {
            if self.pos[j] != NONBASIC || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            if j < n {
                for k in self.lp.col_start[j]..self.lp.col_start[j + 1] {
                    rhs[self.lp.col_row[k]] -= self.lp.col_val[k] * xj;
                }
            } else {
                rhs[j - n] -= xj;
            }
        }
        self.ftran(&mut rhs);
        for p in 0..m {
            self.x[self.basis[p]] = rhs[p];
        }
    }

    /// Rebuilds the product form from the identity for the current basic set.
    /// Columns that turn out dependent are dropped and replaced by logicals.
    fn reinvert(&mut self) {
        let (m, n) = (self.lp.m, self.lp.n);
        self.etas.clear();
        self.since_refactor = 0;
        let mut structurals: Vec<usize> = self.basis.iter().copied().filter(|&v| v < n).collect();
        structurals.sort_by_key(|&j| (self.lp.col_start[j + 1] - self.lp.col_start[j], j));
        let mut row_taken = vec![false; m];
        for &v in &self.basis {
            if v >= n {
                row_taken[v - n] = true;
            }
        }
        let mut new_basis = vec![NONBASIC; m];
        for i in 0..m {
            if row_taken[i] {
                new_basis[i] = n + i;
            }
        }
        let mut col = vec![0.0; m];
        for &j in &structurals {
            self.column(j, &mut col);
            self.ftran(&mut col);
            let mut best = NONBASIC;
            let mut best_abs = 0.0;
            for i in 0..m {
                if !row_taken[i] && col[i].abs() > best_abs {
                    best_abs = col[i].abs();
                    best = i;
                }
            }
            if best == NONBASIC || best_abs < self.opts.pivot_tol {
                self.pos[j] = NONBASIC;
                self.x[j] = nonbasic_value(self.lo[j], self.up[j]);
                continue;
            }
            self.push_eta(best, &col);
            row_taken[best] = true;
            new_basis[best] = j;
        }
        for i in 0..m {
            if new_basis[i] == NONBASIC {
                new_basis[i] = n + i;
            }
        }
        for &v in &self.basis {
            self.pos[v] = NONBASIC;
        }
        for (p, &v) in new_basis.iter().enumerate() {
            self.pos[v] = p;
        }
        // Logicals dropped from the basis by the swap above sit at a bound.
        for i in 0..m {
            let v = n + i;
            if self.pos[v] == NONBASIC {
                self.x[v] = nonbasic_value(self.lo[v], self.up[v]);
            }
        }
        self.basis = new_basis;
        self.recompute_basic();
    }

    fn infeasibility(&self) -> (f64, f64) {
        let tol = self.opts.feas_tol;
        let mut sum = 0.0;
        let mut max = 0.0f64;
        for &v in &self.basis {
            let d = if self.x[v] < self.lo[v] - tol {
                self.lo[v] - self.x[v]
            } else if self.x[v] > self.up[v] + tol {
                self.x[v] - self.up[v]
            } else {
                0.0
            };
            sum += d;
            max = max.max(d);
        }
        (sum, max)
    }

    fn phase_objective(&self, phase1: bool) -> f64 {
        if phase1 {
            self.infeasibility().0
        } else {
            (0..self.lp.n).map(|j| self.lp.cost[j] * self.x[j]).sum()
        }
    }

    fn run(&mut self) -> LpStatus {
        let (m, n) = (self.lp.m, self.lp.n);
        // Fixed or empty-range structurals: reject inverted bounds upfront.
        for j in 0..self.nv {
            if self.lo[j] > self.up[j] + self.opts.feas_tol * (1.0 + self.lo[j].abs()) {
                return LpStatus::Infeasible;
            }
        }
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut rho = vec![0.0; m];
        let mut rejected: Vec<usize> = Vec::new();
        let mut bland = false;
        let mut best_obj = f64::INFINITY;
        let mut stall = 0usize;
        let mut last_phase1 = true;
        let mut confirmed = false;

        loop {
            if self.iterations >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.reinvert();
            }
            let phase1 = self.infeasibility().1 > 0.0;
            if phase1 != last_phase1 {
                last_phase1 = phase1;
                best_obj = f64::INFINITY;
                stall = 0;
                bland = false;
            }

            // Duals.
            for p in 0..m {
                let v = self.basis[p];
                y[p] = if phase1 {
                    if self.x[v] < self.lo[v] - self.opts.feas_tol {
                        -1.0
                    } else if self.x[v] > self.up[v] + self.opts.feas_tol {
                        1.0
                    } else {
                        0.0
                    }
                } else if v < n {
                    self.lp.cost[v]
                } else {
                    0.0
                };
            }
            self.btran(&mut y);

            // Pricing.
            let mut entering = NONBASIC;
            let mut enter_d = 0.0;
            let mut best_score = 0.0;
            for j in 0..self.nv {
                if self.pos[j] != NONBASIC || self.lo[j] == self.up[j] {
                    continue;
                }
                let d = if j < n {
                    let mut d = if phase1 { 0.0 } else { self.lp.cost[j] };
                    for k in self.lp.col_start[j]..self.lp.col_start[j + 1] {
                        d -= y[self.lp.col_row[k]] * self.lp.col_val[k];
                    }
                    d
                } else {
                    -y[j - n]
                };
                let can_up = self.x[j] < self.up[j];
                let can_down = self.x[j] > self.lo[j];
                let eligible = (d < -self.opts.opt_tol && can_up) || (d > self.opts.opt_tol && can_down);
                if !eligible || rejected.contains(&j) {
                    continue;
                }
                if bland {
                    entering = j;
                    enter_d = d;
                    break;
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    entering = j;
                    enter_d = d;
                }
            }

            if entering == NONBASIC {
                // Confirm on a fresh factorization before concluding.
                if !confirmed && !self.etas.is_empty() {
                    self.reinvert();
                    confirmed = true;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            }
            confirmed = false;

            let q = entering;
            let dir = if enter_d < 0.0 { 1.0 } else { -1.0 };
            self.column(q, &mut alpha);
            self.ftran(&mut alpha);

            // Harris two-pass ratio test.
            let tol = self.opts.feas_tol;
            // Distance to the entering variable's opposite bound.
            let range = if dir > 0.0 { self.up[q] - self.x[q] } else { self.x[q] - self.lo[q] };
            let mut theta_max = range;
            for p in 0..m {
                let a = alpha[p];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let v = self.basis[p];
                let delta = -dir * a;
                let xv = self.x[v];
                let r = if phase1 && xv < self.lo[v] - tol {
                    if delta > 0.0 {
                        (self.lo[v] - xv) / delta
                    } else {
                        f64::INFINITY
                    }
                } else if phase1 && xv > self.up[v] + tol {
                    if delta < 0.0 {
                        (xv - self.up[v]) / -delta
                    } else {
                        f64::INFINITY
                    }
                } else if delta < 0.0 {
                    (xv - self.lo[v] + tol) / -delta
                } else {
                    (self.up[v] - xv + tol) / delta
                };
                if r < theta_max {
                    theta_max = r;
                }
            }
            if theta_max == f64::INFINITY {
                if phase1 {
                    // Cannot happen with a correct phase-1 cost; refactor and retry.
                    self.reinvert();
                    self.iterations += 1;
                    continue;
                }
                return LpStatus::Unbounded;
            }

            let mut leave = NONBASIC;
            let mut leave_ratio = f64::INFINITY;
            let mut leave_abs = 0.0;
            let mut bland_leave = NONBASIC;
            let mut bland_ratio = f64::INFINITY;
            for p in 0..m {
                let a = alpha[p];
                if a.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let v = self.basis[p];
                let delta = -dir * a;
                let xv = self.x[v];
                let r = if phase1 && xv < self.lo[v] - tol {
                    if delta > 0.0 {
                        (self.lo[v] - xv) / delta
                    } else {
                        continue;
                    }
                } else if phase1 && xv > self.up[v] + tol {
                    if delta < 0.0 {
                        (xv - self.up[v]) / -delta
                    } else {
                        continue;
                    }
                } else if delta < 0.0 {
                    if self.lo[v] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((xv - self.lo[v]) / -delta).max(0.0)
                } else {
                    if self.up[v] == f64::INFINITY {
                        continue;
                    }
                    ((self.up[v] - xv) / delta).max(0.0)
                };
                if r > theta_max {
                    continue;
                }
                if a.abs() > leave_abs {
                    leave = p;
                    leave_ratio = r;
                    leave_abs = a.abs();
                }
                // Bland's smallest-index rule, restricted to stable pivots.
                if bland
                    && a.abs() >= BLAND_PIVOT_TOL
                    && (bland_leave == NONBASIC
                        || r < bland_ratio - 1e-12
                        || (r <= bland_ratio + 1e-12 && v < self.basis[bland_leave]))
                {
                    bland_leave = p;
                    bland_ratio = r;
                }
            }
            if bland_leave != NONBASIC {
                leave = bland_leave;
                leave_ratio = bland_ratio;
            }

            let flip = leave == NONBASIC || (range.is_finite() && range <= leave_ratio);
            if !flip {
                // Recompute the pivot from the row side; disagreement means
                // the product form has lost accuracy.
                rho.iter_mut().for_each(|v| *v = 0.0);
                rho[leave] = 1.0;
                self.btran(&mut rho);
                let from_row = if q < n {
                    (self.lp.col_start[q]..self.lp.col_start[q + 1])
                        .map(|k| rho[self.lp.col_row[k]] * self.lp.col_val[k])
                        .sum::<f64>()
                } else {
                    rho[q - n]
                };
                let a = alpha[leave];
                let diff = (from_row - a).abs();
                if diff > PIVOT_CHECK_TOL * (1.0 + a.abs()) || diff > 1e-2 * a.abs() || from_row * a <= 0.0 {
                    self.iterations += 1;
                    if self.since_refactor > 0 {
                        self.reinvert();
                    } else {
                        // Unreliable even on a fresh factorization: skip this
                        // entering candidate until the next successful pivot.
                        rejected.push(q);
                    }
                    continue;
                }
            }
            self.iterations += 1;
            if flip {
                // Bound flip of the entering variable.
                let theta = range;
                self.x[q] = if dir > 0.0 { self.up[q] } else { self.lo[q] };
                for p in 0..m {
                    if alpha[p] != 0.0 {
                        self.x[self.basis[p]] -= dir * alpha[p] * theta;
                    }
                }
            } else {
                let theta = leave_ratio;
                self.x[q] += dir * theta;
                for p in 0..m {
                    if alpha[p] != 0.0 {
                        self.x[self.basis[p]] -= dir * alpha[p] * theta;
                    }
                }
                // The leaving variable keeps its updated value, which is
                // within the feasibility tolerance of its bound; snapping it
                // would break `A x + s = 0` and let the objective drift.
                let out = self.basis[leave];
                self.pos[out] = NONBASIC;
                self.basis[leave] = q;
                self.pos[q] = leave;
                self.push_eta(leave, &alpha);
                self.since_refactor += 1;
                rejected.clear();
            }

            // Stall detection for anti-cycling.
            let obj = self.phase_objective(phase1);
            if obj < best_obj - 1e-12 * (1.0 + best_obj.abs().min(1e12)) {
                best_obj = obj;
                stall = 0;
                bland = false;
            } else {
                stall += 1;
                if stall >= self.opts.stall_limit && !bland {
                    bland = true;
                    self.bland_switches += 1;
                }
            }
        }
    }
}

fn nonbasic_value(lo: f64, up: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if up.is_finite() {
        up
    } else {
        0.0
    }
}
