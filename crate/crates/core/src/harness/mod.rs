//! Scenario sweeps, result tables and run comparison.

pub mod cli;
mod compare;
mod scenario;

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::delay_approx::{DelayError, PiecewiseDelay};
use crate::model::{build_model, extract_report, DemandSet, MilpModel, ModelError, PowerBreakdown, Weights};
use crate::solver::{solve_milp, SolveResult};
use crate::topology::{build_p2p_pon, Topology, TopologyError};

pub use compare::{compare_runs, weight_dominance, DominanceRow, SavingsRow, SavingsTable};
pub use scenario::{Architecture, OutputPaths, Scenario, SolverLimits, UserPlacement, DEFAULT_DRR};

/// Result CSV header, in column order.
pub const CSV_COLUMNS: [&str; 19] = [
    "demand_gflops",
    "status",
    "gap",
    "tpc_w",
    "pc_w",
    "pn_w",
    "pap_w",
    "pcp_w",
    "ar_w",
    "ay_w",
    "agb_w",
    "pr_w",
    "py_w",
    "pgb_w",
    "ponu_w",
    "pq_w",
    "td_s",
    "assignments",
    "solve_ms",
];

/// Residual tolerance used when decoding solver output.
pub const REPORT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error("sweeps differ: {0}")]
    MismatchedSweeps(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed result table: {0}")]
    Table(String),
}

impl HarnessError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }
}

/// One sweep point's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub demand_gflops: f64,
    /// Solver status, or `error` when the point could not be built.
    pub status: String,
    pub gap: Option<f64>,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub power: Option<PowerBreakdown>,
    pub td: Option<f64>,
    #[serde(default)]
    pub user_delay: Vec<f64>,
    /// `u:d` pairs joined by `;`.
    pub assignments: String,
    #[serde(default)]
    pub active_nodes: Vec<String>,
    pub solve_ms: f64,
    #[serde(default)]
    pub nodes: u64,
    /// Lower bound on TPC from processing idle power alone.
    pub tpc_floor: Option<f64>,
    #[serde(default)]
    pub model_hash: String,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl ResultRow {
    fn failed(demand: f64, why: String) -> Self {
        ResultRow {
            demand_gflops: demand,
            status: "error".into(),
            gap: None,
            objective: None,
            best_bound: None,
            power: None,
            td: None,
            user_delay: Vec::new(),
            assignments: String::new(),
            active_nodes: Vec::new(),
            solve_ms: 0.0,
            nodes: 0,
            tpc_floor: None,
            model_hash: String::new(),
            diagnostics: vec![why],
        }
    }

    /// Objective minus best bound, the absolute optimality gap.
    pub fn abs_gap(&self) -> Option<f64> {
        Some((self.objective? - self.best_bound?).max(0.0))
    }

    pub fn hit_limit(&self) -> bool {
        self.status == "limit-reached"
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub scenario: String,
    pub weights: Option<Weights>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let table = |e: csv::Error| HarnessError::Table(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS).map_err(table)?;
        for r in &self.rows {
            let mut rec = vec![format!("{}", r.demand_gflops), r.status.clone(), r.gap.map_or(String::new(), |g| format!("{g:.3e}"))];
            match &r.power {
                Some(p) => rec.extend(p.entries().iter().map(|(_, v)| format!("{v:.9}"))),
                None => rec.extend(std::iter::repeat_n(String::new(), 13)),
            }
            rec.push(r.td.map_or(String::new(), |t| format!("{t:.9e}")));
            rec.push(r.assignments.clone());
            rec.push(format!("{:.1}", r.solve_ms));
            w.write_record(&rec).map_err(table)?;
        }
        w.flush().map_err(|e| HarnessError::Table(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads a table written by [`ResultTable::write_csv`]. Columns not in
    /// the CSV (bounds, per-user delays) come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, HarnessError> {
        let table = |e: String| HarnessError::Table(e);
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers().map_err(|e| table(e.to_string()))?.iter().map(str::to_string).collect();
        if header != CSV_COLUMNS {
            return Err(table(format!("unexpected header {}", header.join(","))));
        }
        let num = |s: &str| -> Result<Option<f64>, HarnessError> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| table(format!("bad number {s:?}")))
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| table(e.to_string()))?;
            let f: Vec<&str> = rec.iter().collect();
            let demand = num(f[0])?.ok_or_else(|| table("missing demand".into()))?;
            let mut row = ResultRow::failed(demand, String::new());
            row.diagnostics.clear();
            row.status = f[1].to_string();
            row.gap = num(f[2])?;
            let vals: Vec<Option<f64>> = f[3..16].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            if vals.iter().all(Option::is_some) {
                let v: Vec<f64> = vals.into_iter().map(Option::unwrap).collect();
                row.power = Some(PowerBreakdown {
                    tpc: v[0],
                    pc: v[1],
                    pn: v[2],
                    pap: v[3],
                    pcp: v[4],
                    ar: v[5],
                    ay: v[6],
                    agb: v[7],
                    pr: v[8],
                    py: v[9],
                    pgb: v[10],
                    ponu: v[11],
                    pq: v[12],
                });
            }
            row.td = num(f[16])?;
            row.assignments = f[17].to_string();
            row.solve_ms = num(f[18])?.unwrap_or(0.0);
            rows.push(row);
        }
        Ok(ResultTable { scenario: String::new(), weights: None, rows })
    }

    pub fn read_csv_file(path: &Path) -> Result<Self, HarnessError> {
        let f = fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), HarnessError> {
        let f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        self.write_csv(f)
    }

    pub fn write_json_file(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self).expect("table serializes");
        fs::write(path, text).map_err(|e| HarnessError::io(path, e))
    }
}

/// Topology plus delay curves shared by every point of a sweep.
pub struct Instance {
    pub topology: Topology,
    pub pw: Vec<PiecewiseDelay>,
}

pub fn build_instance(scenario: &Scenario, catalog: &Catalog) -> Result<Instance, HarnessError> {
    scenario.validate()?;
    let topology = build_p2p_pon(scenario.rooms, &scenario.placement(), catalog, &scenario.links, None)?;
    let pw = scenario.delay.for_topology(&topology)?;
    Ok(Instance { topology, pw })
}

/// Model of one sweep point.
pub fn build_point(
    scenario: &Scenario,
    instance: &Instance,
    catalog: &Catalog,
    demand: f64,
) -> Result<MilpModel, HarnessError> {
    if !(demand > 0.0 && demand.is_finite()) {
        return Err(HarnessError::Invalid(format!("demand {demand} must be positive")));
    }
    let demands = DemandSet::uniform(&instance.topology, demand, scenario.drr);
    Ok(build_model(&instance.topology, &demands, catalog, Some(&instance.pw), scenario.weights, &scenario.model)?)
}

/// Cheapest idle power of any set of processing nodes whose capacities
/// cover `total` GFLOPs; every feasible placement pays at least this.
/// `None` if no set covers it.
pub fn idle_floor(capacities_idle: &[(f64, f64)], total: f64) -> Option<f64> {
    // Exact over subsets for the small node counts of P2P-PON buildings,
    // otherwise the cheapest single idle power.
    let n = capacities_idle.len();
    if n > 20 {
        let cap: f64 = capacities_idle.iter().map(|c| c.0).sum();
        return (cap >= total).then(|| capacities_idle.iter().map(|c| c.1).fold(f64::INFINITY, f64::min));
    }
    let mut best: Option<f64> = None;
    for mask in 1u32..(1 << n) {
        let (mut cap, mut idle) = (0.0, 0.0);
        for (i, &(c, p)) in capacities_idle.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cap += c;
                idle += p;
            }
        }
        if cap >= total && best.is_none_or(|b| idle < b) {
            best = Some(idle);
        }
    }
    best
}

/// Solves one sweep point; build failures become `error` rows.
pub fn run_point(scenario: &Scenario, instance: &Instance, catalog: &Catalog, demand: f64) -> ResultRow {
    let model = match build_point(scenario, instance, catalog, demand) {
        Ok(m) => m,
        Err(e) => return ResultRow::failed(demand, e.to_string()),
    };
    let result = solve_milp(&model.problem, &scenario.limits.milp_options());
    row_from_result(&model, &result, demand)
}

pub fn row_from_result(model: &MilpModel, result: &SolveResult, demand: f64) -> ResultRow {
    let procs: Vec<(f64, f64)> = model.processing.iter().map(|p| (p.capacity, p.idle)).collect();
    let mut row = ResultRow::failed(demand, String::new());
    row.diagnostics = result.diagnostics.clone();
    row.status = result.status.as_str().to_string();
    row.gap = result.gap;
    row.objective = result.objective;
    row.best_bound = result.best_bound.is_finite().then_some(result.best_bound);
    row.solve_ms = result.stats.wall_ms;
    row.nodes = result.stats.nodes;
    row.tpc_floor = idle_floor(&procs, model.demands.total_demand());
    row.model_hash = model.hash.clone();
    if let Some(x) = &result.solution {
        match extract_report(model, x, REPORT_TOL) {
            Ok(rep) => {
                if !rep.feasible {
                    row.diagnostics.push(format!("solution flagged: {:?}", rep.residuals.flagged()));
                }
                row.assignments = rep.assignment_string();
                row.active_nodes = rep.active_nodes;
                row.power = Some(rep.power);
                row.td = rep.td;
                row.user_delay = rep.user_delay;
            }
            Err(e) => row.diagnostics.push(e.to_string()),
        }
    }
    row
}

/// Runs every sweep point in order, writing the configured outputs.
pub fn run_scenario(scenario: &Scenario, catalog: &Catalog) -> Result<ResultTable, HarnessError> {
    let instance = build_instance(scenario, catalog)?;
    let rows = scenario.demand_sweep.iter().map(|&d| run_point(scenario, &instance, catalog, d)).collect();
    let table = ResultTable { scenario: scenario.name.clone(), weights: Some(scenario.weights), rows };
    if let Some(p) = &scenario.output.csv {
        table.write_csv_file(p)?;
    }
    if let Some(p) = &scenario.output.json {
        table.write_json_file(p)?;
    }
    Ok(table)
}

/// Parses `lo:hi[:step]` (step defaults to 1) into an inclusive sweep.
pub fn parse_demand_range(spec: &str) -> Result<Vec<f64>, HarnessError> {
    let bad = || HarnessError::Invalid(format!("demand range {spec:?} is not lo:hi[:step]"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let (lo, hi, step) = match parts.as_slice() {
        [lo, hi] => (*lo, *hi, 1.0),
        [lo, hi, step] => (*lo, *hi, *step),
        _ => return Err(bad()),
    };
    if !(lo > 0.0 && hi >= lo && step > 0.0) {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}
