//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use super::{
    build_instance, build_point, compare_runs, parse_demand_range, row_from_result, run_scenario, HarnessError,
    ResultTable, Scenario,
};
use crate::catalog::{default_catalog, load_catalog_file, Catalog};
use crate::delay_approx::DelayConfig;
use crate::model::mps::{parse_mps, to_lp_string, to_mps_string};
use crate::model::{extract_report, DemandSet, Weights};
use crate::oracle::{enumerate_placements, OracleLimits};
use crate::solver::solve_milp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;

/// Environment variable naming a catalog JSON file to use instead of the
/// embedded defaults.
pub const CATALOG_ENV: &str = "FOGPON_CATALOG";

#[derive(Debug, Parser)]
#[command(name = "fogpon", version, about = "Fog placement MILP over an in-building P2P-PON")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the model of one sweep point and print its size.
    Build {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the model summary as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Solve one sweep point.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the placement report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Cross-check the optimum against brute-force enumeration.
        #[arg(long)]
        oracle_check: bool,
    },
    /// Solve every sweep point and write the result table.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write one sweep point's model as MPS (and optionally LP) text.
    Export {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        mps: PathBuf,
        #[arg(long)]
        lp: Option<PathBuf>,
    },
    /// Write the tangent segments of one link's delay approximation.
    Linearize {
        /// Gbit/s.
        #[arg(long)]
        capacity: f64,
        #[arg(long, default_value_t = 6)]
        segments: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank every placement of one sweep point by brute force.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentage savings of result table A relative to B.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Rooms of the default two-users-per-room scenario, or an override.
    #[arg(long)]
    rooms: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// GFLOPs per user; replaces the sweep with one point.
    #[arg(long)]
    demand: Option<f64>,
    /// `lo:hi[:step]`; replaces the sweep.
    #[arg(long, conflicts_with = "demand")]
    demand_range: Option<String>,
    #[arg(long)]
    gap: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    time_limit_s: Option<f64>,
    /// Reserved; the solver is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario, HarnessError> {
        let mut s = match &self.scenario {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                Scenario::from_json(&text)?
            }
            None => Scenario::per_room("cli", self.rooms.unwrap_or(1), 2, vec![6.0]),
        };
        if let Some(r) = self.rooms {
            s.rooms = r;
        }
        if self.alpha.is_some() || self.beta.is_some() {
            s.weights = Weights { alpha: self.alpha.unwrap_or(s.weights.alpha), beta: self.beta.unwrap_or(s.weights.beta) };
        }
        if let Some(d) = self.demand {
            s.demand_sweep = vec![d];
        }
        if let Some(r) = &self.demand_range {
            s.demand_sweep = parse_demand_range(r)?;
        }
        if let Some(g) = self.gap {
            s.limits.gap = g;
        }
        if let Some(n) = self.node_limit {
            s.limits.node_limit = n;
        }
        if let Some(t) = self.time_limit_s {
            s.limits.time_limit_s = Some(t);
        }
        s.validate()?;
        Ok(s)
    }

    /// The single point a point command works on: `--demand` or the first
    /// sweep value.
    fn point(&self, s: &Scenario) -> Result<f64, HarnessError> {
        s.demand_sweep.first().copied().ok_or_else(|| HarnessError::Invalid("scenario has an empty sweep".into()))
    }
}

fn catalog() -> Result<Catalog, HarnessError> {
    match std::env::var_os(CATALOG_ENV) {
        Some(path) => load_catalog_file(PathBuf::from(path).as_path()).map_err(|e| HarnessError::Invalid(e.to_string())),
        None => Ok(default_catalog()),
    }
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), HarnessError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| HarnessError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Io { .. } => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

#[derive(Serialize)]
struct ModelSummary {
    scenario: String,
    demand_gflops: f64,
    nodes: usize,
    links: usize,
    columns: usize,
    integer_columns: usize,
    rows: usize,
    nonzeros: usize,
    families: Vec<(String, usize)>,
    hash: String,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<i32, HarnessError> {
    match command {
        Command::Build { scenario, json } => {
            let s = scenario.resolve()?;
            let cat = catalog()?;
            let inst = build_instance(&s, &cat)?;
            let demand = scenario.point(&s)?;
            let m = build_point(&s, &inst, &cat, demand)?;
            let summary = ModelSummary {
                scenario: s.name.clone(),
                demand_gflops: demand,
                nodes: inst.topology.nodes().len(),
                links: inst.topology.links().len(),
                columns: m.problem.columns.len(),
                integer_columns: m.problem.num_integral(),
                rows: m.problem.rows.len(),
                nonzeros: m.problem.nnz(),
                families: m.family_counts().into_iter().map(|(f, n)| (f.tag().to_string(), n)).collect(),
                hash: m.hash.clone(),
            };
            println!(
                "{}: {} nodes, {} links, {} columns ({} integer), {} rows, {} nonzeros, hash {}",
                summary.scenario,
                summary.nodes,
                summary.links,
                summary.columns,
                summary.integer_columns,
                summary.rows,
                summary.nonzeros,
                summary.hash
            );
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
                fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
            }
            Ok(EXIT_OK)
        }
        Command::Solve { scenario, json, oracle_check } => {
            let s = scenario.resolve()?;
            let cat = catalog()?;
            let inst = build_instance(&s, &cat)?;
            let demand = scenario.point(&s)?;
            let m = build_point(&s, &inst, &cat, demand)?;
            let r = solve_milp(&m.problem, &s.limits.milp_options());
            let row = row_from_result(&m, &r, demand);
            println!(
                "status {} objective {} gap {} tpc_w {} td_s {} assignments {}",
                row.status,
                row.objective.map_or("-".into(), |v| format!("{v:.9e}")),
                row.gap.map_or("-".into(), |v| format!("{v:.3e}")),
                row.power.map_or("-".into(), |p| format!("{:.6}", p.tpc)),
                row.td.map_or("-".into(), |v| format!("{v:.6e}")),
                if row.assignments.is_empty() { "-" } else { &row.assignments }
            );
            for d in &row.diagnostics {
                println!("note: {d}");
            }
            if let Some(p) = json {
                let report = r.solution.as_ref().map(|x| extract_report(&m, x, super::REPORT_TOL)).transpose()?;
                let text = serde_json::to_string_pretty(&(&row, &report)).expect("report serializes");
                fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
            }
            let mut code = if row.hit_limit() { EXIT_LIMIT } else { EXIT_OK };
            if oracle_check {
                let demands = DemandSet::uniform(&inst.topology, demand, s.drr);
                let o = enumerate_placements(&inst.topology, &demands, &cat, Some(&inst.pw), s.weights, &OracleLimits::default())
                    .map_err(|e| HarnessError::Invalid(e.to_string()))?;
                let agree = match (o.best(), r.objective) {
                    (Some(b), Some(v)) => (b.objective - v).abs() <= 1e-6 * b.objective.abs().max(1e-12),
                    (None, None) => true,
                    _ => false,
                };
                println!(
                    "oracle {} candidates, best {}: {}",
                    o.ranking.len(),
                    o.best().map_or("-".into(), |b| format!("{:.9e}", b.objective)),
                    if agree { "agrees" } else { "DISAGREES" }
                );
                if !agree && code == EXIT_OK {
                    code = EXIT_FAILURE;
                }
            }
            Ok(code)
        }
        Command::Sweep { scenario, out, json } => {
            let mut s = scenario.resolve()?;
            if out.is_some() {
                s.output.csv = out;
            }
            if json.is_some() {
                s.output.json = json;
            }
            let to_stdout = s.output.csv.is_none();
            let table = run_scenario(&s, &catalog()?)?;
            if to_stdout {
                print!("{}", table.to_csv_string());
            }
            for r in &table.rows {
                for d in &r.diagnostics {
                    eprintln!("{} GFLOPs: {d}", r.demand_gflops);
                }
            }
            Ok(if table.rows.iter().any(|r| r.hit_limit()) { EXIT_LIMIT } else { EXIT_OK })
        }
        Command::Export { scenario, mps, lp } => {
            let s = scenario.resolve()?;
            let cat = catalog()?;
            let inst = build_instance(&s, &cat)?;
            let m = build_point(&s, &inst, &cat, scenario.point(&s)?)?;
            let text = to_mps_string(&m.problem);
            let back = parse_mps(&text).map_err(|e| HarnessError::Invalid(e.to_string()))?;
            if to_mps_string(&back) != text {
                eprintln!("error: MPS round trip does not reproduce the model");
                return Ok(EXIT_FAILURE);
            }
            fs::write(&mps, &text).map_err(|e| HarnessError::io(&mps, e))?;
            if let Some(p) = lp {
                fs::write(&p, to_lp_string(&m.problem)).map_err(|e| HarnessError::io(&p, e))?;
            }
            println!("wrote {} ({} columns, {} rows, hash {})", mps.display(), m.problem.columns.len(), m.problem.rows.len(), m.hash);
            Ok(EXIT_OK)
        }
        Command::Linearize { capacity, segments, out } => {
            if !(capacity > 0.0) || segments == 0 {
                return Err(HarnessError::Invalid("capacity must be positive and segments at least 1".into()));
            }
            let pw = DelayConfig::with_segments(segments).linearize(capacity)?;
            let mut buf = Vec::new();
            pw.write_csv(&mut buf).expect("in-memory write");
            write_out(&out, &String::from_utf8(buf).expect("csv is utf-8"))?;
            Ok(EXIT_OK)
        }
        Command::Oracle { scenario, out } => {
            let s = scenario.resolve()?;
            let cat = catalog()?;
            let inst = build_instance(&s, &cat)?;
            let demands = DemandSet::uniform(&inst.topology, scenario.point(&s)?, s.drr);
            let o = enumerate_placements(&inst.topology, &demands, &cat, Some(&inst.pw), s.weights, &OracleLimits::default())
                .map_err(|e| HarnessError::Invalid(e.to_string()))?;
            let mut buf = Vec::new();
            o.write_csv(&mut buf).map_err(|e| HarnessError::Table(e.to_string()))?;
            write_out(&out, &String::from_utf8(buf).expect("csv is utf-8"))?;
            match o.best() {
                Some(b) => eprintln!("best {} of {} feasible: {}", b.objective, o.ranking.len(), b.assignment_string(&o.users)),
                None => eprintln!("no feasible placement among {} combinations", o.evaluated),
            }
            Ok(EXIT_OK)
        }
        Command::Compare { a, b, out } => {
            let ta = ResultTable::read_csv_file(&a)?;
            let tb = ResultTable::read_csv_file(&b)?;
            let s = compare_runs(&ta, &tb)?;
            let mut buf = Vec::new();
            s.write_csv(&mut buf)?;
            write_out(&out, &String::from_utf8(buf).expect("csv is utf-8"))?;
            Ok(EXIT_OK)
        }
    }
}
