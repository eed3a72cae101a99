//! Acceptance checks: one pass/fail line per criterion. Run with
//! `cargo test --test acceptance`.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use fogpon::catalog::{default_catalog, unit_power, Catalog, DeviceClass};
use fogpon::delay_approx::{linearize, mm1_delay, DEFAULT_PACKET_BITS, DEFAULT_RHO_MAX, DEFAULT_RHO_POINTS};
use fogpon::harness::{
    build_instance, build_point, compare_runs, run_scenario, weight_dominance, Scenario,
};
use fogpon::model::mps::{parse_mps, to_mps_string};
use fogpon::model::{build_model, extract_report, DemandSet, ModelOptions, Weights};
use fogpon::oracle::{enumerate_placements, OracleLimits};
use fogpon::solver::{
    check_solution, solve_lp, solve_milp, LpOptions, MilpOptions, Problem, Relation, SolveResult, SolveStatus,
};

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn scenario_file(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name].iter().collect();
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    Scenario::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{what} took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs()));
    }
    Ok(())
}

fn catalog_fidelity() -> Outcome {
    let start = Instant::now();
    let catalog = default_catalog();
    let expected = [
        (DeviceClass::Ccs, 0.27),
        (DeviceClass::Mfs, 0.74),
        (DeviceClass::Cfs, 1.15),
        (DeviceClass::Bfs, 1.23),
        (DeviceClass::Rfs, 0.41),
    ];
    let mut worst: f64 = 0.0;
    for (class, want) in expected {
        let got = unit_power(catalog.profile(class).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if (got - want).abs() > 0.005 {
            return Err(format!("{class}: unit power {got:.4} vs {want}"));
        }
        worst = worst.max((got - want).abs());
    }
    let audit = catalog.efficiency_audit(0.005);
    let ud = audit.iter().find(|a| a.class == DeviceClass::Ud).ok_or("no UD audit entry")?;
    if !ud.discrepancy || (ud.computed - 0.586).abs() > 5e-4 {
        return Err(format!("UD audit {ud:?} should flag 0.586 vs 0.55"));
    }
    within(start, Duration::from_secs(1), "catalog")?;
    Ok(format!("max deviation {worst:.4} W/GFLOP; UD flagged ({:.3} vs {})", ud.computed, ud.listed))
}

fn piecewise_delay() -> Outcome {
    let start = Instant::now();
    let cap = 40.0;
    let pw = linearize(cap, 6, &DEFAULT_RHO_POINTS, DEFAULT_PACKET_BITS, DEFAULT_RHO_MAX).map_err(|e| e.to_string())?;
    let exact = |rho: f64| mm1_delay(rho * cap, cap, DEFAULT_PACKET_BITS).unwrap();
    let n = 10_000;
    let (mut over, mut rel): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        let rho = 0.95 * i as f64 / (n - 1) as f64;
        let (e, a) = (exact(rho), pw.eval(rho * cap));
        over = over.max(a - e);
        if (0.05..=0.9).contains(&rho) {
            rel = rel.max((e - a) / e);
        }
    }
    let tangency =
        DEFAULT_RHO_POINTS.iter().map(|&r| (pw.eval(r * cap) - exact(r)).abs()).fold(0.0, f64::max);
    within(start, Duration::from_secs(1), "linearization")?;
    if over > 1e-12 {
        return Err(format!("over-approximates by {over:e} s"));
    }
    if rel > 0.05 {
        return Err(format!("relative error {:.2}% on [0.05, 0.9]", rel * 100.0));
    }
    if tangency > 1e-9 {
        return Err(format!("tangency error {tangency:e} s"));
    }
    Ok(format!("max excess {over:.1e} s, max relative error {:.2}%, tangency {tangency:.1e} s", rel * 100.0))
}

fn oracle_equivalence(catalog: &Catalog) -> Outcome {
    let start = Instant::now();
    let opts = MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() };
    let (mut compared, mut worst) = (0, 0.0f64);
    for seed in 0..24u64 {
        let f = common::tiny_instance(seed);
        for weights in [Weights::POWER_AWARE, Weights::DELAY_AWARE] {
            let oracle =
                enumerate_placements(&f.topology, &f.demands, catalog, Some(&f.pw), weights, &OracleLimits::default())
                    .map_err(|e| e.to_string())?;
            let model = build_model(&f.topology, &f.demands, catalog, Some(&f.pw), weights, &ModelOptions::default())
                .map_err(|e| e.to_string())?;
            let r = solve_milp(&model.problem, &opts);
            match (oracle.best(), r.objective) {
                (None, None) => {}
                (Some(best), Some(obj)) => {
                    let rel = (obj - best.objective).abs() / best.objective.abs().max(f64::MIN_POSITIVE);
                    if rel > 1e-6 {
                        return Err(format!("seed {seed} {weights:?}: milp {obj} vs oracle {}", best.objective));
                    }
                    worst = worst.max(rel);
                    compared += 1;
                }
                (b, o) => return Err(format!("seed {seed} {weights:?}: oracle {:?} vs milp {o:?}", b.map(|c| c.objective))),
            }
        }
    }
    within(start, Duration::from_secs(60), "oracle equivalence")?;
    if compared < 20 {
        return Err(format!("only {compared} feasible comparisons"));
    }
    Ok(format!("{compared} instance/weight pairs agree, worst relative difference {worst:.1e}"))
}

fn consolidation(catalog: &Catalog) -> Outcome {
    let start = Instant::now();
    let scenario = Scenario::single_room("consolidation", 1, 1, 4, vec![6.0]);
    let instance = build_instance(&scenario, catalog).map_err(|e| e.to_string())?;
    let model = build_point(&scenario, &instance, catalog, 6.0).map_err(|e| e.to_string())?;
    let r = solve_milp(&model.problem, &MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() });
    if r.status != SolveStatus::Optimal {
        return Err(format!("status {}", r.status));
    }
    let rep = extract_report(&model, r.solution.as_ref().unwrap(), 1e-6).map_err(|e| e.to_string())?;
    if rep.active_nodes.len() != 1 || !rep.active_nodes[0].ends_with("rfs") {
        return Err(format!("active nodes {:?}", rep.active_nodes));
    }
    if (rep.power.pc - 48.75).abs() > 1e-6 {
        return Err(format!("PC {} W", rep.power.pc));
    }
    let demands = DemandSet::uniform(&instance.topology, 6.0, scenario.drr);
    let limits = OracleLimits { max_users: 4, ..OracleLimits::default() };
    let oracle = enumerate_placements(&instance.topology, &demands, catalog, None, Weights::POWER_AWARE, &limits)
        .map_err(|e| e.to_string())?;
    let best = oracle.best().ok_or("oracle found no placement")?;
    let obj = r.objective.unwrap();
    if (obj - best.objective).abs() > 1e-6 * best.objective.abs() {
        return Err(format!("milp {obj} vs oracle {}", best.objective));
    }
    if best.active_nodes() != rep.active_nodes || (best.power.pc - 48.75).abs() > 1e-6 {
        return Err(format!("oracle places on {:?} with PC {}", best.active_nodes(), best.power.pc));
    }
    within(start, Duration::from_secs(120), "consolidation")?;
    Ok(format!(
        "all 24 GFLOPs on {}, PC {:.6} W, TPC {obj:.4} W matches oracle over {} placements",
        rep.active_nodes[0], rep.power.pc, oracle.evaluated
    ))
}

fn active_of(model: &fogpon::model::MilpModel, x: &[f64]) -> Result<Vec<String>, String> {
    let rep = extract_report(model, x, 1e-6).map_err(|e| e.to_string())?;
    if !rep.feasible {
        return Err(format!("solution flagged: {:?}", rep.residuals.flagged()));
    }
    Ok(rep.active_nodes)
}

fn capacity_pigeonhole(catalog: &Catalog) -> Outcome {
    let demand = 20.0;
    let scenario = Scenario::single_room("pigeonhole", 1, 1, 4, vec![demand]);
    let instance = build_instance(&scenario, catalog).map_err(|e| e.to_string())?;
    let model = build_point(&scenario, &instance, catalog, demand).map_err(|e| e.to_string())?;
    let total = model.demands.total_demand();
    if total <= 64.0 {
        return Err(format!("total demand {total} does not exceed one RFS"));
    }
    let opts = MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() };
    let r = solve_milp(&model.problem, &opts);
    let x = r.solution.as_ref().ok_or(format!("status {}", r.status))?;
    let direct = active_of(&model, x)?;
    if direct.len() < 2 {
        return Err(format!("solver activates only {direct:?}"));
    }

    // Solve the model again from its MPS text and check that vector
    // against the original model.
    let parsed = parse_mps(&to_mps_string(&model.problem)).map_err(|e| e.to_string())?;
    let external = solve_milp(&parsed, &opts);
    let y = external.solution.as_ref().ok_or(format!("MPS solve status {}", external.status))?;
    let residuals = check_solution(&model.problem, y, 1e-6);
    if !residuals.is_feasible() {
        return Err(format!("MPS solution fails check: {:?}", residuals.flagged()));
    }
    let via_mps = active_of(&model, y)?;
    if via_mps.len() < 2 {
        return Err(format!("MPS solution activates only {via_mps:?}"));
    }

    // Limiting the model to one active node leaves only nodes larger than
    // an RFS as hosts.
    let mut single = model.problem.clone();
    let betas: Vec<(usize, f64)> = model.index.beta.iter().map(|&c| (c, 1.0)).collect();
    single.add_row("one_node", betas, Relation::Le, 1.0);
    let s = solve_milp(&single, &opts);
    let note = match &s.solution {
        Some(z) => {
            let host = active_of(&model, z)?;
            let small: Vec<&String> = host.iter().filter(|h| h.ends_with("rfs") || h.contains(".ud")).collect();
            if !small.is_empty() {
                return Err(format!("one node of capacity <= 64 hosts {total} GFLOPs: {host:?}"));
            }
            format!("a lone {host:?} is feasible but costs {:.2} W more", s.objective.unwrap() - r.objective.unwrap())
        }
        None => "no single node can host it".to_string(),
    };
    Ok(format!("sum D = {total} GFLOPs: solver uses {direct:?}, MPS re-solve uses {via_mps:?}; {note}"))
}

fn mps_round_trip(catalog: &Catalog) -> Outcome {
    let start = Instant::now();
    let scenario = scenario_file("s1.json");
    let instance = build_instance(&scenario, catalog).map_err(|e| e.to_string())?;
    let demand = scenario.demand_sweep[0];
    let model = build_point(&scenario, &instance, catalog, demand).map_err(|e| e.to_string())?;
    let text = to_mps_string(&model.problem);
    let parsed = parse_mps(&text).map_err(|e| e.to_string())?;
    let p = &model.problem;
    if parsed.columns != p.columns {
        return Err("columns, bounds or integrality differ".into());
    }
    if parsed.rows != p.rows {
        return Err("rows differ".into());
    }
    if parsed.objective != p.objective || parsed.objective_constant != p.objective_constant {
        return Err("objective differs".into());
    }
    if to_mps_string(&parsed) != text {
        return Err("re-export differs".into());
    }
    within(start, Duration::from_secs(10), "MPS round trip")?;
    Ok(format!(
        "{} columns ({} integer), {} rows, {} nonzeros identical after export and parse",
        p.columns.len(),
        p.num_integral(),
        p.rows.len(),
        p.nnz()
    ))
}

fn sanity_of(problem: &Problem, opts: &MilpOptions, what: &str) -> Result<usize, String> {
    let r = solve_milp(problem, opts);
    let Some(obj) = r.objective else { return Ok(0) };
    let lp = solve_lp(problem, &LpOptions::default());
    let lp_obj = lp.objective.ok_or(format!("{what}: relaxation status {}", lp.status))?;
    // Incumbents are accepted at 1e-6 row violation, so the MILP value may
    // sit that far below the relaxation.
    if lp_obj > obj + 1e-6 * obj.abs().max(1.0) {
        return Err(format!("{what}: relaxation {lp_obj} above MILP {obj}"));
    }
    if let Some(w) = r.stats.bound_trace.windows(2).find(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1.0)) {
        return Err(format!("{what}: best bound fell from {} to {}", w[0], w[1]));
    }
    // Stopping at each improvement's node count returns that incumbent.
    let mut checked = 0;
    for &(nodes, inc) in &r.stats.incumbents {
        let stopped: SolveResult = solve_milp(problem, &MilpOptions { node_limit: nodes, ..opts.clone() });
        let x = stopped.solution.ok_or(format!("{what}: no incumbent at {nodes} nodes"))?;
        let rep = check_solution(problem, &x, 1e-6);
        if !rep.is_feasible() {
            return Err(format!("{what}: incumbent at node {nodes} flags {:?}", rep.flagged()));
        }
        if stopped.objective.unwrap() > inc + 1e-9 * inc.abs().max(1.0) {
            return Err(format!("{what}: incumbent at node {nodes} worse than recorded {inc}"));
        }
        checked += 1;
    }
    Ok(checked)
}

fn solver_sanity(catalog: &Catalog) -> Outcome {
    let opts = MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() };
    let (mut instances, mut incumbents) = (0, 0);
    for seed in 0..24u64 {
        let f = common::tiny_instance(seed);
        for weights in [Weights::POWER_AWARE, Weights::DELAY_AWARE] {
            let model = build_model(&f.topology, &f.demands, catalog, Some(&f.pw), weights, &ModelOptions::default())
                .map_err(|e| e.to_string())?;
            incumbents += sanity_of(&model.problem, &opts, &format!("seed {seed}"))?;
            instances += 1;
        }
    }
    for (name, demand) in [("desk-s3.json", 6.0), ("desk-s3.json", 20.0), ("desk-s1-delay.json", 6.0)] {
        // One room keeps the delay-aware instance within reach of optimality.
        let scenario = Scenario { rooms: 1, ..scenario_file(name) };
        let instance = build_instance(&scenario, catalog).map_err(|e| e.to_string())?;
        let model = build_point(&scenario, &instance, catalog, demand).map_err(|e| e.to_string())?;
        incumbents += sanity_of(&model.problem, &scenario.limits.milp_options(), name)?;
        instances += 1;
    }
    Ok(format!("{instances} instances: relaxation <= MILP, monotone bounds, {incumbents} incumbents pass at 1e-6"))
}

fn dominance(catalog: &Catalog) -> Outcome {
    println!(
        "    note: the headline 64%/15% power savings and 76%/67% delay reductions against AWGR-PON cannot be \
         reproduced here: the AWGR-PON baseline model is not implemented"
    );
    // One room keeps the delay-aware runs small enough to prove optimal, so
    // dominance is checked with no gap slack.
    let one_room = |name: &str| Scenario { rooms: 1, ..scenario_file(name) };
    let (power_s, delay_s) = (one_room("desk-s1-power.json"), one_room("desk-s1-delay.json"));
    let power = run_scenario(&power_s, catalog).map_err(|e| e.to_string())?;
    let delay = run_scenario(&delay_s, catalog).map_err(|e| e.to_string())?;
    for r in power.rows.iter().chain(&delay.rows) {
        if r.power.is_none() {
            return Err(format!("{} GFLOPs: status {}", r.demand_gflops, r.status));
        }
    }
    let savings = compare_runs(&delay, &power).map_err(|e| e.to_string())?;
    let avg = savings.average().ok_or("no averages row")?;
    let rows = weight_dominance(&power, power_s.weights, &delay, delay_s.weights).map_err(|e| e.to_string())?;
    if rows.len() != power.rows.len() {
        return Err(format!("dominance evaluated at {} of {} points", rows.len(), power.rows.len()));
    }
    if let Some(r) = delay.rows.iter().find(|r| r.status != "optimal") {
        return Err(format!("delay-aware run at {} GFLOPs ended {}", r.demand_gflops, r.status));
    }
    if let Some(bad) = rows.iter().find(|r| !(r.td_ok && r.tpc_ok)) {
        return Err(format!("dominance violated: {bad:?}"));
    }
    Ok(format!(
        "dominance holds at {} points; delay-aware vs power-aware average TPC saving {:.3}%, TD saving {:.3}%",
        rows.len(),
        avg.savings_pct[0].unwrap_or(f64::NAN),
        avg.savings_pct[13].unwrap_or(f64::NAN)
    ))
}

fn main() {
    let catalog = default_catalog();
    let checks: Vec<Check> = vec![
        ("catalog fidelity", Box::new(catalog_fidelity)),
        ("piecewise delay approximation", Box::new(piecewise_delay)),
        ("oracle equivalence", Box::new(|| oracle_equivalence(&catalog))),
        ("consolidation into one RFS", Box::new(|| consolidation(&catalog))),
        ("capacity pigeonhole", Box::new(|| capacity_pigeonhole(&catalog))),
        ("MPS round trip", Box::new(|| mps_round_trip(&catalog))),
        ("solver sanity", Box::new(|| solver_sanity(&catalog))),
        ("weight dominance", Box::new(|| dominance(&catalog))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {}: PASS {name} ({secs:.2} s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.2} s): {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
