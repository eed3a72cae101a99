use fogpon::catalog::{default_catalog, Wavelength};
use fogpon::delay_approx::DelayConfig;
use fogpon::model::{build_model, extract_report, DemandSet, Family, MilpModel, ModelOptions, UserDemand, Weights};
use fogpon::solver::{check_solution, solve_milp, MilpOptions, SolveStatus};
use fogpon::topology::{Medium, Node, Role, Topology, TopologyBuilder};

fn demands(users: &[(&str, f64)]) -> DemandSet {
    DemandSet::new(
        users.iter().map(|&(u, d)| UserDemand { user: u.to_string(), demand_gflops: d, drr: 0.05 }).collect(),
    )
}

/// Two users on an RFS hub with four more processing leaves: 7 nodes,
/// 6 edges, 12 links.
fn star() -> Topology {
    let mut b = TopologyBuilder::new();
    let u1 = b.add_node(Node::new("u1", Role::UdSource));
    let u2 = b.add_node(Node::new("u2", Role::UdSource));
    let hub = b.add_node(Node::new("rfs", Role::Rfs));
    b.connect(u1, hub, 10.0, Medium::FiberP2p);
    b.connect(u2, hub, 10.0, Medium::FiberP2p);
    for (id, role) in [("bfs", Role::Bfs), ("cfs", Role::Cfs), ("ccs", Role::Ccs), ("pud", Role::UdProcessing)] {
        let n = b.add_node(Node::new(id, role));
        b.connect(hub, n, 10.0, Medium::FiberP2p);
    }
    b.build().unwrap()
}

/// u1 - red AP - ONU - `sink`.
fn line(sink: Role) -> Topology {
    let mut b = TopologyBuilder::new();
    let u = b.add_node(Node::new("u1", Role::UdSource));
    let ap = b.add_node(Node::new("ap", Role::ApSource).with_wavelength(Wavelength::Red));
    let onu = b.add_node(Node::new("onu", Role::Onu));
    let d = b.add_node(Node::new("sink", sink));
    b.connect(u, ap, 10.0, Medium::VlcUplink);
    b.connect(ap, onu, 10.0, Medium::FiberP2p);
    b.connect(onu, d, 10.0, Medium::FiberP2p);
    b.build().unwrap()
}

fn power_model(topology: &Topology, users: &[(&str, f64)]) -> MilpModel {
    build_model(topology, &demands(users), &default_catalog(), None, Weights::POWER_AWARE, &ModelOptions::default())
        .unwrap()
}

fn exact() -> MilpOptions {
    MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() }
}

#[test]
fn counts_follow_closed_forms() {
    let t = star();
    assert_eq!(t.links().len(), 12);
    let m = power_model(&t, &[("u1", 6.0), ("u2", 6.0)]);
    assert_eq!(m.index.procs.len(), 5);
    assert_eq!(m.index.flow.len(), 2 * 5 * 12);
    assert_eq!(m.rows_in(Family::Demand), 2);
    assert_eq!(m.rows_in(Family::Capacity), 5);
    assert_eq!(m.rows_in(Family::SingleAssign), 2);
    assert!(!m.delay_enabled());
    assert_eq!(m.rows_in(Family::DelaySeg), 0);
}

#[test]
fn delay_rows_appear_with_delay_weight() {
    let t = star();
    let pw = DelayConfig::default().for_topology(&t).unwrap();
    let d = demands(&[("u1", 6.0), ("u2", 6.0)]);
    let m = build_model(&t, &d, &default_catalog(), Some(&pw), Weights::DELAY_AWARE, &ModelOptions::default()).unwrap();
    assert!(m.delay_enabled());
    // One row per link and tangent segment.
    assert_eq!(m.rows_in(Family::DelaySeg), 12 * 6);
    let missing = build_model(&t, &d, &default_catalog(), None, Weights::DELAY_AWARE, &ModelOptions::default());
    assert!(missing.is_err());
}

#[test]
fn hash_is_deterministic() {
    let t = star();
    let a = power_model(&t, &[("u1", 6.0), ("u2", 6.0)]);
    let b = power_model(&t, &[("u1", 6.0), ("u2", 6.0)]);
    assert_eq!(a.hash, b.hash);
    assert_eq!(a.hash.len(), 64);
    let c = power_model(&t, &[("u1", 6.0), ("u2", 7.0)]);
    assert_ne!(a.hash, c.hash);
}

#[test]
fn consolidated_rfs_power() {
    // 24 GFLOPs fit one RFS: 39 W idle plus 24 * (65 - 39) / 64.
    let t = star();
    let m = power_model(&t, &[("u1", 12.0), ("u2", 12.0)]);
    let r = solve_milp(&m.problem, &exact());
    assert_eq!(r.status, SolveStatus::Optimal);
    let rep = extract_report(&m, r.solution.as_ref().unwrap(), 1e-6).unwrap();
    assert!(rep.feasible);
    assert_eq!(rep.active_nodes, vec!["rfs".to_string()]);
    assert!((rep.power.pc - 48.75).abs() < 1e-6, "{}", rep.power.pc);
}

#[test]
fn transit_onu_power() {
    // 50 GFLOPs at 0.05 Gbit/s per GFLOP: 2.5 Gbit/s enters and leaves the
    // ONU, sigma = 5, and PONU = 5 * (10 - 6) / 10 + 6.
    let t = line(Role::Ccs);
    let m = power_model(&t, &[("u1", 50.0)]);
    let r = solve_milp(&m.problem, &exact());
    assert_eq!(r.status, SolveStatus::Optimal);
    let rep = extract_report(&m, r.solution.as_ref().unwrap(), 1e-6).unwrap();
    assert!((rep.power.ponu - 8.0).abs() < 1e-6, "{}", rep.power.ponu);
    assert_eq!(rep.assignment_string(), "u1:sink");
}

#[test]
fn demand_beyond_capacity_is_infeasible() {
    let t = line(Role::Rfs);
    let m = power_model(&t, &[("u1", 100.0)]);
    assert_eq!(solve_milp(&m.problem, &exact()).status, SolveStatus::Infeasible);
}

#[test]
fn residuals_point_at_the_broken_family() {
    let t = star();
    let m = power_model(&t, &[("u1", 6.0), ("u2", 6.0)]);
    let zero = vec![0.0; m.problem.columns.len()];
    let rep = check_solution(&m.problem, &zero, 1e-6);
    assert!(rep.flagged().contains(&Family::Demand.tag()));

    let r = solve_milp(&m.problem, &exact());
    let mut x = r.solution.unwrap();
    assert!(check_solution(&m.problem, &x, 1e-6).is_feasible());
    let used = m.index.flow.iter().copied().find(|&c| x[c] > 1e-3).unwrap();
    x[used] += 1e-2;
    let rep = check_solution(&m.problem, &x, 1e-6);
    assert!(rep.flagged().contains(&Family::FlowCons.tag()), "{:?}", rep.flagged());
    let report = extract_report(&m, &x, 1e-6).unwrap();
    assert!(!report.feasible);
}

#[test]
fn fixed_binaries_need_no_branching() {
    let t = star();
    let m = power_model(&t, &[("u1", 30.0), ("u2", 40.0)]);
    let r = solve_milp(&m.problem, &exact());
    let x = r.solution.unwrap();
    let mut fixed = m.problem.clone();
    for (j, col) in fixed.columns.iter_mut().enumerate().filter(|(_, c)| c.kind.is_integral()) {
        col.lower = x[j].round();
        col.upper = x[j].round();
    }
    let again = solve_milp(&fixed, &exact());
    assert_eq!(again.status, SolveStatus::Optimal);
    assert_eq!(again.stats.nodes, 0);
    assert!((again.objective.unwrap() - r.objective.unwrap()).abs() < 1e-6);
}

#[test]
fn report_decodes_the_injected_assignment() {
    let t = star();
    let m = power_model(&t, &[("u1", 6.0), ("u2", 6.0)]);
    let ix = &m.index;
    let np = ix.procs.len();
    let ccs = ix.procs.iter().position(|&p| m.node_id(p) == "ccs").unwrap();
    let mut fixed = m.problem.clone();
    for u in 0..2 {
        for d in 0..np {
            let v = if d == ccs { 1.0 } else { 0.0 };
            fixed.columns[ix.xi[u * np + d]].lower = v;
            fixed.columns[ix.xi[u * np + d]].upper = v;
        }
    }
    let r = solve_milp(&fixed, &exact());
    let rep = extract_report(&m, r.solution.as_ref().unwrap(), 1e-6).unwrap();
    assert!(rep.feasible);
    assert_eq!(rep.assignment_string(), "u1:ccs;u2:ccs");
    assert_eq!(rep.active_nodes, vec!["ccs".to_string()]);
}
