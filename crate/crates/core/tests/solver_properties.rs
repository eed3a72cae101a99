use fogpon::model::mps::{parse_mps, to_mps_string};
use fogpon::solver::{check_solution, solve_lp, solve_milp, LpOptions, MilpOptions, Problem, Relation, SolveStatus, VarKind};
use proptest::prelude::*;

/// Pure-binary problem: `min c x` subject to `A x >= b` rows (covering) and
/// `A x <= b` rows (packing), plus one continuous slack column with a cost.
#[derive(Debug, Clone)]
struct Instance {
    costs: Vec<f64>,
    cover: Vec<(Vec<f64>, f64)>,
    pack: Vec<(Vec<f64>, f64)>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=8).prop_flat_map(|n| {
        let row = move || (prop::collection::vec(0.0f64..5.0, n), 0.5f64..6.0);
        (
            prop::collection::vec(-3.0f64..10.0, n),
            prop::collection::vec(row(), 1..=3),
            prop::collection::vec(row(), 0..=2),
        )
            .prop_map(|(costs, cover, pack)| Instance { costs, cover, pack })
    })
}

fn to_problem(inst: &Instance) -> Problem {
    let n = inst.costs.len();
    let mut p = Problem::new("random");
    for j in 0..n {
        p.add_column(format!("x{j}"), VarKind::Binary, 0.0, 1.0);
    }
    // A slack that can cover any shortfall at a high price keeps every
    // instance feasible.
    let slack = p.add_column("s", VarKind::Continuous, 0.0, f64::INFINITY);
    for (i, (a, b)) in inst.cover.iter().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = a.iter().copied().enumerate().collect();
        coeffs.push((slack, 1.0));
        p.add_row(format!("cover[{i}]"), coeffs, Relation::Ge, *b + 2.0 * inst.pack.len() as f64);
    }
    for (i, (a, b)) in inst.pack.iter().enumerate() {
        p.add_row(format!("pack[{i}]"), a.iter().copied().enumerate().collect(), Relation::Le, *b);
    }
    let mut obj: Vec<(usize, f64)> = inst.costs.iter().copied().enumerate().collect();
    obj.push((slack, 50.0));
    p.set_objective(obj, 0.0);
    p
}

/// Best objective over all binary vectors, the slack set to its least
/// feasible value.
fn brute_force(inst: &Instance) -> Option<f64> {
    let n = inst.costs.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        let dot = |a: &[f64]| a.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>();
        if inst.pack.iter().any(|(a, b)| dot(a) > *b + 1e-9) {
            continue;
        }
        let rhs_shift = 2.0 * inst.pack.len() as f64;
        let s = inst.cover.iter().map(|(a, b)| (b + rhs_shift - dot(a)).max(0.0)).fold(0.0, f64::max);
        let v = dot(&inst.costs) + 50.0 * s;
        if best.is_none_or(|b| v < b) {
            best = Some(v);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn milp_matches_enumeration(inst in instance()) {
        let p = to_problem(&inst);
        let r = solve_milp(&p, &MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() });
        let best = brute_force(&inst).expect("all-zero packing is always feasible");
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        let obj = r.objective.unwrap();
        prop_assert!((obj - best).abs() <= 1e-6 * best.abs().max(1.0), "milp {} enumeration {}", obj, best);
        let x = r.solution.as_ref().unwrap();
        prop_assert!(check_solution(&p, x, 1e-6).is_feasible());
    }

    #[test]
    fn relaxation_bounds_and_monotone_trace(inst in instance()) {
        let p = to_problem(&inst);
        let r = solve_milp(&p, &MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() });
        let lp = solve_lp(&p, &LpOptions::default());
        let (lp_obj, obj) = (lp.objective.unwrap(), r.objective.unwrap());
        prop_assert!(lp_obj <= obj + 1e-6 * obj.abs().max(1.0), "lp {} milp {}", lp_obj, obj);
        prop_assert!(r.best_bound <= obj + 1e-9);
        for w in r.stats.bound_trace.windows(2) {
            prop_assert!(w[1] >= w[0], "bound fell from {} to {}", w[0], w[1]);
        }
        for w in r.stats.incumbents.windows(2) {
            prop_assert!(w[1].1 < w[0].1);
        }
    }

    #[test]
    fn mps_round_trip_is_exact(inst in instance()) {
        let p = to_problem(&inst);
        let text = to_mps_string(&p);
        let q = parse_mps(&text).unwrap();
        prop_assert_eq!(&q.columns, &p.columns);
        prop_assert_eq!(&q.rows, &p.rows);
        prop_assert_eq!(&q.objective, &p.objective);
        prop_assert_eq!(to_mps_string(&q), text);
    }
}

#[test]
fn node_limit_stops_with_limit_status() {
    // Odd-coefficient equality has no integral solution near the LP optimum,
    // so the search needs more than one node.
    let mut p = Problem::new("parity");
    let cols: Vec<usize> = (0..12).map(|j| p.add_column(format!("x{j}"), VarKind::Binary, 0.0, 1.0)).collect();
    p.add_row("sum", cols.iter().map(|&c| (c, 2.0)).collect(), Relation::Eq, 11.0);
    p.set_objective(cols.iter().map(|&c| (c, 1.0)).collect(), 0.0);
    let r = solve_milp(&p, &MilpOptions { node_limit: 3, ..MilpOptions::default() });
    assert_eq!(r.status, SolveStatus::LimitReached);
    assert!(r.solution.is_none());
    let full = solve_milp(&p, &MilpOptions::default());
    assert_eq!(full.status, SolveStatus::Infeasible);
}
