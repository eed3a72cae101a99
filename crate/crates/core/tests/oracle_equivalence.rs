mod common;

use std::time::Instant;

use fogpon::catalog::default_catalog;
use fogpon::model::{build_model, extract_report, ModelOptions, Weights};
use fogpon::oracle::{enumerate_placements, OracleLimits};
use fogpon::solver::{solve_milp, MilpOptions, SolveStatus};

#[test]
fn milp_matches_oracle_on_random_trees() {
    let catalog = default_catalog();
    let opts = MilpOptions { gap_tol: 1e-9, ..MilpOptions::default() };
    let start = Instant::now();
    let mut feasible = 0;
    for seed in 0..24u64 {
        let f = common::tiny_instance(seed);
        for weights in [Weights::POWER_AWARE, Weights::DELAY_AWARE] {
            let oracle =
                enumerate_placements(&f.topology, &f.demands, &catalog, Some(&f.pw), weights, &OracleLimits::default())
                    .unwrap();
            let model = build_model(&f.topology, &f.demands, &catalog, Some(&f.pw), weights, &ModelOptions::default())
                .unwrap();
            let r = solve_milp(&model.problem, &opts);
            match oracle.best() {
                None => assert_eq!(r.status, SolveStatus::Infeasible, "seed {seed} {weights:?}"),
                Some(best) => {
                    feasible += 1;
                    assert_eq!(r.status, SolveStatus::Optimal, "seed {seed} {weights:?}");
                    let obj = r.objective.unwrap();
                    let tol = 1e-6 * best.objective.abs();
                    assert!(
                        (obj - best.objective).abs() <= tol,
                        "seed {seed} {weights:?}: milp {obj} oracle {}",
                        best.objective
                    );
                    let x = r.solution.as_ref().unwrap();
                    assert!(common::flows_are_paths(&model, x), "seed {seed}: flow support is not a path");
                    let rep = extract_report(&model, x, 1e-6).unwrap();
                    assert!(rep.feasible, "seed {seed}: {:?}", rep.residuals.flagged());
                }
            }
        }
    }
    assert!(feasible >= 20, "only {feasible} feasible instance/weight pairs");
    assert!(start.elapsed().as_secs() < 60);
}
