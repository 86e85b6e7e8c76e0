//! Randomized allocation programs: every feasible instance must solve to a
//! certificate-verified optimum that no sampled feasible point beats.

use netsir::allocator::{
    build_problem1, build_problem2, erlang_fits, optimize, solve_allocation, CostModel, LambdaMode, RateBox,
    DEFAULT_EPSILON, DEFAULT_FIT_GRID,
};
use netsir::gp::{self, SolverOptions};
use netsir::graph::Graph;
use proptest::prelude::*;

fn plain_model(budget_per_node: f64, n: usize) -> CostModel {
    CostModel::plain(
        RateBox::new(0.00266, 0.0133).unwrap(),
        RateBox::new(0.05, 0.1).unwrap(),
        budget_per_node * n as f64,
    )
    .unwrap()
}

fn isolation_model(budget_per_node: f64, n: usize, shape: usize) -> CostModel {
    CostModel::isolation(
        RateBox::new(0.00266, 0.0133).unwrap(),
        RateBox::new(2.0, 20.0).unwrap(),
        shape,
        0.05,
        budget_per_node * n as f64,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plain_programs_solve(n in 3usize..12, p in 0.2f64..0.8, seed in 0u64..1000, per_node in 0.6f64..1.5) {
        let g = Graph::erdos_renyi(n, p, seed);
        let costs = plain_model(per_node, n);
        let opts = SolverOptions::default();
        let alloc = optimize(&g, &[0], &costs, DEFAULT_EPSILON, &opts).unwrap();
        prop_assert!(alloc.total_cost <= costs.budget + 1e-8);
        let problem = build_problem1(&g, &[0], &costs, LambdaMode::Minimize, DEFAULT_EPSILON).unwrap();
        let sol = gp::solve(&problem.gp, &opts).unwrap();
        for x in problem.sample_feasible_points(50, 50_000, seed).unwrap() {
            prop_assert!(sol.objective_value <= gp::evaluate(&problem.gp.objective, &x).unwrap() + 1e-8);
        }
    }

    #[test]
    fn isolation_programs_solve(n in 3usize..9, p in 0.2f64..0.8, seed in 0u64..1000, per_node in 0.6f64..1.5, shape in 1usize..4) {
        let g = Graph::erdos_renyi(n, p, seed);
        let costs = isolation_model(per_node, n, shape);
        let opts = SolverOptions::default();
        let alloc = optimize(&g, &[n - 1], &costs, DEFAULT_EPSILON, &opts).unwrap();
        prop_assert!(alloc.total_cost <= costs.budget + 1e-8);
        prop_assert_eq!(alloc.erlang_shape, Some(shape));
        let fits = erlang_fits(&costs, n, DEFAULT_FIT_GRID).unwrap();
        let problem = build_problem2(&g, &[n - 1], &costs, &fits, LambdaMode::Minimize, DEFAULT_EPSILON).unwrap();
        let again = solve_allocation(&problem, &opts).unwrap();
        prop_assert!((again.lambda_bar.unwrap() - alloc.lambda_bar.unwrap()).abs() < 1e-9);
    }
}
