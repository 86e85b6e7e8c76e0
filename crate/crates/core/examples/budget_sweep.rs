//! Certified bound as a function of the budget on a fixed random graph.

use netsir::allocator::{budget_sweep, CostModel, RateBox, DEFAULT_EPSILON};
use netsir::gp::SolverOptions;
use netsir::graph::Graph;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Graph::erdos_renyi(20, 0.25, 3);
    let costs = CostModel::plain(RateBox::new(0.01, 0.2)?, RateBox::new(0.05, 0.5)?, 20.0)?;
    let budgets = [5.0, 10.0, 15.0, 20.0, 30.0];
    println!("budget  certified bound  spent");
    for (b, res) in budget_sweep(
        &g,
        &[0, 1],
        &costs,
        &budgets,
        DEFAULT_EPSILON,
        &SolverOptions::default(),
    ) {
        match res {
            Ok(a) => println!(
                "{b:>6}  {:>15.5}  {:>5.2}",
                a.lambda_bar.unwrap_or(f64::INFINITY),
                a.total_cost
            ),
            Err(e) => println!("{b:>6}  {e}"),
        }
    }
    Ok(())
}
