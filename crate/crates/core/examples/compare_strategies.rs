//! Monte Carlo comparison of the optimized allocation with the uniform and
//! SIS-decay baselines on the bundled social graph.

use std::fs;

use netsir::allocator::{
    baseline_sis_spectral, baseline_uniform, optimize, CostModel, RateBox, DEFAULT_EPSILON,
};
use netsir::gp::SolverOptions;
use netsir::graph::load_edge_list;
use netsir::simulator::estimate_lambda;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = load_edge_list(&fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/social68.edgelist"
    ))?)?;
    let infected = [3, 17, 40, 61];
    let costs = CostModel::plain(RateBox::new(0.00266, 0.0133)?, RateBox::new(0.05, 0.1)?, 68.0)?;
    let opts = SolverOptions::default();
    let strategies = [
        (
            "optimized",
            optimize(&g, &infected, &costs, DEFAULT_EPSILON, &opts)?,
        ),
        (
            "uniform",
            baseline_uniform(&g, &infected, &costs, DEFAULT_EPSILON)?,
        ),
        (
            "sis_spectral",
            baseline_sis_spectral(&g, &infected, &costs, &opts, DEFAULT_EPSILON)?,
        ),
    ];
    let mut optimized = None;
    for (name, alloc) in &strategies {
        let est = estimate_lambda(&g, &alloc.params()?, 10_000, 1)?;
        let base = *optimized.get_or_insert(est.mean);
        println!(
            "{name:<13} bound {:>8.4}  simulated {:.4} ± {:.4}  optimized is {:>5.1}% lower",
            alloc.lambda_bound.or_infinity(),
            est.mean,
            est.std_error,
            100.0 * (est.mean - base) / est.mean
        );
    }
    Ok(())
}
