//! Budgeted allocation of prevention and isolation resources with Erlang
//! isolation delays. Prints the monomial bounds used to keep the phase rates
//! posynomial, then the optimized allocation.

use std::fs;

use netsir::allocator::{erlang_fits, optimize, CostModel, RateBox, DEFAULT_EPSILON, DEFAULT_FIT_GRID};
use netsir::gp::SolverOptions;
use netsir::graph::load_edge_list;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = load_edge_list(&fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/social68.edgelist"
    ))?)?;
    let infected = [3, 17, 40, 61];
    let costs = CostModel::isolation(
        RateBox::new(0.00266, 0.0133)?,
        RateBox::new(2.0, 20.0)?,
        3,
        0.05,
        g.node_count() as f64,
    )?;
    for fit in erlang_fits(&costs, 1, DEFAULT_FIT_GRID)? {
        println!(
            "fit on [{:.3}, {:.3}] with delta {:.3}: kappa {:.5}, alpha {:.5}, max gap {:.5}",
            fit.x_lo,
            fit.x_hi,
            fit.delta,
            fit.kappa,
            fit.alpha,
            fit.max_gap()
        );
    }
    let alloc = optimize(&g, &infected, &costs, DEFAULT_EPSILON, &SolverOptions::default())?;
    let gamma = alloc.gamma.as_deref().unwrap_or(&[]);
    println!(
        "certified bound {:.4}, total cost {:.3}",
        alloc.lambda_bar.unwrap_or(f64::INFINITY),
        alloc.total_cost
    );
    for i in infected {
        println!("  infected node {i}: mean isolation delay {:.3}", gamma[i]);
    }
    let (lo, hi) = gamma
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
    println!("isolation delays range over [{lo:.3}, {hi:.3}]");
    Ok(())
}
