//! Spectral radius of an edge-list graph by power iteration, checked against
//! a dense symmetric eigendecomposition.
//!
//! Usage: `cargo run --example spectral_radius -- [path]` (default `data/social68.edgelist`).

use std::fs;

use nalgebra::SymmetricEigen;
use netsir::graph::{degrees, load_edge_list, spectral_radius, DEFAULT_SPECTRAL_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/social68.edgelist").into());
    let g = load_edge_list(&fs::read_to_string(&path)?)?;
    let rho = spectral_radius(&g, DEFAULT_SPECTRAL_TOL)?;
    let dense = SymmetricEigen::new(g.adjacency_matrix())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &l| m.max(l.abs()));
    let deg = degrees(&g);
    let mean_deg = deg.iter().sum::<usize>() as f64 / deg.len().max(1) as f64;
    println!("{path}: {} nodes, {} edges", g.node_count(), g.edge_count());
    println!("power iteration: {rho:.10}");
    println!("dense eigen:     {dense:.10}");
    println!(
        "mean degree {mean_deg:.3} <= rho <= max degree {}",
        deg.iter().max().unwrap_or(&0)
    );
    Ok(())
}
