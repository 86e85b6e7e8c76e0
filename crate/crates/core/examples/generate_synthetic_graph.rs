//! Writes a synthetic social graph as an edge list.
//!
//! Usage: `cargo run --example generate_synthetic_graph -- [nodes] [radius] [seed] [path]`.
//! Defaults reproduce the bundled `data/social68.edgelist`.

use std::fs;

use netsir::graph::{degrees, spectral_radius, synthetic_social, DEFAULT_SPECTRAL_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nodes: usize = args.first().map_or(Ok(68), |s| s.parse())?;
    let radius: f64 = args.get(1).map_or(Ok(10.61), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(7), |s| s.parse())?;
    let path = args
        .get(3)
        .cloned()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/social68.edgelist").into());

    let g = synthetic_social(nodes, radius, seed);
    let deg = degrees(&g);
    println!(
        "{} nodes, {} edges, degree range {}..={}, spectral radius {:.4}",
        g.node_count(),
        g.edge_count(),
        deg.iter().min().unwrap_or(&0),
        deg.iter().max().unwrap_or(&0),
        spectral_radius(&g, DEFAULT_SPECTRAL_TOL)?
    );
    if let Some(dir) = std::path::Path::new(&path).parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, g.to_edge_list())?;
    println!("wrote {path}");
    Ok(())
}
