//! One Gillespie trajectory on the bundled social graph, then a seeded,
//! replica-parallel estimate of the expected number of infections.

use std::fs;

use netsir::graph::load_edge_list;
use netsir::simulator::{estimate_lambda, replica_rng, simulate, EpidemicParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = load_edge_list(&fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/social68.edgelist"
    ))?)?;
    let params = EpidemicParams::uniform(g.node_count(), 0.008, 0.075, [3, 17, 40, 61])?;

    let out = simulate(&g, &params, &mut replica_rng(1, 0))?;
    println!(
        "replica 0: {} events, {} new infections, {} removed at t = {:.2}",
        out.event_log.len(),
        out.infections_after_t0,
        out.final_removed,
        out.counts_series.last().map_or(0.0, |c| c.t)
    );
    for t in [0.0, 10.0, 25.0, 50.0, 100.0] {
        let c = out.counts_at(t);
        println!(
            "  t={t:>5}: S={:>2} I={:>2} R={:>2}",
            c.sigma_s, c.sigma_i, c.sigma_r
        );
    }

    for replicas in [1_000, 10_000, 100_000] {
        let est = estimate_lambda(&g, &params, replicas, 1)?;
        println!(
            "lambda over {replicas:>6} replicas: {:.4} ± {:.4}",
            est.mean, est.std_error
        );
    }
    Ok(())
}
