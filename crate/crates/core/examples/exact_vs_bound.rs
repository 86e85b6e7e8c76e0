//! Exact expected infections from the absorbing Markov chain, a Monte Carlo
//! estimate, and the certified upper bound on small random instances, with
//! and without Erlang isolation.

use netsir::bound::{build_system, lambda_bound};
use netsir::exact_oracle::exact_lambda;
use netsir::graph::Graph;
use netsir::phase_type::{erlang, ErlangSpec};
use netsir::simulator::{estimate_lambda, EpidemicParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    println!(
        "{:<28} {:>9} {:>17} {:>9}",
        "instance", "exact", "monte carlo", "bound"
    );
    for k in 0..6 {
        let n = rng.random_range(2..=4);
        let g = Graph::erdos_renyi(n, 0.7, k);
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
        let delta: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..=1.0)).collect();
        let mut params = EpidemicParams::new(beta, delta, [0])?;
        let isolated = k % 2 == 1;
        if isolated {
            let laws = (0..n)
                .map(|_| ErlangSpec::new(2, rng.random_range(1.0..=10.0)).map(erlang))
                .collect::<Result<Vec<_>, _>>()?;
            params = params.with_isolation(laws)?;
        }
        let exact = exact_lambda(&g, &params)?;
        let mc = estimate_lambda(&g, &params, 50_000, k)?;
        let bound = lambda_bound(&build_system(&g, &params)?)?;
        let name = format!(
            "n={n} edges={} {}",
            g.edge_count(),
            if isolated { "isolation" } else { "plain" }
        );
        println!(
            "{name:<28} {exact:>9.5} {:>9.5} ± {:.5} {:>9.5}",
            mc.mean,
            mc.std_error,
            bound.or_infinity()
        );
    }
    Ok(())
}
