//! Removal time under isolation: the minimum of an Erlang isolation delay and
//! an exponential recovery is again phase-type with generator `Π - δI`.
//! Compares sampled minima with that law.

use netsir::phase_type::{cdf, erlang, min_with_exponential, sample, ErlangSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let delta = 0.1;
    let draws = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for shape in [1, 2, 4] {
        let y = erlang(ErlangSpec::new(shape, 5.0)?);
        let z = min_with_exponential(&y, delta);
        let recovery = Exp::new(delta)?;
        let mut mins: Vec<f64> = (0..draws)
            .map(|_| sample(&y, &mut rng).min(recovery.sample(&mut rng)))
            .collect();
        mins.sort_by(f64::total_cmp);
        let n = mins.len() as f64;
        let ks = mins.iter().enumerate().fold(0.0_f64, |d, (k, &x)| {
            let f = cdf(&z, x);
            d.max((f - k as f64 / n).abs())
                .max(((k + 1) as f64 / n - f).abs())
        });
        let mean = mins.iter().sum::<f64>() / n;
        println!(
            "Erlang p={shape}: law mean {:.4}, sample mean {mean:.4}, KS statistic {ks:.5}",
            z.mean()
        );
    }
    Ok(())
}
