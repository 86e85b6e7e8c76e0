//! Geometric programs through the log-space barrier solver: the AM-GM
//! instance `min x + 1/x`, and a small box design problem.

use netsir::gp::{solve, GpProblem, Monomial, SolverOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = SolverOptions::default();

    let mut p = GpProblem::new(Monomial::constant(1.0).into());
    let x = p.add_variable("x", 1e-3, 1e3);
    p.objective = Monomial::var(x) + Monomial::var(x).inverse();
    let sol = solve(&p, &opts)?;
    println!(
        "min x + 1/x: {:.9} at x = {:.9} ({:?}, {} Newton steps)",
        sol.objective_value, sol.point[0], sol.status, sol.newton_steps
    );

    // Maximize the volume hwd of a box with wall area 2(hw + hd) <= 100,
    // floor area wd <= 20 and aspect ratios h/w, w/h, d/w in [0.5, 2].
    let mut q = GpProblem::new(Monomial::constant(1.0).into());
    let h = q.add_variable("h", 1e-3, 1e3);
    let w = q.add_variable("w", 1e-3, 1e3);
    let d = q.add_variable("d", 1e-3, 1e3);
    q.objective = Monomial::new(1.0, [(h, -1.0), (w, -1.0), (d, -1.0)])?.into();
    q.add_inequality(Monomial::new(0.02, [(h, 1.0), (w, 1.0)])? + Monomial::new(0.02, [(h, 1.0), (d, 1.0)])?);
    q.add_inequality(Monomial::new(0.05, [(w, 1.0), (d, 1.0)])?);
    for (a, b) in [(h, w), (w, h), (d, w)] {
        q.add_inequality(Monomial::new(0.5, [(a, 1.0), (b, -1.0)])?);
    }
    let sol = solve(&q, &opts)?;
    println!(
        "box: h={:.4} w={:.4} d={:.4}, volume {:.4}, gap bound {:.2e}",
        sol.point[0],
        sol.point[1],
        sol.point[2],
        1.0 / sol.objective_value,
        sol.kkt_residual
    );
    Ok(())
}
