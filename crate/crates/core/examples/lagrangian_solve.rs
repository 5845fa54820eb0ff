//! Decomposition solve of the competing-demand arterial.

use phasetime::fixtures::{fixture, is_mainline};
use phasetime::lagrangian::{solve, SolveConfig};

pub fn run_example() -> phasetime::Result<()> {
    let inst = fixture("exp1-s2")?;
    let out = solve(&inst, &SolveConfig { max_iter: 60, ..Default::default() })?;
    for r in out.history.iter().step_by(10) {
        println!("n={:<3} LB {:>7.2} UB {:>6} best {:>6} theta {:.3}", r.n, r.lb, r.ub, r.best_ub, r.theta);
    }
    let best = out.best.expect("a feasible plan");
    let (main, side): (Vec<_>, Vec<_>) = best.moe.vehicle_delays.iter().partition(|d| is_mainline(d.vid));
    println!(
        "best {} found at iteration {}: mainline delay {}, other delay {}",
        best.moe.objective,
        best.iteration,
        main.iter().map(|d| d.delay).sum::<u32>(),
        side.iter().map(|d| d.delay).sum::<u32>()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
