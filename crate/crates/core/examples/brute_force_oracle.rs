//! Exhaustive optimum on small random instances next to the solver's best.

use phasetime::exact::{brute_force_optimum, Limits};
use phasetime::fixtures::random_tiny;
use phasetime::lagrangian::{solve, SolveConfig};
use phasetime::ptgraph::ClearancePlacement;

pub fn run_example() -> phasetime::Result<()> {
    for seed in 0..6 {
        let inst = random_tiny(seed);
        let exact = match brute_force_optimum(&inst, &Limits::default(), ClearancePlacement::AfterGreen) {
            Ok(r) => r,
            Err(e) => {
                println!("seed {seed}: {e}");
                continue;
            }
        };
        let out = solve(&inst, &SolveConfig { max_iter: 50, ..Default::default() })?;
        println!(
            "seed {seed}: {} vehicles, H={}, optimum {} ({} nodes), solver {} after {} iteration(s), first LB {:.1}",
            inst.scenario.vehicles.len(),
            inst.horizon(),
            exact.objective,
            exact.nodes,
            out.best_ub(),
            out.history.len(),
            out.certified_lb
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
