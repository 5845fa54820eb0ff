//! Time-space diagrams and measures of effectiveness for a solved arterial.

use phasetime::fixtures::fixture;
use phasetime::lagrangian::{solve, SolveConfig};
use phasetime::report::write_reports;

pub fn run_example() -> phasetime::Result<()> {
    let inst = fixture("exp1-s4")?;
    let best = solve(&inst, &SolveConfig { max_iter: 40, ..Default::default() })?.best.expect("feasible plan");
    let dir = std::env::temp_dir().join(format!("phasetime-report-{}", std::process::id()));
    for path in write_reports(&dir, &inst, &best.plan, &best.trajectories, &best.moe)? {
        println!("{}", path.display());
    }
    println!("arrivals on green: {:?}", best.moe.arrivals_during_green);
    println!("arrivals otherwise: {:?}", best.moe.arrivals_during_non_green);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
