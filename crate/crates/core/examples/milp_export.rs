//! Exports the full model of a small instance and checks the solver's
//! answer against every row.

use phasetime::exact::{check_solution, encode_assignment, export_milp, ExportOptions};
use phasetime::fixtures::random_tiny;
use phasetime::lagrangian::{solve, SolveConfig};

pub fn run_example() -> phasetime::Result<()> {
    let inst = random_tiny(3);
    let m = export_milp(&inst, &ExportOptions::default())?;
    let counts = m.counts();
    println!("{} rows, {} columns ({} binary), {} nonzeros", counts.rows, counts.cols, counts.binaries, counts.nonzeros);
    for (family, n) in &counts.rows_by_family {
        println!("  {family:<10} {n}");
    }
    let lp = m.to_lp();
    println!("LP text: {} lines, starts {:?}", lp.lines().count(), lp.lines().next().unwrap_or(""));

    let best = solve(&inst, &SolveConfig::default())?.best.expect("feasible plan");
    let x = encode_assignment(&m, &inst, &best.trajectories, &best.plan)?;
    let report = check_solution(&m, &x);
    println!("solver plan: objective {} in the model, {} violated rows", report.objective, report.violations.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
