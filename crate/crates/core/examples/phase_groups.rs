//! Fixed green-band blocks against a free phase sequence on the same demand.

use phasetime::fixtures::fixture;
use phasetime::lagrangian::{solve, SolveConfig};
use phasetime::phases::PolicyDoc;
use phasetime::Instance;

pub fn run_example() -> phasetime::Result<()> {
    let banded = fixture("appendix-a")?;
    let (_, _, doc) = banded.docs();
    let free = Instance::new(banded.scenario.clone(), doc, Some(&PolicyDoc::Full))?;
    for (label, inst) in [("phase groups", &banded), ("free sequence", &free)] {
        let best = solve(inst, &SolveConfig::default())?.best.expect("feasible plan");
        let groups: Vec<_> = best.plan.to_doc(&inst.phases).arcs.into_iter().map(|a| a.group.unwrap_or_else(|| format!("{:?}", a.phase))).collect();
        println!("{label:<13} delay {:>4}  {}", best.moe.total_delay, groups.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
