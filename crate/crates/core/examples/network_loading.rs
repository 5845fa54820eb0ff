//! Loads vehicles under a fixed plan, checks the loading, and compares it
//! with the capacity-free loading used for the lower bound.

use phasetime::fixtures::{fixture, MAINLINE_CONTROLLED, SIDE_CONTROLLED};
use phasetime::lagrangian::MultiplierField;
use phasetime::loader::{customized_dnl, standard_dnl, validate_feasible, CustomMode};
use phasetime::ptgraph::{shortest_plan, SearchOptions};

pub fn run_example() -> phasetime::Result<()> {
    let inst = fixture("exp1-s3")?;
    let cfg = &inst.phases;
    let net = &inst.scenario.network;
    let mut lam = MultiplierField::zeros(cfg.mapping.links.len(), inst.horizon());
    let (idle, _) = shortest_plan(cfg, net, &lam, SearchOptions::default())?;
    if let Err(e) = standard_dnl(&inst.scenario, &inst.aux, cfg, &idle) {
        println!("unpriced plan: {e}");
    }
    // the platoon first, side streets once it has gone
    for (links, from, to) in [(&MAINLINE_CONTROLLED, 0, 40), (&SIDE_CONTROLLED, 45, 65)] {
        for &(a, b, _) in links {
            let k = cfg.mapping.position(net.find(a, b).expect("fixture link")).expect("controlled");
            for t in from..to {
                lam.set(k, t, 1.0);
            }
        }
    }
    let (plan, _) = shortest_plan(cfg, net, &lam, SearchOptions::default())?;

    match standard_dnl(&inst.scenario, &inst.aux, cfg, &plan) {
        Ok((traj, moe)) => {
            let violations = validate_feasible(&traj, &plan.gamma(cfg), &inst.scenario, &inst.aux);
            println!("delay {} s, {} violation(s)", moe.total_delay, violations.len());
            for d in moe.vehicle_delays.iter().filter(|d| d.delay > 0) {
                println!("  v{} {}->{} delayed {} s", d.vid, d.origin, d.destination, d.delay);
            }
        }
        Err(e) => println!("priced plan: {e}"),
    }

    let free = MultiplierField::zeros(cfg.mapping.links.len(), inst.horizon());
    let (_, l11) = customized_dnl(&inst.scenario, &inst.aux, &free, CustomMode::Greedy)?;
    println!("without signals the delay is {}", l11.delay_scale);
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
