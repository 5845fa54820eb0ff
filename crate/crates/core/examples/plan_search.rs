//! Least-cost signal plan under a price field, with and without local
//! maximum greens.

use phasetime::fixtures::{fixture, MAINLINE_CONTROLLED, SIDE_CONTROLLED};
use phasetime::lagrangian::MultiplierField;
use phasetime::ptgraph::{shortest_plan, GmaxFilter, SearchOptions, SignalPlan};
use phasetime::Instance;

fn show(inst: &Instance, plan: &SignalPlan, cost: f64) {
    let steps: Vec<String> = plan
        .arcs
        .iter()
        .map(|a| format!("{:?}@{}..{}", inst.phases.set.phases[a.phase].index, a.tau, a.h()))
        .collect();
    println!("  cost {cost:.2}: {}", steps.join(" -> "));
}

pub fn run_example() -> phasetime::Result<()> {
    let inst = fixture("exp1-s2")?;
    let cfg = &inst.phases;
    let net = &inst.scenario.network;
    let mut lam = MultiplierField::zeros(cfg.mapping.links.len(), inst.horizon());
    // mainline at I1 wanted all along, the I2 side street from t=25
    for (links, at, from, to) in [(&MAINLINE_CONTROLLED[..], "I1", 0, 55), (&SIDE_CONTROLLED[..], "I2", 25, 55)] {
        for &(a, b, _) in links.iter().filter(|l| l.2 == at) {
            let k = cfg.mapping.position(net.find(a, b).expect("fixture link")).expect("controlled");
            for t in from..to {
                lam.set(k, t, 1.0);
            }
        }
    }
    for gmax_local in [GmaxFilter::Ignore, GmaxFilter::Enforce] {
        println!("local maximum greens: {gmax_local:?}");
        let (plan, cost) = shortest_plan(cfg, net, &lam, SearchOptions { gmax_local, ..Default::default() })?;
        show(&inst, &plan, cost);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
