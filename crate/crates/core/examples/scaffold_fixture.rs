//! Writes the bundled arterial scenarios to a scratch directory and reads
//! them back.

use phasetime::fixtures::{fixture, FIXTURES};
use phasetime::Instance;

pub fn run_example() -> phasetime::Result<()> {
    let root = std::env::temp_dir().join(format!("phasetime-scaffold-{}", std::process::id()));
    for name in FIXTURES {
        let inst = fixture(name)?;
        let dir = root.join(name);
        inst.write_dir(&dir)?;
        let back = Instance::load_dir(&dir)?;
        assert_eq!(back.docs(), inst.docs());
        let net = &back.scenario.network;
        let controlled = net.controlled_links().len();
        println!(
            "{name:<11} H={:<3} {} nodes, {} regular + {controlled} controlled links, {} vehicles, policy {}",
            net.horizon,
            net.nodes.len(),
            net.links.len() - controlled,
            back.scenario.vehicles.len(),
            back.phases.policy.name()
        );
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
