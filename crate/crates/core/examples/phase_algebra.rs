//! Generalized phases as the product of local phases, and how many
//! transitions each policy allows.

use phasetime::network::LinkId;
use phasetime::phases::{generate_generalized_phases, transition_count, Intersection, LocalPhase, TransitionPolicy, UNBOUNDED};

fn intersection(id: &str, n: usize) -> Intersection {
    let locals = (0..n)
        .map(|k| LocalPhase {
            local_id: k as u32 + 1,
            gmin: 5 + k as u32,
            gmax: if k == 0 { UNBOUNDED } else { 30 + 5 * k as u32 },
            yellow: 3,
            allred: 1 + k as u32 % 2,
            served: vec![(LinkId(0), phasetime::phases::Protection::Protected)],
        })
        .collect();
    Intersection { id: id.to_string(), locals }
}

pub fn run_example() -> phasetime::Result<()> {
    let demo = generate_generalized_phases(vec![intersection("A", 2), intersection("B", 2)])?;
    for p in &demo.phases {
        println!("{:?}: gmin {} gmax {} yellow {} allred {}", p.index, p.gmin, p.gmax, p.yellow, p.allred);
    }

    let sizes = [4, 2, 2, 4];
    let corridor: Vec<_> = sizes.iter().enumerate().map(|(i, &n)| intersection(&format!("X{i}"), n)).collect();
    let set = generate_generalized_phases(corridor)?;
    let full = transition_count(&set, &TransitionPolicy::FullyAdaptive);
    let cycles = sizes.iter().map(|&n| (0..n).collect()).collect();
    let semi = transition_count(&set, &TransitionPolicy::SemiAdaptive { sequences: cycles });
    println!("{} generalized phases; {full} transitions fully adaptive, {semi} with fixed local cycles", set.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
