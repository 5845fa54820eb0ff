//! The same solve on several worker counts gives the same history.

use std::time::Instant;

use phasetime::fixtures::fixture;
use phasetime::lagrangian::{solve, IterationRecord, SolveConfig};

pub fn run_example() -> phasetime::Result<()> {
    let inst = fixture("exp1-s2")?;
    let mut first: Option<Vec<IterationRecord>> = None;
    for workers in [1, 2, 4] {
        let t = Instant::now();
        let out = solve(&inst, &SolveConfig { workers, max_iter: 30, ..Default::default() })?;
        let per = t.elapsed().as_secs_f64() * 1e3 / out.history.len() as f64;
        let hist: Vec<_> = out.history.iter().map(IterationRecord::without_times).collect();
        let same = first.get_or_insert_with(|| hist.clone()) == &hist;
        println!("{workers} worker(s): {per:.2} ms per iteration, history {}", if same { "identical" } else { "DIFFERS" });
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> phasetime::Result<()> {
    run_example()
}
