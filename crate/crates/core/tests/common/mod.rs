#![allow(dead_code)]

use std::collections::HashMap;

use petgraph::algo::bellman_ford;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phasetime::lagrangian::MultiplierField;
use phasetime::phases::PhaseConfig;
use phasetime::ptgraph::{arcs_from, materialize_arcs, ArcCoster, ClearancePlacement, SignalPlan};
use phasetime::Instance;

/// Same instance with every local maximum green removed.
pub fn unbounded(inst: &Instance) -> Instance {
    let (_, _, mut doc) = inst.docs();
    for x in &mut doc.intersections {
        for l in &mut x.phases {
            l.gmax = None;
        }
    }
    Instance::new(inst.scenario.clone(), doc, None).expect("relaxing maximum greens keeps the instance valid")
}

/// Prices on a quarter-second grid, so sums of products with saturation
/// rates and factors of 1/2 stay exact in floating point.
pub fn dyadic_prices(cfg: &PhaseConfig, horizon: u32, seed: u64) -> MultiplierField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lam = MultiplierField::zeros(cfg.mapping.links.len(), horizon);
    for v in lam.values_mut() {
        if rng.gen_bool(0.6) {
            *v = rng.gen_range(0..=16) as f64 * 0.25;
        }
    }
    lam
}

/// Least cost from the source to the sink by Bellman-Ford over every
/// materialized arc; the source reaches `(s, 0)` for each open state.
pub fn generic_shortest_cost(inst: &Instance, lam: &MultiplierField, placement: ClearancePlacement) -> Option<f64> {
    let cfg = &inst.phases;
    let horizon = inst.horizon();
    let coster = ArcCoster::new(cfg, &inst.scenario.network, lam);
    let mut g: DiGraph<(), f64> = DiGraph::new();
    let source = g.add_node(());
    let sink = g.add_node(());
    let mut ids: HashMap<(usize, u32), NodeIndex> = HashMap::new();
    let mut node = |g: &mut DiGraph<(), f64>, key| *ids.entry(key).or_insert_with(|| g.add_node(()));
    for &s in &cfg.graph.initial {
        let v = node(&mut g, (s, 0));
        g.add_edge(source, v, 0.0);
    }
    for arc in materialize_arcs(cfg, horizon, placement) {
        let from = node(&mut g, (arc.state, arc.tau));
        let to = match arc.next {
            Some((s2, _)) => node(&mut g, (s2, arc.h())),
            None => sink,
        };
        g.add_edge(from, to, coster.cost(&arc));
    }
    let paths = bellman_ford(&g, source).expect("the arc graph is acyclic");
    let d = paths.distances[sink.index()];
    d.is_finite().then_some(d)
}

/// Walks from an open state taking the arc picked by each choice in turn
/// until the sink.  `None` on a dead end or when choices run out.
pub fn walk_plan(inst: &Instance, placement: ClearancePlacement, choices: &[u32]) -> Option<SignalPlan> {
    let cfg = &inst.phases;
    let horizon = inst.horizon();
    let mut it = choices.iter();
    let initial = &cfg.graph.initial;
    let mut state = initial[*it.next()? as usize % initial.len()];
    let mut tau = 0;
    let mut arcs = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        arcs_from(cfg, state, tau, horizon, placement, &mut buf);
        if buf.is_empty() {
            return None;
        }
        let arc = buf[*it.next()? as usize % buf.len()];
        arcs.push(arc);
        match arc.next {
            Some((s2, _)) => {
                state = s2;
                tau = arc.h();
            }
            None => return Some(SignalPlan { horizon, arcs }),
        }
    }
}
