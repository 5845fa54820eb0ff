mod common;

use phasetime::lagrangian::MultiplierField;
use phasetime::ptgraph::{arcs_from, shortest_plan, ClearancePlacement, SearchOptions};
use phasetime::Instance;

use common::dyadic_prices;

const H: u32 = 12;

/// One intersection, phase 1 serving 2->3 and phase 2 serving 5->6, each
/// with green 2..=3 and a one-second yellow.
fn two_phase() -> Instance {
    let link = |from: u32, to: u32, control: bool| {
        let c = if control { r#", "control": {"intersection": "A"}"# } else { "" };
        format!(r#"{{"from": {from}, "to": {to}, "fftt": 1, "sat_rate_vph": 1800.0, "lanes": 1, "storage": "unbounded"{c}}}"#)
    };
    let links = [link(1, 2, false), link(2, 3, true), link(3, 7, false), link(4, 5, false), link(5, 6, true), link(6, 8, false)].join(",");
    let network = format!(r#"{{"horizon": {H}, "time_step": 1, "nodes": [1, 2, 3, 4, 5, 6, 7, 8], "links": [{links}]}}"#);
    let vehicles = r#"{"vehicles": [{"vid": 1, "t0": 0, "nodes": [1, 2, 3, 7]}, {"vid": 2, "t0": 1, "nodes": [4, 5, 6, 8]}]}"#;
    let phase = |id: u32, from: u32, to: u32| {
        format!(
            r#"{{"id": {id}, "gmin": 2, "gmax": 3, "yellow": 1, "allred": 0,
                 "serves": [{{"from": {from}, "to": {to}, "protection": "protected"}}]}}"#
        )
    };
    let phases = format!(
        r#"{{"delta": 0.5, "rho_y": 0.5, "policy": {{"mode": "full"}},
             "intersections": [{{"id": "A", "phases": [{}, {}]}}]}}"#,
        phase(1, 2, 3),
        phase(2, 5, 6)
    );
    Instance::from_docs(&network, vehicles, &phases).unwrap()
}

/// Every schedule written out by hand: alternate the two phases, hold each
/// for 2 or 3 s plus a 1 s yellow, and rest in the last phase for at most
/// 3 s up to the horizon.  Each entry is `(phase per second, transitions)`.
fn schedules() -> Vec<(Vec<(usize, Part)>, u32)> {
    fn extend(phase: usize, t: u32, so_far: &mut Vec<(usize, Part)>, n: u32, out: &mut Vec<(Vec<(usize, Part)>, u32)>) {
        if H - t <= 3 {
            let mut s = so_far.clone();
            s.extend((t..H).map(|_| (phase, Part::Green)));
            out.push((s, n));
        }
        for g in 2..=3 {
            if t + g + 1 > H {
                break;
            }
            let len = so_far.len();
            so_far.extend((0..g).map(|_| (phase, Part::Green)));
            so_far.push((phase, Part::Yellow));
            extend(1 - phase, t + g + 1, so_far, n + 1, out);
            so_far.truncate(len);
        }
    }
    let mut out = Vec::new();
    for p in 0..2 {
        extend(p, 0, &mut Vec::new(), 0, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Part {
    Green,
    Yellow,
}

/// Plan cost computed second by second from the schedule: one per
/// transition, less half the price on the served link during green and a
/// quarter of it during yellow (saturation 0.5 veh/s, yellow factor 0.5).
fn schedule_cost(s: &[(usize, Part)], n: u32, lam: &MultiplierField) -> f64 {
    let mut c = n as f64;
    for (t, &(p, part)) in s.iter().enumerate() {
        let f = match part {
            Part::Green => 0.5,
            Part::Yellow => 0.25,
        };
        c -= f * lam.get(p, t as u32);
    }
    c
}

fn count_paths(inst: &Instance) -> usize {
    fn walk(inst: &Instance, s: usize, tau: u32) -> usize {
        let mut arcs = Vec::new();
        arcs_from(&inst.phases, s, tau, H, ClearancePlacement::AfterGreen, &mut arcs);
        arcs.iter().map(|a| a.next.map_or(1, |(s2, _)| walk(inst, s2, a.h()))).sum()
    }
    inst.phases.graph.initial.iter().map(|&s| walk(inst, s, 0)).sum()
}

#[test]
fn arc_graph_has_exactly_the_hand_enumerated_plans() {
    let inst = two_phase();
    assert_eq!(inst.phases.set.len(), 2);
    assert_eq!(count_paths(&inst), schedules().len());
}

#[test]
fn labeling_finds_the_enumerated_optimum() {
    let inst = two_phase();
    let all = schedules();
    for seed in 0..200 {
        let lam = dyadic_prices(&inst.phases, H, seed);
        let best = all.iter().map(|(s, n)| schedule_cost(s, *n, &lam)).fold(f64::INFINITY, f64::min);
        let (plan, cost) = shortest_plan(&inst.phases, &inst.scenario.network, &lam, SearchOptions::default()).unwrap();
        assert_eq!(cost, best, "seed {seed}");
        // the returned plan is itself one of the enumerated schedules
        let mut s = Vec::new();
        for a in &plan.arcs {
            s.extend((0..a.green).map(|_| (a.phase, Part::Green)));
            s.extend((0..a.yellow).map(|_| (a.phase, Part::Yellow)));
        }
        let n = plan.transitions() as u32;
        assert!(all.contains(&(s.clone(), n)));
        assert_eq!(schedule_cost(&s, n, &lam), cost);
    }
}
