//! Built-in scenarios: the two-intersection arterial used throughout the
//! examples, and a seeded generator of tiny random instances small enough
//! for exhaustive search.
//!
//! The arterial has intersections `I1` (west) and `I2` (east).  Mainline
//! links between them take 12 s; each approach is a 4 s feeder into a 2 s
//! stop-line link.  Node numbering:
//!
//! ```text
//!             13          17                21          25
//!             |14         |18               |22         |26
//!  1 -> 2 ==> 3 -------------> 4 ==> 5 -> 6
//! 12 <- 11 <== 10 <------------ 9 <== 8 <- 7
//!             15|         19|               23|         27|
//!             16          20                24          28
//! ```
//!
//! `==>` marks a controlled link.  Side streets cross at `14->15`, `18->19`
//! (I1) and `22->23`, `26->27` (I2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::network::{build_scenario, ControlDoc, LinkDoc, NetworkDoc, NodeId, StorageDoc, VehicleDoc, VehiclesDoc};
use crate::phases::{GroupDoc, GroupStepDoc, IntersectionDoc, LocalPhaseDoc, PhasesDoc, PolicyDoc, ServedLinkDoc};
use crate::phases::Protection;

pub const FIXTURES: [&str; 5] = ["exp1-s1", "exp1-s2", "exp1-s3", "exp1-s4", "appendix-a"];

/// Local phase ids used by the arterial fixtures.
pub const EW: u32 = 1;
pub const NS: u32 = 2;

const SAT_VPH: f64 = 1800.0;
const LANES: u32 = 2;

/// Links whose storage is cut in the congested scenarios.
pub const MAINLINE_MIDDLE: [(NodeId, NodeId); 2] = [(3, 4), (9, 10)];

/// Controlled links, by intersection and approach.
pub const MAINLINE_CONTROLLED: [(NodeId, NodeId, &str); 4] = [(2, 3, "I1"), (10, 11, "I1"), (4, 5, "I2"), (8, 9, "I2")];
pub const SIDE_CONTROLLED: [(NodeId, NodeId, &str); 4] = [(14, 15, "I1"), (18, 19, "I1"), (22, 23, "I2"), (26, 27, "I2")];

fn link(from: NodeId, to: NodeId, fftt: i64, storage: u32, control: Option<&str>) -> LinkDoc {
    LinkDoc {
        from,
        to,
        fftt,
        sat_rate_vph: SAT_VPH,
        lanes: LANES,
        storage: Some(StorageDoc::Vehicles(storage as i64)),
        control: control.map(|c| ControlDoc { intersection: c.to_string() }),
    }
}

fn arterial(horizon: i64, middle_storage: u32) -> NetworkDoc {
    let mut links = vec![
        link(1, 2, 4, 10, None),
        link(2, 3, 2, 2, Some("I1")),
        link(3, 4, 12, middle_storage, None),
        link(4, 5, 2, 2, Some("I2")),
        link(5, 6, 4, 10, None),
        link(7, 8, 4, 10, None),
        link(8, 9, 2, 2, Some("I2")),
        link(9, 10, 12, middle_storage, None),
        link(10, 11, 2, 2, Some("I1")),
        link(11, 12, 4, 10, None),
    ];
    for (a, (_, _, x)) in (13..).step_by(4).zip(SIDE_CONTROLLED) {
        links.push(link(a, a + 1, 4, 10, None));
        links.push(link(a + 1, a + 2, 2, 2, Some(x)));
        links.push(link(a + 2, a + 3, 4, 10, None));
    }
    NetworkDoc { horizon, time_step: 1, nodes: (1..=28).collect(), links }
}

fn local(id: u32, serves: &[(NodeId, NodeId)]) -> LocalPhaseDoc {
    LocalPhaseDoc {
        id,
        gmin: 5,
        gmax: Some(40),
        yellow: 3,
        allred: 2,
        serves: serves
            .iter()
            .map(|&(from, to)| ServedLinkDoc { from, to, protection: Protection::Protected })
            .collect(),
    }
}

fn arterial_phases(policy: PolicyDoc) -> PhasesDoc {
    let at = |x: &str| -> IntersectionDoc {
        let pick = |set: &[(NodeId, NodeId, &str)]| -> Vec<(NodeId, NodeId)> {
            set.iter().filter(|l| l.2 == x).map(|l| (l.0, l.1)).collect()
        };
        IntersectionDoc {
            id: x.to_string(),
            phases: vec![local(EW, &pick(&MAINLINE_CONTROLLED)), local(NS, &pick(&SIDE_CONTROLLED))],
        }
    };
    PhasesDoc {
        delta: 0.5,
        rho_y: 0.2,
        intersections: vec![at("I1"), at("I2")],
        initial_phase: None,
        enforce_local_gmax: false,
        policy,
    }
}

/// Departure times of the twenty arterial vehicles, in vid order:
/// ten eastbound, then the side-street pairs 17, 13, 25, 21, then two
/// westbound.
struct Demand {
    eastbound: [i64; 10],
    side_i1: [i64; 2],
    side_i2: [i64; 2],
    westbound: [i64; 2],
}

fn vehicles(d: &Demand) -> VehiclesDoc {
    let mut out = Vec::new();
    let mut push = |t0: i64, nodes: &[NodeId]| {
        out.push(VehicleDoc { vid: out.len() as u32 + 1, t0, nodes: nodes.to_vec() });
    };
    for &t in &d.eastbound {
        push(t, &[1, 2, 3, 4, 5, 6]);
    }
    // two per side street: I1 southbound, I1 northbound, I2 southbound,
    // I2 northbound
    for (o, times) in [(17, d.side_i1), (13, d.side_i1), (25, d.side_i2), (21, d.side_i2)] {
        for t in times {
            push(t, &[o, o + 1, o + 2, o + 3]);
        }
    }
    for &t in &d.westbound {
        push(t, &[7, 8, 9, 10, 11, 12]);
    }
    VehiclesDoc { vehicles: out }
}

/// True for the ten eastbound mainline vehicles.
pub fn is_mainline(vid: u32) -> bool {
    (1..=10).contains(&vid)
}

fn platoon(start: i64, headway: i64) -> [i64; 10] {
    std::array::from_fn(|i| start + headway * i as i64)
}

/// Builds one of the named arterial scenarios.
pub fn fixture(name: &str) -> Result<Instance> {
    let (horizon, storage, demand, policy) = match name {
        "exp1-s1" => (
            60,
            10,
            Demand { eastbound: platoon(0, 1), side_i1: [40, 41], side_i2: [40, 41], westbound: [0, 1] },
            PolicyDoc::Full,
        ),
        "exp1-s2" => (60, 10, s2_demand(), PolicyDoc::Full),
        "exp1-s3" => (
            70,
            5,
            Demand { eastbound: platoon(0, 1), side_i1: [40, 41], side_i2: [40, 41], westbound: [0, 1] },
            PolicyDoc::Full,
        ),
        "exp1-s4" => (
            80,
            5,
            Demand {
                // two bunches of five that fill the middle link exactly
                eastbound: [0, 1, 2, 3, 4, 13, 14, 15, 16, 17],
                side_i1: [15, 16],
                side_i2: [29, 30],
                westbound: [20, 21],
            },
            PolicyDoc::Full,
        ),
        "appendix-a" => (60, 10, s2_demand(), band_groups()),
        other => return Err(Error::UnknownFixture(other.to_string())),
    };
    let scenario = build_scenario(&arterial(horizon, storage), &vehicles(&demand))?;
    Instance::new(scenario, arterial_phases(policy), None)
}

fn s2_demand() -> Demand {
    Demand { eastbound: platoon(0, 1), side_i1: [4, 5], side_i2: [18, 19], westbound: [20, 21] }
}

/// Fixed blocks: a long or short mainline band, and each phase with a side
/// street green for 6 s.
fn band_groups() -> PolicyDoc {
    let step = |a: u32, b: u32, green: u32| GroupStepDoc { phase: vec![a, b], green };
    let group = |name: &str, s: GroupStepDoc| GroupDoc { name: name.to_string(), steps: vec![s] };
    PolicyDoc::Groups {
        groups: vec![
            group("band-30", step(EW, EW, 30)),
            group("band-6", step(EW, EW, 6)),
            group("side-i2", step(EW, NS, 6)),
            group("side-i1", step(NS, EW, 6)),
            group("side-both", step(NS, NS, 6)),
        ],
        free_phases: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Random tiny instances
// ---------------------------------------------------------------------------

/// Seeded tiny instance: one or two intersections with two local phases
/// each, an arterial with side streets, at most six vehicles, horizon at
/// most 60 s.
pub fn random_tiny(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_int = rng.gen_range(1..=2usize);
    let mut links = Vec::new();
    let mut routes: Vec<Vec<NodeId>> = Vec::new();
    let storage = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            None
        } else {
            Some(StorageDoc::Vehicles(rng.gen_range(1..=4)))
        }
    };
    let mut mk = |rng: &mut ChaCha8Rng, from: NodeId, to: NodeId, ctrl: Option<usize>| {
        let fftt = if ctrl.is_some() { rng.gen_range(1..=2) } else { rng.gen_range(1..=4) };
        links.push(LinkDoc {
            from,
            to,
            fftt,
            sat_rate_vph: 1800.0,
            lanes: rng.gen_range(1..=2),
            storage: storage(rng),
            control: ctrl.map(|i| ControlDoc { intersection: format!("X{i}") }),
        });
    };

    // arterial 1 -> 2 => 3 (-> 4 => 5) -> exit
    let mut main = vec![1];
    let mut node = 1;
    for i in 0..n_int {
        mk(&mut rng, node, node + 1, None);
        mk(&mut rng, node + 1, node + 2, Some(i));
        main.extend([node + 1, node + 2]);
        node += 2;
    }
    mk(&mut rng, node, node + 1, None);
    main.push(node + 1);
    node += 2;
    routes.push(main);
    let mut side_links = Vec::new();
    for i in 0..n_int {
        let o = node;
        mk(&mut rng, o, o + 1, None);
        mk(&mut rng, o + 1, o + 2, Some(i));
        mk(&mut rng, o + 2, o + 3, None);
        side_links.push((o + 1, o + 2));
        routes.push(vec![o, o + 1, o + 2, o + 3]);
        node += 4;
    }

    let mut intersections = Vec::new();
    for i in 0..n_int {
        let main_ctrl = (2 * i as NodeId + 2, 2 * i as NodeId + 3);
        let phase = |rng: &mut ChaCha8Rng, id: u32, serves: Vec<ServedLinkDoc>| {
            let gmin = rng.gen_range(1..=3);
            LocalPhaseDoc {
                id,
                gmin,
                gmax: if rng.gen_bool(0.2) { None } else { Some(gmin + rng.gen_range(0..=4)) },
                yellow: rng.gen_range(0..=1),
                allred: rng.gen_range(0..=1),
                serves,
            }
        };
        let served = |(from, to): (NodeId, NodeId), protection| ServedLinkDoc { from, to, protection };
        let mut main_serves = vec![served(main_ctrl, Protection::Protected)];
        if rng.gen_bool(0.25) {
            main_serves.push(served(side_links[i], Protection::Permissive));
        }
        let a = phase(&mut rng, 1, main_serves);
        let b = phase(&mut rng, 2, vec![served(side_links[i], Protection::Protected)]);
        intersections.push(IntersectionDoc { id: format!("X{i}"), phases: vec![a, b] });
    }

    let count = rng.gen_range(1..=6);
    let mut vehicles = Vec::new();
    for vid in 1..=count {
        let r = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..routes.len()) };
        vehicles.push(VehicleDoc { vid, t0: rng.gen_range(0..=8), nodes: routes[r].clone() });
    }
    let ff_end = vehicles
        .iter()
        .map(|v| {
            let ff: i64 = v
                .nodes
                .windows(2)
                .map(|p| links.iter().find(|l| l.from == p[0] && l.to == p[1]).expect("route link").fftt)
                .sum();
            v.t0 + ff
        })
        .max()
        .unwrap_or(0);
    let horizon = (ff_end + rng.gen_range(6..=14)).min(60);
    let nodes = (1..node).collect();
    let net = NetworkDoc { horizon, time_step: 1, nodes, links };
    let scenario = build_scenario(&net, &VehiclesDoc { vehicles }).expect("generated scenario is valid");
    let phases = PhasesDoc {
        delta: 0.5,
        rho_y: 0.5,
        intersections,
        initial_phase: None,
        enforce_local_gmax: false,
        policy: PolicyDoc::Full,
    };
    Instance::new(scenario, phases, None).expect("generated phases are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arterial_shape() {
        let inst = fixture("exp1-s1").unwrap();
        let net = &inst.scenario.network;
        assert_eq!(net.nodes.len(), 28);
        assert_eq!(net.controlled_links().len(), 8);
        assert_eq!(net.links.len() - 8, 14);
        assert_eq!(inst.scenario.vehicles.len(), 20);
        assert_eq!(inst.phases.set.len(), 4);
        for v in &inst.scenario.vehicles[..10] {
            assert_eq!((v.origin(), v.destination()), (1, 6));
        }
    }

    #[test]
    fn congested_variants_cut_middle_storage() {
        for name in ["exp1-s3", "exp1-s4"] {
            let inst = fixture(name).unwrap();
            let net = &inst.scenario.network;
            for (a, b) in MAINLINE_MIDDLE {
                assert_eq!(net.link(net.find(a, b).unwrap()).storage, Some(5), "{name}");
            }
        }
        let net = &fixture("exp1-s2").unwrap().scenario.network;
        assert_eq!(net.link(net.find(3, 4).unwrap()).storage, Some(10));
    }

    #[test]
    fn every_fixture_builds() {
        for name in FIXTURES {
            fixture(name).unwrap();
        }
        assert!(matches!(fixture("exp9"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn random_instances_are_reproducible() {
        for seed in 0..20 {
            let a = random_tiny(seed);
            let b = random_tiny(seed);
            assert_eq!(a.docs(), b.docs());
            assert!(a.phases.set.len() <= 4);
            assert!(a.scenario.vehicles.len() <= 6);
            assert!(a.horizon() <= 60);
        }
    }
}
