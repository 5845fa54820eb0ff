//! Road network, vehicle path flows and the per-vehicle quantities derived
//! from them (path membership, last-link marks, free-flow schedules and the
//! FIFO ordering on every link).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinkKind {
    Regular,
    Controlled { intersection: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    /// Free-flow travel time in whole seconds.
    pub fftt: u32,
    /// Saturation rate in vehicles per second.
    pub sat_rate: f64,
    /// `None` means the link has no storage limit.
    pub storage: Option<u32>,
    pub kind: LinkKind,
}

impl Link {
    pub fn is_controlled(&self) -> bool {
        matches!(self.kind, LinkKind::Controlled { .. })
    }

    pub fn intersection(&self) -> Option<&str> {
        match &self.kind {
            LinkKind::Controlled { intersection } => Some(intersection),
            LinkKind::Regular => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub nodes: BTreeSet<NodeId>,
    pub links: Vec<Link>,
    pub horizon: u32,
    pub time_step: u32,
    by_pair: HashMap<(NodeId, NodeId), LinkId>,
}

impl RoadNetwork {
    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn find(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.by_pair.get(&(from, to)).copied()
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> + '_ {
        (0..self.links.len()).map(LinkId)
    }

    pub fn controlled_links(&self) -> Vec<LinkId> {
        self.link_ids().filter(|&l| self.link(l).is_controlled()).collect()
    }

    /// Links ordered so that every link appears after all links feeding into
    /// it, or `None` when the link graph has a cycle.
    pub fn topological_links(&self) -> Option<Vec<LinkId>> {
        let n = self.links.len();
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, la) in self.links.iter().enumerate() {
            for (b, lb) in self.links.iter().enumerate() {
                if la.to == lb.from && !(lb.to == la.from) {
                    out[a].push(b);
                    indegree[b] += 1;
                }
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&i) = ready.iter().next() {
            ready.remove(&i);
            order.push(LinkId(i));
            for &j in &out[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.insert(j);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehiclePath {
    pub vid: u32,
    pub t0: u32,
    pub nodes: Vec<NodeId>,
    /// Resolved links between consecutive nodes.
    pub links: Vec<LinkId>,
}

impl VehiclePath {
    pub fn origin(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().expect("validated path has nodes")
    }
}

/// A loaded, validated network together with its vehicle set.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub vehicles: Vec<VehiclePath>,
}

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StorageDoc {
    Vehicles(i64),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlDoc {
    pub intersection: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub from: NodeId,
    pub to: NodeId,
    pub fftt: i64,
    pub sat_rate_vph: f64,
    #[serde(default = "one_lane")]
    pub lanes: u32,
    /// Vehicle count, or `"unbounded"`/absent for no limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlDoc>,
}

fn one_lane() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub horizon: i64,
    #[serde(default = "one_second")]
    pub time_step: u32,
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkDoc>,
}

fn one_second() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleDoc {
    pub vid: u32,
    pub t0: i64,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclesDoc {
    pub vehicles: Vec<VehicleDoc>,
}

/// Parses and validates the network and vehicle documents.
///
/// All problems found are reported together; each carries the document and
/// field it was found in.
pub fn load_scenario(network_doc: &str, vehicles_doc: &str) -> Result<Scenario> {
    let net: NetworkDoc =
        serde_json::from_str(network_doc).map_err(|source| Error::Parse { doc: "network.json", source })?;
    let veh: VehiclesDoc =
        serde_json::from_str(vehicles_doc).map_err(|source| Error::Parse { doc: "vehicles.json", source })?;
    build_scenario(&net, &veh)
}

pub fn build_scenario(net: &NetworkDoc, veh: &VehiclesDoc) -> Result<Scenario> {
    let mut issues = Vec::new();
    let nodes: BTreeSet<NodeId> = net.nodes.iter().copied().collect();
    if nodes.len() != net.nodes.len() {
        issues.push(Issue::new("network.json: nodes", "duplicate node ids"));
    }
    if net.time_step != 1 {
        issues.push(Issue::new("network.json: time_step", "only 1-second steps are supported"));
    }

    let mut links = Vec::with_capacity(net.links.len());
    let mut by_pair = HashMap::new();
    for (k, l) in net.links.iter().enumerate() {
        let at = |field: &str| format!("network.json: links[{k}].{field}");
        for (field, node) in [("from", l.from), ("to", l.to)] {
            if !nodes.contains(&node) {
                issues.push(Issue::new(at(field), format!("unknown node {node}")));
            }
        }
        if l.from == l.to {
            issues.push(Issue::new(at("to"), "self loops are not links"));
        }
        if by_pair.insert((l.from, l.to), LinkId(k)).is_some() {
            issues.push(Issue::new(at("from"), format!("duplicate link ({}, {})", l.from, l.to)));
        }
        if l.fftt < 1 {
            issues.push(Issue::new(at("fftt"), format!("must be >= 1, got {}", l.fftt)));
        }
        if !(l.sat_rate_vph > 0.0) || !l.sat_rate_vph.is_finite() {
            issues.push(Issue::new(at("sat_rate_vph"), format!("must be positive, got {}", l.sat_rate_vph)));
        }
        if l.lanes == 0 {
            issues.push(Issue::new(at("lanes"), "must be >= 1"));
        }
        let storage = match &l.storage {
            None => None,
            Some(StorageDoc::Vehicles(n)) if *n >= 1 => Some(*n as u32),
            Some(StorageDoc::Vehicles(n)) => {
                issues.push(Issue::new(at("storage"), format!("must be >= 1, got {n}")));
                None
            }
            Some(StorageDoc::Word(w)) if w == "unbounded" => None,
            Some(StorageDoc::Word(w)) => {
                issues.push(Issue::new(at("storage"), format!("expected a count or \"unbounded\", got {w:?}")));
                None
            }
        };
        let kind = match &l.control {
            Some(c) if c.intersection.is_empty() => {
                issues.push(Issue::new(at("control.intersection"), "empty intersection id"));
                LinkKind::Regular
            }
            Some(c) => LinkKind::Controlled { intersection: c.intersection.clone() },
            None => LinkKind::Regular,
        };
        links.push(Link {
            from: l.from,
            to: l.to,
            fftt: l.fftt.max(1) as u32,
            sat_rate: l.sat_rate_vph * l.lanes as f64 / 3600.0,
            storage,
            kind,
        });
    }
    if net.horizon < 1 {
        issues.push(Issue::new("network.json: horizon", format!("must be >= 1, got {}", net.horizon)));
    }
    let horizon = net.horizon.max(1) as u32;
    let network = RoadNetwork { nodes, links, horizon, time_step: 1, by_pair };

    let mut vehicles = Vec::with_capacity(veh.vehicles.len());
    let mut seen = BTreeSet::new();
    for (k, v) in veh.vehicles.iter().enumerate() {
        let at = |field: &str| format!("vehicles.json: vehicles[{k}] (vid {}).{field}", v.vid);
        if !seen.insert(v.vid) {
            issues.push(Issue::new(at("vid"), "duplicate vehicle id"));
        }
        if v.t0 < 0 {
            issues.push(Issue::new(at("t0"), format!("must be >= 0, got {}", v.t0)));
        }
        if v.nodes.len() < 2 {
            issues.push(Issue::new(at("nodes"), "a path needs at least two nodes"));
            continue;
        }
        let mut path_links = Vec::with_capacity(v.nodes.len() - 1);
        let mut ok = true;
        for (n, pair) in v.nodes.windows(2).enumerate() {
            match network.find(pair[0], pair[1]) {
                Some(l) => path_links.push(l),
                None => {
                    ok = false;
                    issues.push(Issue::new(
                        at(&format!("nodes[{n}..={}]", n + 1)),
                        format!("no link ({}, {})", pair[0], pair[1]),
                    ));
                }
            }
        }
        if !ok {
            continue;
        }
        let mut visited = BTreeSet::new();
        if !v.nodes.iter().all(|n| visited.insert(*n)) {
            issues.push(Issue::new(at("nodes"), "path revisits a node"));
            continue;
        }
        let last = *path_links.last().expect("non-empty");
        if network.link(last).is_controlled() {
            issues.push(Issue::new(at("nodes"), "the last link of a path must not be signal-controlled"));
        }
        let t0 = v.t0.max(0) as u32;
        let ff: u32 = path_links.iter().map(|&l| network.link(l).fftt).sum();
        if t0 + ff > horizon {
            issues.push(Issue::new(
                at("t0"),
                format!("free-flow arrival {} is beyond horizon {horizon}", t0 + ff),
            ));
        }
        vehicles.push(VehiclePath { vid: v.vid, t0, nodes: v.nodes.clone(), links: path_links });
    }

    if !issues.is_empty() {
        return Err(Error::Scenario(issues));
    }
    vehicles.sort_by_key(|v| v.vid);
    Ok(Scenario { network, vehicles })
}

impl Scenario {
    pub fn to_docs(&self) -> (NetworkDoc, VehiclesDoc) {
        let net = NetworkDoc {
            horizon: self.network.horizon as i64,
            time_step: 1,
            nodes: self.network.nodes.iter().copied().collect(),
            links: self
                .network
                .links
                .iter()
                .map(|l| LinkDoc {
                    from: l.from,
                    to: l.to,
                    fftt: l.fftt as i64,
                    sat_rate_vph: l.sat_rate * 3600.0,
                    lanes: 1,
                    storage: Some(match l.storage {
                        Some(n) => StorageDoc::Vehicles(n as i64),
                        None => StorageDoc::Word("unbounded".into()),
                    }),
                    control: l.intersection().map(|i| ControlDoc { intersection: i.to_string() }),
                })
                .collect(),
        };
        let veh = VehiclesDoc {
            vehicles: self
                .vehicles
                .iter()
                .map(|v| VehicleDoc { vid: v.vid, t0: v.t0 as i64, nodes: v.nodes.clone() })
                .collect(),
        };
        (net, veh)
    }

    pub fn horizon(&self) -> u32 {
        self.network.horizon
    }
}

// ---------------------------------------------------------------------------
// Derived per-vehicle quantities
// ---------------------------------------------------------------------------

/// Per-vehicle path quantities and the FIFO order on every link.
///
/// Vehicles are addressed by their index in `Scenario::vehicles`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAux {
    /// Earliest (non-delayed) entry second for each link of each path.
    pub earliest: Vec<Vec<u32>>,
    /// Free-flow path travel time, attached to the last link.
    pub free_flow: Vec<u32>,
    /// For every link, the vehicles traversing it in FIFO order.
    pub fifo_chain: Vec<Vec<usize>>,
    /// `(vehicle, link) -> position in that link's FIFO chain`.
    fifo_rank: HashMap<(usize, LinkId), usize>,
    /// `(vehicle, link) -> index of the link in the vehicle's path`.
    position: HashMap<(usize, LinkId), usize>,
    last_link: Vec<LinkId>,
}

pub fn derive_path_aux(scenario: &Scenario) -> PathAux {
    let net = &scenario.network;
    let mut earliest = Vec::with_capacity(scenario.vehicles.len());
    let mut free_flow = Vec::with_capacity(scenario.vehicles.len());
    let mut position = HashMap::new();
    let mut users: BTreeMap<LinkId, Vec<(u32, u32, usize)>> = BTreeMap::new();
    for (v, path) in scenario.vehicles.iter().enumerate() {
        let mut t = path.t0;
        let mut e = Vec::with_capacity(path.links.len());
        for (k, &l) in path.links.iter().enumerate() {
            e.push(t);
            position.insert((v, l), k);
            users.entry(l).or_default().push((t, path.vid, v));
            t += net.link(l).fftt;
        }
        free_flow.push(t - path.t0);
        earliest.push(e);
    }
    let mut fifo_chain = vec![Vec::new(); net.links.len()];
    let mut fifo_rank = HashMap::new();
    for (l, mut list) in users {
        // earlier free-flow entry first, ties by vehicle id
        list.sort_unstable();
        for (rank, &(_, _, v)) in list.iter().enumerate() {
            fifo_rank.insert((v, l), rank);
        }
        fifo_chain[l.0] = list.into_iter().map(|(_, _, v)| v).collect();
    }
    let last_link = scenario.vehicles.iter().map(|p| *p.links.last().expect("non-empty path")).collect();
    PathAux { earliest, free_flow, fifo_chain, fifo_rank, position, last_link }
}

impl PathAux {
    /// Path membership indicator.
    pub fn omega(&self, v: usize, link: LinkId) -> bool {
        self.position.contains_key(&(v, link))
    }

    /// Last-link indicator.
    pub fn phi(&self, v: usize, link: LinkId) -> bool {
        self.last_link[v] == link
    }

    /// Free-flow path time if `link` is the vehicle's last link, else 0.
    pub fn c(&self, v: usize, link: LinkId) -> u32 {
        if self.phi(v, link) {
            self.free_flow[v]
        } else {
            0
        }
    }

    /// Earliest entry into `link`, or 0 when the link is not on the path.
    pub fn e(&self, v: usize, link: LinkId) -> u32 {
        self.position.get(&(v, link)).map_or(0, |&k| self.earliest[v][k])
    }

    /// FIFO indicator: 1 when `v` must enter `link` no later than `w`.
    pub fn fifo(&self, v: usize, w: usize, link: LinkId) -> bool {
        match (self.fifo_rank.get(&(v, link)), self.fifo_rank.get(&(w, link))) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    pub fn fifo_rank(&self, v: usize, link: LinkId) -> Option<usize> {
        self.fifo_rank.get(&(v, link)).copied()
    }

    pub fn path_position(&self, v: usize, link: LinkId) -> Option<usize> {
        self.position.get(&(v, link)).copied()
    }

    pub fn vehicle_count(&self) -> usize {
        self.free_flow.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor(horizon: i64) -> NetworkDoc {
        let link = |from, to, fftt| LinkDoc {
            from,
            to,
            fftt,
            sat_rate_vph: 1800.0,
            lanes: 2,
            storage: Some(StorageDoc::Vehicles(10)),
            control: None,
        };
        NetworkDoc {
            horizon,
            time_step: 1,
            nodes: vec![1, 2, 3, 4, 5],
            links: vec![link(1, 2, 10), link(2, 3, 12), link(3, 4, 10), link(5, 3, 4)],
        }
    }

    fn vehicles(list: &[(u32, i64, &[NodeId])]) -> VehiclesDoc {
        VehiclesDoc {
            vehicles: list.iter().map(|&(vid, t0, nodes)| VehicleDoc { vid, t0, nodes: nodes.to_vec() }).collect(),
        }
    }

    #[test]
    fn earliest_entries_accumulate_fftt() {
        let s = build_scenario(&corridor(100), &vehicles(&[(1, 0, &[1, 2, 3, 4])])).unwrap();
        let aux = derive_path_aux(&s);
        assert_eq!(aux.earliest[0], vec![0, 10, 22]);
        let last = s.network.find(3, 4).unwrap();
        assert_eq!(aux.c(0, last), 32);
        assert_eq!(aux.c(0, s.network.find(1, 2).unwrap()), 0);
        assert!(aux.phi(0, last));
    }

    #[test]
    fn fifo_follows_departure_order() {
        let s = build_scenario(&corridor(100), &vehicles(&[(1, 0, &[1, 2, 3, 4]), (2, 5, &[1, 2, 3, 4])])).unwrap();
        let aux = derive_path_aux(&s);
        for l in s.vehicles[0].links.clone() {
            assert!(aux.fifo(0, 1, l));
            assert!(!aux.fifo(1, 0, l));
        }
    }

    #[test]
    fn fifo_empty_on_disjoint_paths() {
        let s = build_scenario(&corridor(100), &vehicles(&[(1, 0, &[1, 2]), (2, 0, &[5, 3, 4])])).unwrap();
        let aux = derive_path_aux(&s);
        for l in s.network.link_ids() {
            assert!(!aux.fifo(0, 1, l) && !aux.fifo(1, 0, l));
        }
    }

    #[test]
    fn fifo_ties_break_by_vehicle_id() {
        let s = build_scenario(&corridor(100), &vehicles(&[(7, 3, &[1, 2, 3]), (4, 3, &[1, 2, 3])])).unwrap();
        let aux = derive_path_aux(&s);
        // vehicles are stored sorted by id: index 0 is vid 4
        assert_eq!(s.vehicles[0].vid, 4);
        assert!(aux.fifo(0, 1, s.network.find(1, 2).unwrap()));
    }

    #[test]
    fn empty_vehicle_list_is_valid() {
        let s = build_scenario(&corridor(100), &vehicles(&[])).unwrap();
        assert!(s.vehicles.is_empty());
        assert_eq!(derive_path_aux(&s).vehicle_count(), 0);
    }

    #[test]
    fn missing_link_is_named() {
        let err = build_scenario(&corridor(100), &vehicles(&[(1, 0, &[1, 3])])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("no link (1, 3)"), "{msg}");
    }

    #[test]
    fn issues_are_aggregated() {
        let mut net = corridor(20);
        net.links[0].fftt = 0;
        net.links[1].sat_rate_vph = -1.0;
        net.links[2].to = 99;
        let Err(Error::Scenario(issues)) = build_scenario(&net, &vehicles(&[(1, 0, &[1, 2, 3])])) else {
            panic!("expected validation failure");
        };
        let locs: Vec<_> = issues.iter().map(|i| i.location.as_str()).collect();
        assert!(locs.iter().any(|l| l.ends_with("links[0].fftt")));
        assert!(locs.iter().any(|l| l.ends_with("links[1].sat_rate_vph")));
        assert!(locs.iter().any(|l| l.ends_with("links[2].to")));
    }

    #[test]
    fn horizon_too_short_rejected() {
        let err = build_scenario(&corridor(20), &vehicles(&[(1, 0, &[1, 2, 3, 4])])).unwrap_err();
        assert!(err.to_string().contains("beyond horizon"));
    }

    #[test]
    fn controlled_last_link_rejected() {
        let mut net = corridor(100);
        net.links[2].control = Some(ControlDoc { intersection: "I1".into() });
        let err = build_scenario(&net, &vehicles(&[(1, 0, &[2, 3, 4])])).unwrap_err();
        assert!(err.to_string().contains("last link"));
    }

    #[test]
    fn storage_word_and_rate_conversion() {
        let mut net = corridor(100);
        net.links[0].storage = Some(StorageDoc::Word("unbounded".into()));
        let s = build_scenario(&net, &vehicles(&[])).unwrap();
        assert_eq!(s.network.links[0].storage, None);
        assert_eq!(s.network.links[1].storage, Some(10));
        assert_eq!(s.network.links[0].sat_rate, 1.0);
    }

    #[test]
    fn parse_error_reports_line() {
        let err = load_scenario("{\n \"horizon\": }", "{\"vehicles\": []}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
