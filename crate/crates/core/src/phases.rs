//! Local phases, generalized phases, the link/phase mapping matrix and the
//! transition policies that shape the phase-time network.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};
use crate::network::{LinkId, NodeId, RoadNetwork};

/// Marker for "no maximum green".
pub const UNBOUNDED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protection {
    Protected,
    Permissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPhase {
    pub local_id: u32,
    pub gmin: u32,
    pub gmax: u32,
    pub yellow: u32,
    pub allred: u32,
    pub served: Vec<(LinkId, Protection)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: String,
    pub locals: Vec<LocalPhase>,
}

impl Intersection {
    fn local_pos(&self, local_id: u32) -> Option<usize> {
        self.locals.iter().position(|l| l.local_id == local_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPhase {
    /// Local phase id chosen at each intersection.
    pub index: Vec<u32>,
    /// Position of the chosen local phase in each intersection's list.
    pub locals: Vec<usize>,
    pub gmin: u32,
    pub gmax: u32,
    pub yellow: u32,
    pub allred: u32,
}

impl GeneralizedPhase {
    pub fn clearance(&self) -> u32 {
        self.yellow + self.allred
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.index.iter().map(|n| n.to_string()).collect();
        format!("<{}>", parts.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct PhaseSet {
    pub intersections: Vec<Intersection>,
    pub phases: Vec<GeneralizedPhase>,
    /// Products rejected because their derived minimum green exceeds the
    /// derived maximum green.
    pub dropped: Vec<(Vec<u32>, String)>,
    by_index: HashMap<Vec<u32>, usize>,
}

impl PhaseSet {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn find(&self, index: &[u32]) -> Option<usize> {
        self.by_index.get(index).copied()
    }

    pub fn local(&self, intersection: usize, pos: usize) -> &LocalPhase {
        &self.intersections[intersection].locals[pos]
    }

    pub fn intersection_pos(&self, id: &str) -> Option<usize> {
        self.intersections.iter().position(|i| i.id == id)
    }
}

/// Builds every product of one local phase per intersection, in
/// lexicographic order of the index vector.
pub fn generate_generalized_phases(intersections: Vec<Intersection>) -> Result<PhaseSet> {
    let mut issues = Vec::new();
    if intersections.is_empty() {
        issues.push(Issue::new("phases.json: intersections", "at least one intersection is required"));
    }
    for (i, x) in intersections.iter().enumerate() {
        if x.locals.is_empty() {
            issues.push(Issue::new(format!("phases.json: intersections[{i}] ({})", x.id), "no local phases"));
        }
        let mut ids = BTreeSet::new();
        for (k, l) in x.locals.iter().enumerate() {
            let at = format!("phases.json: intersections[{i}].phases[{k}]");
            if !ids.insert(l.local_id) {
                issues.push(Issue::new(&at, format!("duplicate local phase id {}", l.local_id)));
            }
            if l.gmin < 1 || l.gmin > l.gmax {
                issues.push(Issue::new(&at, format!("need 1 <= gmin <= gmax, got {} / {}", l.gmin, l.gmax)));
            }
        }
    }
    if !issues.is_empty() {
        return Err(Error::Phases(issues));
    }

    let mut phases = Vec::new();
    let mut dropped = Vec::new();
    let mut cursor = vec![0usize; intersections.len()];
    loop {
        let chosen: Vec<&LocalPhase> = cursor.iter().enumerate().map(|(i, &k)| &intersections[i].locals[k]).collect();
        let index: Vec<u32> = chosen.iter().map(|l| l.local_id).collect();
        let gmin = chosen.iter().map(|l| l.gmin).min().expect("non-empty");
        let gmax = chosen.iter().map(|l| l.gmax).min().expect("non-empty");
        let yellow = chosen.iter().map(|l| l.yellow).max().expect("non-empty");
        let allred = chosen.iter().map(|l| l.allred).max().expect("non-empty");
        if gmin > gmax {
            let why = format!("derived gmin {gmin} exceeds derived gmax {gmax}");
            warn!("dropping generalized phase {index:?}: {why}");
            dropped.push((index, why));
        } else {
            phases.push(GeneralizedPhase { index, locals: cursor.clone(), gmin, gmax, yellow, allred });
        }
        // odometer increment, last intersection fastest
        let mut i = intersections.len();
        loop {
            if i == 0 {
                let by_index = phases.iter().enumerate().map(|(k, p)| (p.index.clone(), k)).collect();
                return Ok(PhaseSet { intersections, phases, dropped, by_index });
            }
            i -= 1;
            cursor[i] += 1;
            if cursor[i] < intersections[i].locals.len() {
                break;
            }
            cursor[i] = 0;
        }
    }
}

// ---------------------------------------------------------------------------
// Mapping matrix
// ---------------------------------------------------------------------------

/// Capacity discount factors applied during green, yellow and all-red.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalFactors {
    pub rho_g: f64,
    pub rho_y: f64,
    pub rho_ar: f64,
}

impl Default for SignalFactors {
    fn default() -> Self {
        Self { rho_g: 1.0, rho_y: 0.5, rho_ar: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    pub links: Vec<LinkId>,
    pub delta: f64,
    /// `values[link_pos][phase]`
    values: Vec<Vec<f64>>,
    pos: HashMap<LinkId, usize>,
}

impl MappingMatrix {
    /// `m(link, phase)`; zero for links that are not signal-controlled.
    pub fn m(&self, link: LinkId, phase: usize) -> f64 {
        self.pos.get(&link).map_or(0.0, |&k| self.values[k][phase])
    }

    pub fn row(&self, link_pos: usize) -> &[f64] {
        &self.values[link_pos]
    }

    pub fn position(&self, link: LinkId) -> Option<usize> {
        self.pos.get(&link).copied()
    }

    /// Factor of a controlled link while `p` is green.
    pub fn green_factor(&self, link_pos: usize, p: usize, f: &SignalFactors) -> f64 {
        f.rho_g * self.values[link_pos][p]
    }

    /// Factor during the yellow of a `p -> next` transition.  A link served by
    /// both phases keeps its green; otherwise it gets the yellow discount.
    pub fn yellow_factor(&self, link_pos: usize, p: usize, next: usize, f: &SignalFactors) -> f64 {
        let (mp, mn) = (self.values[link_pos][p], self.values[link_pos][next]);
        f.rho_y * mp * (1.0 - mn) + f.rho_g * mp * mn
    }

    /// Factor during the all-red of a `p -> next` transition.
    pub fn allred_factor(&self, link_pos: usize, p: usize, next: usize, f: &SignalFactors) -> f64 {
        let (mp, mn) = (self.values[link_pos][p], self.values[link_pos][next]);
        f.rho_ar * mp * (1.0 - mn) + f.rho_g * mp * mn
    }
}

pub fn build_mapping(phases: &PhaseSet, net: &RoadNetwork, delta: f64) -> Result<MappingMatrix> {
    let mut issues = Vec::new();
    if !(delta > 0.0 && delta < 1.0) {
        issues.push(Issue::new("phases.json: delta", format!("must lie in (0, 1), got {delta}")));
    }
    let links = net.controlled_links();
    let pos: HashMap<LinkId, usize> = links.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut served_by: Vec<Vec<(usize, usize, Protection)>> = vec![Vec::new(); links.len()];
    for (i, x) in phases.intersections.iter().enumerate() {
        for (k, local) in x.locals.iter().enumerate() {
            for &(l, prot) in &local.served {
                let link = net.link(l);
                match link.intersection() {
                    None => issues.push(Issue::new(
                        format!("phases.json: {} phase {}", x.id, local.local_id),
                        format!("link ({}, {}) is not signal-controlled", link.from, link.to),
                    )),
                    Some(owner) if owner != x.id => issues.push(Issue::new(
                        format!("phases.json: {} phase {}", x.id, local.local_id),
                        format!("link ({}, {}) belongs to intersection {owner}", link.from, link.to),
                    )),
                    Some(_) => served_by[pos[&l]].push((i, k, prot)),
                }
            }
        }
    }
    for (k, &l) in links.iter().enumerate() {
        let link = net.link(l);
        let owner = link.intersection().expect("controlled");
        if phases.intersection_pos(owner).is_none() {
            issues.push(Issue::new(
                format!("network.json: link ({}, {})", link.from, link.to),
                format!("intersection {owner} has no phase definition"),
            ));
        } else if served_by[k].is_empty() {
            issues.push(Issue::new(
                format!("network.json: link ({}, {})", link.from, link.to),
                "controlled link is not served by any local phase",
            ));
        }
    }
    if !issues.is_empty() {
        return Err(Error::Phases(issues));
    }

    let values = served_by
        .iter()
        .map(|serving| {
            phases
                .phases
                .iter()
                .map(|p| {
                    let mut m: f64 = 0.0;
                    for &(i, k, prot) in serving {
                        if p.locals[i] == k {
                            m = m.max(match prot {
                                Protection::Protected => 1.0,
                                Protection::Permissive => delta,
                            });
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();
    Ok(MappingMatrix { links, delta, values, pos })
}

// ---------------------------------------------------------------------------
// Transition policies
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGroup {
    pub name: String,
    /// `(generalized phase, fixed green seconds)` executed in order.
    pub steps: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionPolicy {
    FullyAdaptive,
    /// Fixed cyclic local phase order (positions) per intersection.
    SemiAdaptive { sequences: Vec<Vec<usize>> },
    PhaseGroups { groups: Vec<PhaseGroup>, free_phases: Vec<usize> },
}

impl TransitionPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionPolicy::FullyAdaptive => "full",
            TransitionPolicy::SemiAdaptive { .. } => "semi",
            TransitionPolicy::PhaseGroups { .. } => "groups",
        }
    }
}

/// Generalized phases reachable from `p` in one transition.
pub fn successors(set: &PhaseSet, p: usize, policy: &TransitionPolicy) -> Vec<usize> {
    match policy {
        TransitionPolicy::FullyAdaptive => (0..set.len()).filter(|&q| q != p).collect(),
        TransitionPolicy::SemiAdaptive { sequences } => {
            let current = &set.phases[p].locals;
            let mut out = BTreeSet::new();
            let mut choice = vec![false; current.len()];
            loop {
                let locals: Vec<usize> = current
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| if choice[i] { next_in_cycle(&sequences[i], k) } else { k })
                    .collect();
                let index: Vec<u32> =
                    locals.iter().enumerate().map(|(i, &k)| set.intersections[i].locals[k].local_id).collect();
                if let Some(q) = set.find(&index) {
                    if q != p {
                        out.insert(q);
                    }
                }
                // next stay/advance combination
                let mut i = 0;
                loop {
                    if i == choice.len() {
                        return out.into_iter().collect();
                    }
                    choice[i] = !choice[i];
                    if choice[i] {
                        break;
                    }
                    i += 1;
                }
            }
        }
        TransitionPolicy::PhaseGroups { groups, free_phases } => {
            let mut out: BTreeSet<usize> = free_phases.iter().copied().collect();
            out.extend(groups.iter().filter_map(|g| g.steps.first().map(|s| s.0)));
            for g in groups {
                for w in g.steps.windows(2) {
                    if w[0].0 == p {
                        out.insert(w[1].0);
                    }
                }
            }
            out.remove(&p);
            out.into_iter().collect()
        }
    }
}

fn next_in_cycle(seq: &[usize], k: usize) -> usize {
    let at = seq.iter().position(|&x| x == k).expect("validated sequence covers every local phase");
    seq[(at + 1) % seq.len()]
}

/// Total number of ordered feasible transitions under `policy`.
pub fn transition_count(set: &PhaseSet, policy: &TransitionPolicy) -> usize {
    (0..set.len()).map(|p| successors(set, p, policy).len()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Free,
    GroupStep { group: usize, step: usize },
}

/// A vertex family of the phase-time network: a generalized phase together
/// with the duration rule that applies while it is green.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlState {
    pub phase: usize,
    pub kind: StateKind,
    pub min_green: u32,
    pub max_green: u32,
}

/// States and allowed hand-overs of the phase-time network under a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGraph {
    pub states: Vec<ControlState>,
    pub succ: Vec<Vec<usize>>,
    pub initial: Vec<usize>,
}

impl ControlGraph {
    pub fn build(set: &PhaseSet, policy: &TransitionPolicy, initial_phase: Option<usize>) -> Result<Self> {
        match policy {
            TransitionPolicy::FullyAdaptive | TransitionPolicy::SemiAdaptive { .. } => {
                let states = set
                    .phases
                    .iter()
                    .enumerate()
                    .map(|(p, g)| ControlState { phase: p, kind: StateKind::Free, min_green: g.gmin, max_green: g.gmax })
                    .collect();
                let succ = (0..set.len()).map(|p| successors(set, p, policy)).collect();
                let initial = match initial_phase {
                    Some(p) => vec![p],
                    None => (0..set.len()).collect(),
                };
                Ok(Self { states, succ, initial })
            }
            TransitionPolicy::PhaseGroups { groups, free_phases } => {
                let mut states = Vec::new();
                for &p in free_phases {
                    let g = &set.phases[p];
                    states.push(ControlState { phase: p, kind: StateKind::Free, min_green: g.gmin, max_green: g.gmax });
                }
                let mut entries = Vec::new();
                let mut exits = Vec::new();
                let mut issues = Vec::new();
                for (gi, group) in groups.iter().enumerate() {
                    if group.steps.is_empty() {
                        issues.push(Issue::new(format!("phases.json: policy.groups[{gi}]"), "empty phase group"));
                        continue;
                    }
                    for (si, &(p, green)) in group.steps.iter().enumerate() {
                        if green == 0 {
                            issues.push(Issue::new(format!("phases.json: policy.groups[{gi}].steps[{si}]"), "green must be >= 1"));
                        }
                        if si > 0 && group.steps[si - 1].0 == p {
                            issues.push(Issue::new(
                                format!("phases.json: policy.groups[{gi}].steps[{si}]"),
                                "consecutive steps must change phase",
                            ));
                        }
                        if si == 0 {
                            entries.push(states.len());
                        }
                        if si + 1 == group.steps.len() {
                            exits.push(states.len());
                        }
                        states.push(ControlState {
                            phase: p,
                            kind: StateKind::GroupStep { group: gi, step: si },
                            min_green: green,
                            max_green: green,
                        });
                    }
                }
                if states.is_empty() {
                    issues.push(Issue::new("phases.json: policy", "phase-group policy defines no states"));
                }
                if !issues.is_empty() {
                    return Err(Error::Phases(issues));
                }
                let free: Vec<usize> =
                    states.iter().enumerate().filter(|(_, s)| s.kind == StateKind::Free).map(|(k, _)| k).collect();
                let open: Vec<usize> = free.iter().chain(entries.iter()).copied().collect();
                let succ = (0..states.len())
                    .map(|k| {
                        let here = &states[k];
                        let candidates: Vec<usize> = match here.kind {
                            StateKind::GroupStep { .. } if !exits.contains(&k) => vec![k + 1],
                            _ => open.clone(),
                        };
                        candidates.into_iter().filter(|&q| states[q].phase != here.phase).collect()
                    })
                    .collect();
                let initial = match initial_phase {
                    Some(p) => open.iter().copied().filter(|&k| states[k].phase == p).collect(),
                    None => open,
                };
                Ok(Self { states, succ, initial })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

// ---------------------------------------------------------------------------
// phases.json
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServedLinkDoc {
    pub from: NodeId,
    pub to: NodeId,
    #[serde(default = "protected")]
    pub protection: Protection,
}

fn protected() -> Protection {
    Protection::Protected
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPhaseDoc {
    pub id: u32,
    pub gmin: u32,
    /// `null` for no maximum.
    pub gmax: Option<u32>,
    pub yellow: u32,
    pub allred: u32,
    pub serves: Vec<ServedLinkDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionDoc {
    pub id: String,
    pub phases: Vec<LocalPhaseDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStepDoc {
    pub phase: Vec<u32>,
    pub green: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDoc {
    pub name: String,
    pub steps: Vec<GroupStepDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PolicyDoc {
    Full,
    Semi { sequences: BTreeMap<String, Vec<u32>> },
    Groups {
        groups: Vec<GroupDoc>,
        #[serde(default)]
        free_phases: Vec<Vec<u32>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasesDoc {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_rho_y")]
    pub rho_y: f64,
    pub intersections: Vec<IntersectionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_phase: Option<Vec<u32>>,
    #[serde(default)]
    pub enforce_local_gmax: bool,
    #[serde(default = "default_policy")]
    pub policy: PolicyDoc,
}

fn default_delta() -> f64 {
    0.5
}

fn default_rho_y() -> f64 {
    0.5
}

fn default_policy() -> PolicyDoc {
    PolicyDoc::Full
}

/// Everything derived from `phases.json` against a network.
#[derive(Debug, Clone)]
pub struct PhaseConfig {
    pub set: PhaseSet,
    pub mapping: MappingMatrix,
    pub policy: TransitionPolicy,
    pub graph: ControlGraph,
    pub factors: SignalFactors,
    pub initial_phase: Option<usize>,
    pub enforce_local_gmax: bool,
}

pub fn parse_phases(doc: &str) -> Result<PhasesDoc> {
    serde_json::from_str(doc).map_err(|source| Error::Parse { doc: "phases.json", source })
}

impl PhasesDoc {
    pub fn intersections(&self, net: &RoadNetwork) -> Result<Vec<Intersection>> {
        let mut issues = Vec::new();
        let out = self
            .intersections
            .iter()
            .map(|x| Intersection {
                id: x.id.clone(),
                locals: x
                    .phases
                    .iter()
                    .map(|l| LocalPhase {
                        local_id: l.id,
                        gmin: l.gmin,
                        gmax: l.gmax.unwrap_or(UNBOUNDED),
                        yellow: l.yellow,
                        allred: l.allred,
                        served: l
                            .serves
                            .iter()
                            .filter_map(|s| match net.find(s.from, s.to) {
                                Some(id) => Some((id, s.protection)),
                                None => {
                                    issues.push(Issue::new(
                                        format!("phases.json: {} phase {}", x.id, l.id),
                                        format!("no link ({}, {})", s.from, s.to),
                                    ));
                                    None
                                }
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        if issues.is_empty() {
            Ok(out)
        } else {
            Err(Error::Phases(issues))
        }
    }

    pub fn build(&self, net: &RoadNetwork, policy_override: Option<&PolicyDoc>) -> Result<PhaseConfig> {
        let set = generate_generalized_phases(self.intersections(net)?)?;
        if set.is_empty() {
            return Err(Error::Phases(vec![Issue::new("phases.json", "every generalized phase was dropped")]));
        }
        let mapping = build_mapping(&set, net, self.delta)?;
        if !(self.rho_y > 0.0 && self.rho_y < 1.0) {
            return Err(Error::Phases(vec![Issue::new("phases.json: rho_y", "must lie in (0, 1)")]));
        }
        let find = |v: &[u32], at: String| {
            set.find(v).ok_or_else(|| Error::Phases(vec![Issue::new(at, format!("unknown generalized phase {v:?}"))]))
        };
        let policy = match policy_override.unwrap_or(&self.policy) {
            PolicyDoc::Full => TransitionPolicy::FullyAdaptive,
            PolicyDoc::Semi { sequences } => {
                let mut issues = Vec::new();
                let mut seqs = Vec::new();
                for x in &set.intersections {
                    let Some(seq) = sequences.get(&x.id) else {
                        issues.push(Issue::new("phases.json: policy.sequences", format!("missing sequence for {}", x.id)));
                        continue;
                    };
                    let mut pos = Vec::new();
                    for id in seq {
                        match x.local_pos(*id) {
                            Some(k) => pos.push(k),
                            None => issues.push(Issue::new(
                                format!("phases.json: policy.sequences.{}", x.id),
                                format!("unknown local phase {id}"),
                            )),
                        }
                    }
                    let distinct: BTreeSet<usize> = pos.iter().copied().collect();
                    if distinct.len() != pos.len() || distinct.len() != x.locals.len() {
                        issues.push(Issue::new(
                            format!("phases.json: policy.sequences.{}", x.id),
                            "sequence must list every local phase exactly once",
                        ));
                    }
                    seqs.push(pos);
                }
                if !issues.is_empty() {
                    return Err(Error::Phases(issues));
                }
                TransitionPolicy::SemiAdaptive { sequences: seqs }
            }
            PolicyDoc::Groups { groups, free_phases } => {
                let mut gs = Vec::new();
                for (gi, g) in groups.iter().enumerate() {
                    let mut steps = Vec::new();
                    for (si, s) in g.steps.iter().enumerate() {
                        steps.push((find(&s.phase, format!("phases.json: policy.groups[{gi}].steps[{si}]"))?, s.green));
                    }
                    gs.push(PhaseGroup { name: g.name.clone(), steps });
                }
                let free = free_phases
                    .iter()
                    .enumerate()
                    .map(|(k, v)| find(v, format!("phases.json: policy.free_phases[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                TransitionPolicy::PhaseGroups { groups: gs, free_phases: free }
            }
        };
        let initial_phase = match &self.initial_phase {
            Some(v) => Some(find(v, "phases.json: initial_phase".into())?),
            None => None,
        };
        let graph = ControlGraph::build(&set, &policy, initial_phase)?;
        if graph.initial.is_empty() {
            return Err(Error::Phases(vec![Issue::new(
                "phases.json: initial_phase",
                "initial phase is not a state of the selected policy",
            )]));
        }
        Ok(PhaseConfig {
            set,
            mapping,
            policy,
            graph,
            factors: SignalFactors { rho_y: self.rho_y, ..SignalFactors::default() },
            initial_phase,
            enforce_local_gmax: self.enforce_local_gmax,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locals(n: usize, gmin: u32, gmax: u32) -> Intersection {
        Intersection {
            id: format!("I{n}"),
            locals: (1..=n as u32)
                .map(|id| LocalPhase { local_id: id, gmin, gmax, yellow: 4, allred: 3, served: vec![] })
                .collect(),
        }
    }

    fn set_of(sizes: &[usize]) -> PhaseSet {
        let xs = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| Intersection { id: format!("I{i}"), ..locals(n, 5, 50) })
            .collect();
        generate_generalized_phases(xs).unwrap()
    }

    #[test]
    fn two_by_two_gives_four() {
        assert_eq!(set_of(&[2, 2]).len(), 4);
    }

    #[test]
    fn arterial_product_gives_sixty_four() {
        let set = set_of(&[4, 2, 2, 4]);
        assert_eq!(set.len(), 64);
        assert_eq!(transition_count(&set, &TransitionPolicy::FullyAdaptive), 4032);
    }

    #[test]
    fn attributes_use_min_min_max_max() {
        let set = set_of(&[2, 2]);
        let p = &set.phases[0];
        assert_eq!((p.gmin, p.gmax, p.yellow, p.allred), (5, 50, 4, 3));

        let mut a = locals(1, 3, 20);
        a.locals[0].yellow = 2;
        let mut b = Intersection { id: "J".into(), ..locals(1, 6, 40) };
        b.locals[0].allred = 1;
        let set = generate_generalized_phases(vec![a, b]).unwrap();
        let p = &set.phases[0];
        assert_eq!((p.gmin, p.gmax, p.yellow, p.allred), (3, 20, 4, 3));
    }

    #[test]
    fn valid_locals_never_produce_dropped_products() {
        // min of gmins never exceeds min of gmaxes when every local is valid
        let a = Intersection {
            id: "I".into(),
            locals: vec![
                LocalPhase { local_id: 1, gmin: 2, gmax: 4, yellow: 1, allred: 1, served: vec![] },
                LocalPhase { local_id: 2, gmin: 9, gmax: 30, yellow: 1, allred: 1, served: vec![] },
            ],
        };
        let b = Intersection {
            id: "J".into(),
            locals: vec![LocalPhase { local_id: 1, gmin: 10, gmax: 30, yellow: 1, allred: 1, served: vec![] }],
        };
        let set = generate_generalized_phases(vec![a, b]).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.dropped.is_empty());
        assert_eq!((set.phases[0].gmin, set.phases[0].gmax), (2, 4));
        assert_eq!((set.phases[1].gmin, set.phases[1].gmax), (9, 30));
    }

    #[test]
    fn invalid_local_is_rejected() {
        let mut a = locals(2, 5, 50);
        a.locals[1].gmin = 60;
        let err = generate_generalized_phases(vec![a]).unwrap_err().to_string();
        assert!(err.contains("phases[1]"), "{err}");
    }

    #[test]
    fn ordering_is_lexicographic() {
        let set = set_of(&[2, 3]);
        let idx: Vec<Vec<u32>> = set.phases.iter().map(|p| p.index.clone()).collect();
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(idx, sorted);
    }

    fn semi(set: &PhaseSet) -> TransitionPolicy {
        TransitionPolicy::SemiAdaptive {
            sequences: set.intersections.iter().map(|x| (0..x.locals.len()).collect()).collect(),
        }
    }

    #[test]
    fn semi_adaptive_counts() {
        let set = set_of(&[4, 2, 2, 4]);
        let policy = semi(&set);
        for p in 0..set.len() {
            let s = successors(&set, p, &policy);
            assert_eq!(s.len(), 15);
            assert!(!s.contains(&p));
            let full = successors(&set, p, &TransitionPolicy::FullyAdaptive);
            assert!(s.iter().all(|q| full.contains(q)));
        }
        assert_eq!(transition_count(&set, &policy), 960);
    }

    #[test]
    fn single_intersection_two_phases() {
        let set = set_of(&[2]);
        for p in 0..2 {
            assert_eq!(successors(&set, p, &TransitionPolicy::FullyAdaptive).len(), 1);
        }
    }

    #[test]
    fn group_graph_scripts_steps() {
        let set = set_of(&[2, 2]);
        let policy = TransitionPolicy::PhaseGroups {
            groups: vec![PhaseGroup { name: "band".into(), steps: vec![(0, 30), (1, 6), (3, 6)] }],
            free_phases: vec![2],
        };
        let g = ControlGraph::build(&set, &policy, None).unwrap();
        // state 0 = free phase 2, states 1..=3 = group steps
        assert_eq!(g.succ[0], vec![1]);
        assert_eq!(g.succ[1], vec![2]);
        assert_eq!(g.succ[2], vec![3]);
        assert_eq!(g.succ[3], vec![0, 1]);
        assert_eq!(g.states[1].min_green, 30);
        assert_eq!(g.initial, vec![0, 1]);
    }
}
