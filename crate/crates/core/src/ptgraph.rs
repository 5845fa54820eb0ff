//! The generalized phase-time network: arcs, their Lagrangian costs, the
//! labeling search for a least-cost signal plan, and the capacity factor
//! field a plan induces on controlled links.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::MultiplierField;
use crate::network::RoadNetwork;
use crate::phases::{MappingMatrix, PhaseConfig, SignalFactors, StateKind, UNBOUNDED};

/// Where the clearance interval sits relative to the searched duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClearancePlacement {
    /// The searched duration is pure green; yellow and all-red follow it.
    #[default]
    AfterGreen,
    /// The searched duration already contains yellow and all-red.
    WithinDelta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GmaxFilter {
    Enforce,
    #[default]
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchOptions {
    pub gmax_local: GmaxFilter,
    pub clearance: ClearancePlacement,
}

/// One hold-clear-handover step.  `next == None` marks the final green rest
/// into the super sink, which has no clearance and ends at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhaseTimeArc {
    pub state: usize,
    pub phase: usize,
    pub tau: u32,
    pub green: u32,
    pub yellow: u32,
    pub allred: u32,
    /// `(state, phase)` that turns green at `h`.
    pub next: Option<(usize, usize)>,
}

impl PhaseTimeArc {
    pub fn green_end(&self) -> u32 {
        self.tau + self.green
    }

    pub fn yellow_end(&self) -> u32 {
        self.green_end() + self.yellow
    }

    pub fn h(&self) -> u32 {
        self.yellow_end() + self.allred
    }

    pub fn is_transition(&self) -> bool {
        self.next.is_some()
    }

    pub fn next_phase(&self) -> Option<usize> {
        self.next.map(|n| n.1)
    }

    pub fn window(&self, t: u32) -> Window {
        if t < self.tau || t >= self.h() {
            Window::Outside
        } else if t < self.green_end() {
            Window::Green
        } else if t < self.yellow_end() {
            Window::Yellow
        } else {
            Window::AllRed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Green,
    Yellow,
    AllRed,
    Outside,
}

/// Green duration bounds of a control state, before horizon clipping.
fn duration_bounds(cfg: &PhaseConfig, state: usize) -> (u32, u32) {
    let s = &cfg.graph.states[state];
    (s.min_green, s.max_green)
}

/// Appends every arc leaving vertex `(state, tau)`: transitions by
/// increasing green then successor order, followed by the sink arc.
pub fn arcs_from(
    cfg: &PhaseConfig,
    state: usize,
    tau: u32,
    horizon: u32,
    placement: ClearancePlacement,
    out: &mut Vec<PhaseTimeArc>,
) {
    let phase = cfg.graph.states[state].phase;
    let gp = &cfg.set.phases[phase];
    let clearance = gp.clearance();
    let (lo, hi) = duration_bounds(cfg, state);
    let room = horizon.saturating_sub(tau);
    for d in lo..=hi.min(room) {
        let green = match placement {
            ClearancePlacement::AfterGreen => d,
            ClearancePlacement::WithinDelta if d > clearance => d - clearance,
            ClearancePlacement::WithinDelta => continue,
        };
        if green + clearance > room {
            break;
        }
        for &s2 in &cfg.graph.succ[state] {
            out.push(PhaseTimeArc {
                state,
                phase,
                tau,
                green,
                yellow: gp.yellow,
                allred: gp.allred,
                next: Some((s2, cfg.graph.states[s2].phase)),
            });
        }
    }
    if room <= hi {
        out.push(PhaseTimeArc { state, phase, tau, green: room, yellow: 0, allred: 0, next: None });
    }
}

/// Capacity factor of controlled link `k` at second `t` under `arc`.
pub fn effective_factor(map: &MappingMatrix, f: &SignalFactors, k: usize, arc: &PhaseTimeArc, t: u32) -> f64 {
    let p = arc.phase;
    match (arc.window(t), arc.next_phase()) {
        (Window::Green, _) => map.green_factor(k, p, f),
        (Window::Yellow, Some(q)) => map.yellow_factor(k, p, q, f),
        (Window::AllRed, Some(q)) => map.allred_factor(k, p, q, f),
        _ => 0.0,
    }
}

/// Cost of one arc evaluated second by second: the transition penalty less
/// the priced capacity the arc offers on every controlled link.
pub fn arc_cost(
    arc: &PhaseTimeArc,
    lam: &MultiplierField,
    cfg: &PhaseConfig,
    net: &RoadNetwork,
) -> Result<f64> {
    if arc.h() > lam.horizon() {
        return Err(Error::ArcOutsideHorizon { tau: arc.tau, h: arc.h(), horizon: lam.horizon() });
    }
    let mut reward = 0.0;
    for (k, &l) in cfg.mapping.links.iter().enumerate() {
        let sr = net.link(l).sat_rate;
        for t in arc.tau..arc.h() {
            reward += lam.get(k, t) * effective_factor(&cfg.mapping, &cfg.factors, k, arc, t) * sr;
        }
    }
    Ok(penalty(arc) - reward)
}

fn penalty(arc: &PhaseTimeArc) -> f64 {
    if arc.is_transition() {
        1.0
    } else {
        0.0
    }
}

/// Arc costing through per-link prefix sums of `λ · SR`.
pub struct ArcCoster<'a> {
    cfg: &'a PhaseConfig,
    prefix: Vec<Vec<f64>>,
    /// Controlled-link positions with a nonzero mapping entry, per phase.
    served: Vec<Vec<usize>>,
}

impl<'a> ArcCoster<'a> {
    pub fn new(cfg: &'a PhaseConfig, net: &RoadNetwork, lam: &MultiplierField) -> Self {
        let h = lam.horizon() as usize;
        let prefix = cfg
            .mapping
            .links
            .iter()
            .enumerate()
            .map(|(k, &l)| {
                let sr = net.link(l).sat_rate;
                let mut acc = Vec::with_capacity(h + 1);
                let mut run = 0.0;
                acc.push(0.0);
                for t in 0..h {
                    run += lam.get(k, t as u32) * sr;
                    acc.push(run);
                }
                acc
            })
            .collect();
        let served = (0..cfg.set.len())
            .map(|p| (0..cfg.mapping.links.len()).filter(|&k| cfg.mapping.row(k)[p] > 0.0).collect())
            .collect();
        Self { cfg, prefix, served }
    }

    fn span(&self, k: usize, a: u32, b: u32) -> f64 {
        self.prefix[k][b as usize] - self.prefix[k][a as usize]
    }

    pub fn reward(&self, arc: &PhaseTimeArc) -> f64 {
        let (map, f) = (&self.cfg.mapping, &self.cfg.factors);
        let mut r = 0.0;
        for &k in &self.served[arc.phase] {
            r += map.green_factor(k, arc.phase, f) * self.span(k, arc.tau, arc.green_end());
            if let Some(q) = arc.next_phase() {
                r += map.yellow_factor(k, arc.phase, q, f) * self.span(k, arc.green_end(), arc.yellow_end());
                r += map.allred_factor(k, arc.phase, q, f) * self.span(k, arc.yellow_end(), arc.h());
            }
        }
        r
    }

    pub fn cost(&self, arc: &PhaseTimeArc) -> f64 {
        penalty(arc) - self.reward(arc)
    }
}

// ---------------------------------------------------------------------------
// Signal plans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalPlan {
    pub horizon: u32,
    pub arcs: Vec<PhaseTimeArc>,
}

impl SignalPlan {
    pub fn transitions(&self) -> usize {
        self.arcs.iter().filter(|a| a.is_transition()).count()
    }

    /// The arc covering second `t`.
    pub fn arc_at(&self, t: u32) -> Option<&PhaseTimeArc> {
        let k = self.arcs.partition_point(|a| a.h() <= t);
        self.arcs.get(k).filter(|a| a.tau <= t && t < a.h())
    }

    /// Checks that the arcs chain from time 0 to the horizon, end in the
    /// sink and respect the duration and succession rules of `cfg`.
    pub fn check(&self, cfg: &PhaseConfig, placement: ClearancePlacement) -> Result<()> {
        let bad = |msg: String| Err(Error::PlanCoverage(msg));
        let Some(first) = self.arcs.first() else {
            return bad("plan has no arcs".into());
        };
        if first.tau != 0 {
            return bad(format!("first arc starts at {}, not 0", first.tau));
        }
        if !cfg.graph.initial.contains(&first.state) {
            return bad(format!("state {} is not an allowed initial state", first.state));
        }
        for (i, arc) in self.arcs.iter().enumerate() {
            if arc.state >= cfg.graph.len() || cfg.graph.states[arc.state].phase != arc.phase {
                return bad(format!("arc {i}: unknown state {}", arc.state));
            }
            let mut legal = Vec::new();
            arcs_from(cfg, arc.state, arc.tau, self.horizon, placement, &mut legal);
            if !legal.contains(arc) {
                return bad(format!("arc {i} ({}, {}) -> {:?} breaks the duration or succession rules", arc.phase, arc.tau, arc.next));
            }
            match (self.arcs.get(i + 1), arc.next) {
                (Some(n), Some((s, _))) if n.tau == arc.h() && n.state == s => {}
                (Some(n), Some(_)) => {
                    return bad(format!("gap or overlap between arc {i} (ends {}) and arc {} (starts {})", arc.h(), i + 1, n.tau))
                }
                (Some(_), None) => return bad(format!("arc {i} enters the sink before the last arc")),
                (None, Some(_)) => return bad("plan does not end in the sink".into()),
                (None, None) => {}
            }
        }
        Ok(())
    }

    pub fn cost(&self, coster: &ArcCoster<'_>) -> f64 {
        self.arcs.iter().map(|a| coster.cost(a)).sum()
    }

    /// Capacity factor field over controlled links.
    pub fn gamma(&self, cfg: &PhaseConfig) -> GammaField {
        let n = cfg.mapping.links.len();
        let h = self.horizon as usize;
        let mut values = vec![0.0; n * h];
        for arc in &self.arcs {
            for t in arc.tau..arc.h().min(self.horizon) {
                for k in 0..n {
                    values[k * h + t as usize] = effective_factor(&cfg.mapping, &cfg.factors, k, arc, t);
                }
            }
        }
        GammaField { horizon: self.horizon, links: n, values }
    }
}

/// `γ(link, t)` for controlled links, addressed by mapping position.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaField {
    pub horizon: u32,
    pub links: usize,
    values: Vec<f64>,
}

impl GammaField {
    /// Field with every controlled link fully open.
    pub fn open(links: usize, horizon: u32) -> Self {
        Self { horizon, links, values: vec![1.0; links * horizon as usize] }
    }

    pub fn get(&self, k: usize, t: u32) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            self.values[k * self.horizon as usize + t as usize]
        }
    }

    pub fn to_csv(&self, map: &MappingMatrix, net: &RoadNetwork) -> String {
        let mut out = String::from("link_from,link_to,t,factor\n");
        for (k, &l) in map.links.iter().enumerate() {
            let link = net.link(l);
            for t in 0..self.horizon {
                let _ = writeln!(out, "{},{},{},{}", link.from, link.to, t, self.get(k, t));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Labeling search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    /// Running duration of the active local phase at each intersection.
    run: Vec<u32>,
    via: Option<PhaseTimeArc>,
}

struct Candidate {
    arc: PhaseTimeArc,
    cost: f64,
    run: Vec<u32>,
}

fn local_gmax(cfg: &PhaseConfig, phase: usize, i: usize) -> u32 {
    cfg.set.local(i, cfg.set.phases[phase].locals[i]).gmax
}

/// Running local durations after taking `arc`, or `None` if some local
/// phase would exceed its own maximum green.
fn carry(cfg: &PhaseConfig, run: &[u32], arc: &PhaseTimeArc) -> Option<Vec<u32>> {
    let here = &cfg.set.phases[arc.phase].locals;
    let span = arc.h() - arc.tau;
    let mut out = Vec::with_capacity(run.len());
    for (i, &r) in run.iter().enumerate() {
        let gmax = local_gmax(cfg, arc.phase, i);
        if gmax != UNBOUNDED && r + arc.green > gmax {
            return None;
        }
        match arc.next_phase() {
            Some(q) if cfg.set.phases[q].locals[i] == here[i] => {
                let r2 = r + span;
                if gmax != UNBOUNDED && r2 > gmax {
                    return None;
                }
                out.push(r2);
            }
            _ => out.push(0),
        }
    }
    Some(out)
}

/// Least-cost source-to-sink path through the phase-time network under the
/// multipliers `lam`, scanning start times forward.
pub fn shortest_plan(
    cfg: &PhaseConfig,
    net: &RoadNetwork,
    lam: &MultiplierField,
    options: SearchOptions,
) -> Result<(SignalPlan, f64)> {
    let horizon = lam.horizon();
    let coster = ArcCoster::new(cfg, net, lam);
    let n_states = cfg.graph.len();
    let width = horizon as usize + 1;
    let enforce = options.gmax_local == GmaxFilter::Enforce;
    let m = cfg.set.intersections.len();
    let mut labels: Vec<Option<Label>> = vec![None; n_states * width];
    for &s in &cfg.graph.initial {
        labels[s * width] = Some(Label { cost: 0.0, run: vec![0; m], via: None });
    }
    let mut best: Option<(f64, PhaseTimeArc)> = None;

    for tau in 0..=horizon {
        let found: Vec<Vec<Candidate>> = (0..n_states)
            .into_par_iter()
            .map(|s| {
                let Some(label) = &labels[s * width + tau as usize] else {
                    return Vec::new();
                };
                let mut arcs = Vec::new();
                arcs_from(cfg, s, tau, horizon, options.clearance, &mut arcs);
                arcs.into_iter()
                    .filter_map(|arc| {
                        let run = if enforce { carry(cfg, &label.run, &arc)? } else { Vec::new() };
                        Some(Candidate { cost: label.cost + coster.cost(&arc), arc, run })
                    })
                    .collect()
            })
            .collect();
        for cand in found.into_iter().flatten() {
            match cand.arc.next {
                Some((s2, _)) => {
                    let slot = &mut labels[s2 * width + cand.arc.h() as usize];
                    if slot.as_ref().is_none_or(|l| cand.cost < l.cost) {
                        let run = if enforce { cand.run } else { vec![0; m] };
                        *slot = Some(Label { cost: cand.cost, run, via: Some(cand.arc) });
                    }
                }
                None => {
                    if best.as_ref().is_none_or(|b| cand.cost < b.0) {
                        best = Some((cand.cost, cand.arc));
                    }
                }
            }
        }
    }

    let Some((cost, last)) = best else {
        return Err(Error::NoFeasiblePlan { horizon });
    };
    let mut arcs = vec![last];
    let mut at = (last.state, last.tau);
    while let Some(arc) = labels[at.0 * width + at.1 as usize].as_ref().and_then(|l| l.via) {
        arcs.push(arc);
        at = (arc.state, arc.tau);
    }
    arcs.reverse();
    Ok((SignalPlan { horizon, arcs }, cost))
}

/// Every arc of the network over `[0, horizon]`, including arcs leaving
/// unreachable vertices.
pub fn materialize_arcs(cfg: &PhaseConfig, horizon: u32, placement: ClearancePlacement) -> Vec<PhaseTimeArc> {
    let mut out = Vec::new();
    for s in 0..cfg.graph.len() {
        for tau in 0..=horizon {
            arcs_from(cfg, s, tau, horizon, placement, &mut out);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// plan.json
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcDoc {
    pub state: usize,
    pub phase: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub tau: u32,
    pub green_end: u32,
    pub yellow_end: u32,
    pub h: u32,
    pub next_state: Option<usize>,
    pub next_phase: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDoc {
    pub horizon: u32,
    pub transitions: usize,
    pub arcs: Vec<ArcDoc>,
}

impl SignalPlan {
    pub fn to_doc(&self, cfg: &PhaseConfig) -> PlanDoc {
        let arcs = self
            .arcs
            .iter()
            .map(|a| ArcDoc {
                state: a.state,
                phase: cfg.set.phases[a.phase].index.clone(),
                group: match (&cfg.graph.states[a.state].kind, &cfg.policy) {
                    (StateKind::GroupStep { group, step }, crate::phases::TransitionPolicy::PhaseGroups { groups, .. }) => {
                        Some(format!("{}#{}", groups[*group].name, step))
                    }
                    _ => None,
                },
                tau: a.tau,
                green_end: a.green_end(),
                yellow_end: a.yellow_end(),
                h: a.h(),
                next_state: a.next.map(|n| n.0),
                next_phase: a.next_phase().map(|q| cfg.set.phases[q].index.clone()),
            })
            .collect();
        PlanDoc { horizon: self.horizon, transitions: self.transitions(), arcs }
    }

    pub fn from_doc(doc: &PlanDoc, cfg: &PhaseConfig, placement: ClearancePlacement) -> Result<Self> {
        let mut arcs = Vec::with_capacity(doc.arcs.len());
        for (i, a) in doc.arcs.iter().enumerate() {
            let bad = |msg: &str| Error::PlanCoverage(format!("arc {i}: {msg}"));
            let state = cfg.graph.states.get(a.state).ok_or_else(|| bad("unknown state"))?;
            if cfg.set.phases[state.phase].index != a.phase {
                return Err(bad("phase does not match state"));
            }
            if !(a.tau <= a.green_end && a.green_end <= a.yellow_end && a.yellow_end <= a.h) {
                return Err(bad("windows out of order"));
            }
            let next = match a.next_state {
                Some(s) => Some((s, cfg.graph.states.get(s).ok_or_else(|| bad("unknown next state"))?.phase)),
                None => None,
            };
            arcs.push(PhaseTimeArc {
                state: a.state,
                phase: state.phase,
                tau: a.tau,
                green: a.green_end - a.tau,
                yellow: a.yellow_end - a.green_end,
                allred: a.h - a.yellow_end,
                next,
            });
        }
        let plan = SignalPlan { horizon: doc.horizon, arcs };
        plan.check(cfg, placement)?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{load_scenario, Scenario};
    use crate::phases::parse_phases;

    /// One intersection, two phases, one controlled link served by phase 1.
    fn tiny(gmin: u32, gmax: u32, yellow: u32, allred: u32, sat_vph: f64) -> (Scenario, PhaseConfig) {
        let net = format!(
            r#"{{"horizon": 40, "nodes": [1,2,3],
               "links": [{{"from":1,"to":2,"fftt":2,"sat_rate_vph":{sat_vph},"storage":"unbounded","control":{{"intersection":"A"}}}},
                         {{"from":2,"to":3,"fftt":3,"sat_rate_vph":1800,"storage":"unbounded"}}]}}"#
        );
        let sc = load_scenario(&net, r#"{"vehicles": []}"#).unwrap();
        let ph = format!(
            r#"{{"intersections": [{{"id": "A", "phases": [
                {{"id": 1, "gmin": {gmin}, "gmax": {gmax}, "yellow": {yellow}, "allred": {allred}, "serves": [{{"from":1,"to":2}}]}},
                {{"id": 2, "gmin": {gmin}, "gmax": {gmax}, "yellow": {yellow}, "allred": {allred}, "serves": []}}]}}]}}"#
        );
        let cfg = parse_phases(&ph).unwrap().build(&sc.network, None).unwrap();
        (sc, cfg)
    }

    #[test]
    fn zero_prices_cost_one_per_transition() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let lam = MultiplierField::zeros(1, 40);
        for arc in materialize_arcs(&cfg, 40, ClearancePlacement::AfterGreen) {
            let c = arc_cost(&arc, &lam, &cfg, &sc.network).unwrap();
            assert_eq!(c, if arc.is_transition() { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn ten_second_green_at_unit_price() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let mut lam = MultiplierField::zeros(1, 40);
        for t in 0..10 {
            lam.set(0, t, 1.0);
        }
        let arc = PhaseTimeArc { state: 0, phase: 0, tau: 0, green: 10, yellow: 3, allred: 2, next: Some((1, 1)) };
        assert_eq!(arc_cost(&arc, &lam, &cfg, &sc.network).unwrap(), -4.0);
        assert_eq!(ArcCoster::new(&cfg, &sc.network, &lam).cost(&arc), -4.0);
    }

    #[test]
    fn shared_link_keeps_green_through_yellow() {
        // both phases serve the link, so the 4 s yellow continues the green
        let net = r#"{"horizon": 40, "nodes": [1,2,3],
            "links": [{"from":1,"to":2,"fftt":2,"sat_rate_vph":1800,"storage":"unbounded","control":{"intersection":"A"}},
                      {"from":2,"to":3,"fftt":3,"sat_rate_vph":1800,"storage":"unbounded"}]}"#;
        let sc = load_scenario(net, r#"{"vehicles": []}"#).unwrap();
        let ph = r#"{"intersections": [{"id": "A", "phases": [
            {"id": 1, "gmin": 2, "gmax": 20, "yellow": 4, "allred": 0, "serves": [{"from":1,"to":2}]},
            {"id": 2, "gmin": 2, "gmax": 20, "yellow": 4, "allred": 0, "serves": [{"from":1,"to":2}]}]}]}"#;
        let cfg = parse_phases(ph).unwrap().build(&sc.network, None).unwrap();
        let mut lam = MultiplierField::zeros(1, 40);
        for t in 5..9 {
            lam.set(0, t, 1.0);
        }
        let arc = PhaseTimeArc { state: 0, phase: 0, tau: 0, green: 5, yellow: 4, allred: 0, next: Some((1, 1)) };
        let c = arc_cost(&arc, &lam, &cfg, &sc.network).unwrap();
        assert_eq!(c - 1.0, -2.0);
    }

    #[test]
    fn arc_past_horizon_is_rejected() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let lam = MultiplierField::zeros(1, 10);
        let arc = PhaseTimeArc { state: 0, phase: 0, tau: 0, green: 10, yellow: 3, allred: 2, next: Some((1, 1)) };
        assert!(matches!(arc_cost(&arc, &lam, &cfg, &sc.network), Err(Error::ArcOutsideHorizon { .. })));
    }

    #[test]
    fn zero_prices_give_fewest_transitions() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        // horizon 40 with gmax 20: a single rest is impossible, one transition suffices
        let lam = MultiplierField::zeros(1, 40);
        let (plan, cost) = shortest_plan(&cfg, &sc.network, &lam, SearchOptions::default()).unwrap();
        assert_eq!(cost, 1.0);
        assert_eq!(plan.transitions(), 1);
        plan.check(&cfg, ClearancePlacement::AfterGreen).unwrap();
    }

    #[test]
    fn short_horizon_with_no_path_is_infeasible() {
        let (sc, cfg) = tiny(5, 6, 3, 2, 1800.0);
        // every arc spans at least 10 s and a rest at most 6 s; 8 s cannot be covered
        let lam = MultiplierField::zeros(1, 8);
        assert!(matches!(
            shortest_plan(&cfg, &sc.network, &lam, SearchOptions::default()),
            Err(Error::NoFeasiblePlan { horizon: 8 })
        ));
    }

    #[test]
    fn gamma_follows_windows() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let lam = MultiplierField::zeros(1, 30);
        let _ = sc;
        let plan = SignalPlan {
            horizon: 30,
            arcs: vec![
                PhaseTimeArc { state: 0, phase: 0, tau: 0, green: 10, yellow: 3, allred: 2, next: Some((1, 1)) },
                PhaseTimeArc { state: 1, phase: 1, tau: 15, green: 15, yellow: 0, allred: 0, next: None },
            ],
        };
        plan.check(&cfg, ClearancePlacement::AfterGreen).unwrap();
        let g = plan.gamma(&cfg);
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 9), 1.0);
        assert_eq!(g.get(0, 10), 0.5);
        assert_eq!(g.get(0, 12), 0.5);
        assert_eq!(g.get(0, 13), 0.0);
        assert_eq!(g.get(0, 20), 0.0);
        let _ = lam;
    }

    #[test]
    fn plan_doc_round_trips() {
        let (sc, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let mut lam = MultiplierField::zeros(1, 40);
        lam.set(0, 30, 4.0);
        let (plan, _) = shortest_plan(&cfg, &sc.network, &lam, SearchOptions::default()).unwrap();
        let doc = plan.to_doc(&cfg);
        let text = serde_json::to_string(&doc).unwrap();
        let back: PlanDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(SignalPlan::from_doc(&back, &cfg, ClearancePlacement::AfterGreen).unwrap(), plan);
    }

    #[test]
    fn broken_chain_is_reported() {
        let (_, cfg) = tiny(5, 20, 3, 2, 1800.0);
        let plan = SignalPlan {
            horizon: 30,
            arcs: vec![
                PhaseTimeArc { state: 0, phase: 0, tau: 0, green: 10, yellow: 3, allred: 2, next: Some((1, 1)) },
                PhaseTimeArc { state: 1, phase: 1, tau: 16, green: 14, yellow: 0, allred: 0, next: None },
            ],
        };
        assert!(matches!(plan.check(&cfg, ClearancePlacement::AfterGreen), Err(Error::PlanCoverage(_))));
    }

    #[test]
    fn within_delta_shortens_green() {
        let (_, cfg) = tiny(8, 10, 3, 2, 1800.0);
        let mut a = Vec::new();
        arcs_from(&cfg, 0, 0, 40, ClearancePlacement::WithinDelta, &mut a);
        let spans: Vec<(u32, u32)> = a.iter().map(|x| (x.green, x.h())).collect();
        assert_eq!(spans, vec![(3, 8), (4, 9), (5, 10)]);
    }
}
