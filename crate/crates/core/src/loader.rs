//! Second-by-second dynamic network loading.
//!
//! The standard loader moves vehicles along their fixed paths under the
//! capacity field of a signal plan.  The customized loader drops the
//! capacity of controlled links and charges Lagrangian prices on entry
//! instead.  Both share one engine whose state can be cloned mid-run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::MultiplierField;
use crate::network::{LinkId, NodeId, PathAux, Scenario};
use crate::phases::PhaseConfig;
use crate::ptgraph::{GammaField, SignalPlan, Window};

/// Slack on the admission test so that sums of fractional rates that should
/// reach 1 still admit a vehicle.
pub const EPS: f64 = 1e-9;
/// Unused capacity carried into the next second is capped just below one
/// vehicle, so an idle link never releases two vehicles in a single second
/// at a rate of one per second.
pub const CREDIT_CAP: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CustomMode {
    /// Every vehicle moves as early as the network allows.
    #[default]
    Greedy,
    /// A vehicle about to enter a controlled link waits for the entry second
    /// that minimizes its own priced cost-to-go.
    PriceResponsive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleTrajectory {
    pub vid: u32,
    pub t0: u32,
    pub links: Vec<LinkId>,
    pub entries: Vec<u32>,
    pub arrival: u32,
}

impl VehicleTrajectory {
    pub fn exit(&self, k: usize) -> u32 {
        self.entries.get(k + 1).copied().unwrap_or(self.arrival)
    }

    pub fn travel_time(&self) -> u32 {
        self.arrival - self.t0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub vehicles: Vec<VehicleTrajectory>,
}

impl TrajectorySet {
    /// Sum of arrival seconds.
    pub fn arrival_sum(&self) -> u64 {
        self.vehicles.iter().map(|v| v.arrival as u64).sum()
    }

    pub fn total_travel_time(&self) -> u64 {
        self.vehicles.iter().map(|v| v.travel_time() as u64).sum()
    }

    pub fn to_csv(&self, sc: &Scenario) -> String {
        let mut out = String::from("vid,link_from,link_to,entry_t,exit_t\n");
        for v in &self.vehicles {
            for (k, &l) in v.links.iter().enumerate() {
                let link = sc.network.link(l);
                let _ = writeln!(out, "{},{},{},{},{}", v.vid, link.from, link.to, v.entries[k], v.exit(k));
            }
        }
        out
    }
}

/// Vehicles physically on `link` at second `t`, queued ones included.
pub fn occupancy(traj: &TrajectorySet, link: LinkId, t: u32) -> u32 {
    let mut n = 0;
    for v in &traj.vehicles {
        for (k, &l) in v.links.iter().enumerate() {
            if l == link && v.entries[k] <= t && t < v.exit(k) {
                n += 1;
            }
        }
    }
    n
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Mid-run loader state.  Cheap enough to clone at every branch of an
/// enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    t: u32,
    credit: Vec<f64>,
    occ: Vec<u32>,
    next_rank: Vec<usize>,
    entries: Vec<Vec<u32>>,
    arrival: Vec<Option<u32>>,
    /// Earliest second a vehicle is willing to enter its next link.
    hold: Vec<u32>,
    unplaced: usize,
}

impl EngineState {
    /// Next second to be simulated.
    pub fn time(&self) -> u32 {
        self.t
    }

    /// True once every vehicle has entered its last link.
    pub fn all_placed(&self) -> bool {
        self.unplaced == 0
    }

    /// Entry seconds of vehicle `v` so far, one per link entered.
    pub fn entries(&self, v: usize) -> &[u32] {
        &self.entries[v]
    }

    /// Bit-exact summary usable as a memo key.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::with_capacity(self.credit.len() + self.entries.len() * 4 + 1);
        k.push(self.t as u64);
        k.extend(self.credit.iter().map(|c| c.to_bits()));
        for (e, h) in self.entries.iter().zip(&self.hold) {
            k.push(e.len() as u64);
            k.extend(e.iter().map(|&x| x as u64));
            k.push(*h as u64);
        }
        k
    }
}

/// Per-vehicle priced cost-to-go tables driving voluntary holds.
pub struct PriceHold {
    /// `value[v][k][t]`: least priced cost when ready to enter path link `k`
    /// at second `t`; index `K` holds the arrival second itself.
    value: Vec<Vec<Vec<f64>>>,
    lam: MultiplierField,
}

impl PriceHold {
    pub fn new(loader: &Loader<'_>, lam: &MultiplierField) -> Self {
        let h = loader.horizon() as usize;
        let net = &loader.sc.network;
        let value = loader
            .sc
            .vehicles
            .iter()
            .map(|path| {
                let n = path.links.len();
                let mut table = vec![vec![f64::INFINITY; h + 2]; n + 1];
                for t in 0..=h {
                    table[n][t] = t as f64;
                }
                for k in (0..n).rev() {
                    let f = net.link(path.links[k]).fftt as usize;
                    let ctrl = loader.ctrl[path.links[k].0];
                    for t in (0..=h).rev() {
                        let price = ctrl.map_or(0.0, |c| lam.get(c, t as u32));
                        let go = if t + f <= h { price + table[k + 1][t + f] } else { f64::INFINITY };
                        table[k][t] = go.min(table[k][t + 1]);
                    }
                }
                table
            })
            .collect();
        Self { value, lam: lam.clone() }
    }

    /// Earliest best entry second into path link `k` for a vehicle ready at
    /// `ready`.
    fn target(&self, loader: &Loader<'_>, v: usize, k: usize, ready: u32) -> u32 {
        let path = &loader.sc.vehicles[v];
        let l = path.links[k];
        let Some(c) = loader.ctrl[l.0] else {
            return ready;
        };
        let f = loader.sc.network.link(l).fftt;
        let h = loader.horizon();
        let next = &self.value[v][k + 1];
        let mut best = (f64::INFINITY, ready);
        for t in ready..=h.saturating_sub(f) {
            let c = self.lam.get(c, t) + next[(t + f) as usize];
            if c < best.0 {
                best = (c, t);
            }
        }
        best.1
    }
}

/// Capacity regime of controlled links.
#[derive(Clone, Copy)]
pub enum Gate<'g> {
    /// Controlled link `k` discharges at `γ(k, t) · SR`.
    Plan(&'g GammaField),
    /// Same, with the factor supplied by a callback.
    Factor(&'g dyn Fn(usize, u32) -> f64),
    /// Controlled links have no capacity limit.
    Open,
}

impl fmt::Debug for Gate<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Plan(_) => f.write_str("Plan"),
            Gate::Factor(_) => f.write_str("Factor"),
            Gate::Open => f.write_str("Open"),
        }
    }
}

/// Shared, immutable loading context for one scenario.
pub struct Loader<'a> {
    pub sc: &'a Scenario,
    pub aux: &'a PathAux,
    order: Vec<usize>,
    /// Controlled-link position for each link, `None` for regular links.
    ctrl: Vec<Option<usize>>,
}

impl<'a> Loader<'a> {
    pub fn new(sc: &'a Scenario, aux: &'a PathAux) -> Self {
        let net = &sc.network;
        // downstream links first so that exits free storage for entries in
        // the same second
        let order = match net.topological_links() {
            Some(topo) => topo.into_iter().rev().map(|l| l.0).collect(),
            None => (0..net.links.len()).collect(),
        };
        let mut ctrl = vec![None; net.links.len()];
        for (k, l) in net.controlled_links().into_iter().enumerate() {
            ctrl[l.0] = Some(k);
        }
        Self { sc, aux, order, ctrl }
    }

    pub fn horizon(&self) -> u32 {
        self.sc.network.horizon
    }

    pub fn controlled_position(&self, l: LinkId) -> Option<usize> {
        self.ctrl[l.0]
    }

    pub fn start(&self, hold: Option<&PriceHold>) -> EngineState {
        let nv = self.sc.vehicles.len();
        let mut st = EngineState {
            t: 0,
            credit: vec![CREDIT_CAP; self.sc.network.links.len()],
            occ: vec![0; self.sc.network.links.len()],
            next_rank: vec![0; self.sc.network.links.len()],
            entries: vec![Vec::new(); nv],
            arrival: vec![None; nv],
            hold: vec![0; nv],
            unplaced: nv,
        };
        if let Some(ph) = hold {
            for (v, path) in self.sc.vehicles.iter().enumerate() {
                st.hold[v] = ph.target(self, v, 0, path.t0);
            }
        }
        st
    }

    fn ready_time(&self, st: &EngineState, v: usize) -> u32 {
        let path = &self.sc.vehicles[v];
        match st.entries[v].len() {
            0 => path.t0,
            k => st.entries[v][k - 1] + self.sc.network.link(path.links[k - 1]).fftt,
        }
    }

    /// Simulates second `st.time()` and advances the clock.
    pub fn step(&self, st: &mut EngineState, gate: Gate<'_>, hold: Option<&PriceHold>) {
        let net = &self.sc.network;
        let t = st.t;
        for (v, a) in st.arrival.iter().enumerate() {
            if *a == Some(t) {
                let last = *self.sc.vehicles[v].links.last().expect("non-empty path");
                st.occ[last.0] -= 1;
            }
        }
        for (l, link) in net.links.iter().enumerate() {
            let rate = match (self.ctrl[l], gate) {
                (None, _) => 1.0,
                (Some(k), Gate::Plan(g)) => g.get(k, t),
                (Some(k), Gate::Factor(f)) => f(k, t),
                (Some(_), Gate::Open) => continue,
            };
            st.credit[l] += rate * link.sat_rate;
        }
        loop {
            let mut moved = false;
            for &l in &self.order {
                let chain = &self.aux.fifo_chain[l];
                let link = &net.links[l];
                let gated = self.ctrl[l].is_none() || !matches!(gate, Gate::Open);
                while let Some(&v) = chain.get(st.next_rank[l]) {
                    let k = self.aux.path_position(v, LinkId(l)).expect("chain member traverses link");
                    if st.entries[v].len() != k || self.ready_time(st, v) > t || st.hold[v] > t {
                        break;
                    }
                    if link.storage.is_some_and(|cap| st.occ[l] >= cap) {
                        break;
                    }
                    if gated && st.credit[l] < 1.0 - EPS {
                        break;
                    }
                    let path = &self.sc.vehicles[v];
                    if k > 0 {
                        st.occ[path.links[k - 1].0] -= 1;
                    }
                    st.occ[l] += 1;
                    if gated {
                        st.credit[l] -= 1.0;
                    }
                    st.next_rank[l] += 1;
                    st.entries[v].push(t);
                    if k + 1 == path.links.len() {
                        st.arrival[v] = Some(t + link.fftt);
                        st.unplaced -= 1;
                    } else if let Some(ph) = hold {
                        st.hold[v] = ph.target(self, v, k + 1, t + link.fftt);
                    }
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        for c in &mut st.credit {
            *c = c.clamp(0.0, CREDIT_CAP);
        }
        st.t += 1;
    }

    /// Spans `[from, to)` during which a vehicle stood at the head of a
    /// link's upstream node, ready to enter it but not admitted, cut off at
    /// the last entry that still allows arrival by the horizon.
    pub fn waits(&self, st: &EngineState) -> Vec<(LinkId, u32, u32)> {
        let mut out = Vec::new();
        for (v, path) in self.sc.vehicles.iter().enumerate() {
            let entries = &st.entries[v];
            for (k, &l) in path.links.iter().enumerate() {
                let ready = if k == 0 { path.t0 } else { entries[k - 1] + self.sc.network.link(path.links[k - 1]).fftt };
                let rest: u32 = path.links[k..].iter().map(|&l| self.sc.network.link(l).fftt).sum();
                let end = entries.get(k).copied().unwrap_or(st.t).min((self.horizon() + 1).saturating_sub(rest));
                if end > ready {
                    out.push((l, ready, end));
                }
                if k >= entries.len() {
                    break;
                }
            }
        }
        out
    }

    /// Lower bound on each vehicle's arrival given the state so far.
    pub fn arrival_bound(&self, st: &EngineState, v: usize) -> u32 {
        if let Some(a) = st.arrival[v] {
            return a;
        }
        let path = &self.sc.vehicles[v];
        let k = st.entries[v].len();
        let rest: u32 = path.links[k..].iter().map(|&l| self.sc.network.link(l).fftt).sum();
        self.ready_time(st, v).max(st.t).max(st.hold[v]) + rest
    }

    /// Lower bound on total delay of any continuation of `st`.
    pub fn delay_bound(&self, st: &EngineState) -> u64 {
        (0..self.sc.vehicles.len())
            .map(|v| (self.arrival_bound(st, v) - self.sc.vehicles[v].t0 - self.aux.free_flow[v]) as u64)
            .sum()
    }

    /// Vehicles that can no longer arrive by the horizon.
    pub fn doomed(&self, st: &EngineState) -> Vec<u32> {
        (0..self.sc.vehicles.len())
            .filter(|&v| self.arrival_bound(st, v) > self.horizon())
            .map(|v| self.sc.vehicles[v].vid)
            .collect()
    }

    /// Steps until every vehicle is placed on its last link or the horizon
    /// has been simulated.
    pub fn run_from(&self, mut st: EngineState, gate: Gate<'_>, hold: Option<&PriceHold>) -> Result<TrajectorySet> {
        while !st.all_placed() && st.t <= self.horizon() {
            self.step(&mut st, gate, hold);
        }
        self.finish(&st)
    }

    pub fn finish(&self, st: &EngineState) -> Result<TrajectorySet> {
        let h = self.horizon();
        let stuck: Vec<u32> = (0..self.sc.vehicles.len())
            .filter(|&v| st.arrival[v].is_none_or(|a| a > h))
            .map(|v| self.sc.vehicles[v].vid)
            .collect();
        if !stuck.is_empty() {
            return Err(Error::HorizonExhausted { horizon: h, stuck });
        }
        let vehicles = self
            .sc
            .vehicles
            .iter()
            .enumerate()
            .map(|(v, p)| VehicleTrajectory {
                vid: p.vid,
                t0: p.t0,
                links: p.links.clone(),
                entries: st.entries[v].clone(),
                arrival: st.arrival[v].expect("checked above"),
            })
            .collect();
        Ok(TrajectorySet { vehicles })
    }
}

// ---------------------------------------------------------------------------
// Public loaders
// ---------------------------------------------------------------------------

/// Feasible loading under a signal plan.
pub fn standard_dnl(sc: &Scenario, aux: &PathAux, cfg: &PhaseConfig, plan: &SignalPlan) -> Result<(TrajectorySet, MoeReport)> {
    let gamma = plan.gamma(cfg);
    let loader = Loader::new(sc, aux);
    let traj = loader.run_from(loader.start(None), Gate::Plan(&gamma), None)?;
    let moe = compute_moe(&traj, plan, cfg, sc, aux);
    Ok((traj, moe))
}

/// Vehicle subproblem value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L11 {
    /// Arrival seconds plus accrued entry prices.
    pub raw: f64,
    /// Same, less every vehicle's free-flow arrival second: the delay scale
    /// on which upper bounds are measured.
    pub delay_scale: f64,
}

/// Loading with controlled-link capacities removed and entry prices charged.
pub fn customized_dnl(
    sc: &Scenario,
    aux: &PathAux,
    lam: &MultiplierField,
    mode: CustomMode,
) -> Result<(TrajectorySet, L11)> {
    let loader = Loader::new(sc, aux);
    let hold = match mode {
        CustomMode::Greedy => None,
        CustomMode::PriceResponsive => Some(PriceHold::new(&loader, lam)),
    };
    let traj = loader.run_from(loader.start(hold.as_ref()), Gate::Open, hold.as_ref())?;
    let mut priced = 0.0;
    for v in &traj.vehicles {
        for (k, &l) in v.links.iter().enumerate() {
            if let Some(c) = loader.controlled_position(l) {
                priced += lam.get(c, v.entries[k]);
            }
        }
    }
    let arrivals = traj.arrival_sum() as f64;
    let free: u64 = sc.vehicles.iter().enumerate().map(|(v, p)| (p.t0 + aux.free_flow[v]) as u64).sum();
    let raw = arrivals + priced;
    Ok((traj, L11 { raw, delay_scale: raw - free as f64 }))
}

// ---------------------------------------------------------------------------
// Measures of effectiveness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleDelay {
    pub vid: u32,
    pub origin: NodeId,
    pub destination: NodeId,
    pub delay: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoeReport {
    pub total_travel_time: u64,
    pub total_delay: u64,
    pub transitions: usize,
    /// Total delay plus one per phase transition.
    pub objective: u64,
    pub arrivals_during_green: BTreeMap<String, usize>,
    pub arrivals_during_non_green: BTreeMap<String, usize>,
    pub vehicle_delays: Vec<VehicleDelay>,
    /// Longest wait in front of a controlled link.
    pub max_controlled_wait: u32,
}

pub fn compute_moe(traj: &TrajectorySet, plan: &SignalPlan, cfg: &PhaseConfig, sc: &Scenario, aux: &PathAux) -> MoeReport {
    let net = &sc.network;
    let mut green = BTreeMap::new();
    let mut other = BTreeMap::new();
    for x in &cfg.set.intersections {
        green.insert(x.id.clone(), 0);
        other.insert(x.id.clone(), 0);
    }
    let mut max_wait = 0;
    let mut delays = Vec::with_capacity(traj.vehicles.len());
    for (v, tr) in traj.vehicles.iter().enumerate() {
        for (k, &l) in tr.links.iter().enumerate() {
            let link = net.link(l);
            let Some(id) = link.intersection() else { continue };
            let ready = if k == 0 { tr.t0 } else { tr.entries[k - 1] + net.link(tr.links[k - 1]).fftt };
            max_wait = max_wait.max(tr.entries[k] - ready);
            let pos = cfg.mapping.position(l).expect("controlled link is mapped");
            let t = tr.entries[k];
            let in_green = plan.arc_at(t).is_some_and(|arc| {
                let m = cfg.mapping.row(pos);
                match (arc.window(t), arc.next_phase()) {
                    (Window::Green, _) => m[arc.phase] > 0.0,
                    (Window::Yellow | Window::AllRed, Some(q)) => m[arc.phase] > 0.0 && m[q] > 0.0,
                    _ => false,
                }
            });
            *if in_green { green.get_mut(id) } else { other.get_mut(id) }.expect("known intersection") += 1;
        }
        let path = &sc.vehicles[v];
        delays.push(VehicleDelay {
            vid: tr.vid,
            origin: path.origin(),
            destination: path.destination(),
            delay: tr.arrival - tr.t0 - aux.free_flow[v],
        });
    }
    let total_delay = delays.iter().map(|d| d.delay as u64).sum::<u64>();
    let transitions = plan.transitions();
    MoeReport {
        total_travel_time: traj.total_travel_time(),
        total_delay,
        transitions,
        objective: total_delay + transitions as u64,
        arrivals_during_green: green,
        arrivals_during_non_green: other,
        vehicle_delays: delays,
        max_controlled_wait: max_wait,
    }
}

// ---------------------------------------------------------------------------
// Feasibility check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// Controlled-link capacity under the plan's factor field.
    Cap3p,
    /// Regular-link capacity.
    Cap4,
    Storage5,
    Fifo6,
    Conserve7,
}

impl Constraint {
    pub fn family(&self) -> &'static str {
        match self {
            Constraint::Cap3p => "cap3p",
            Constraint::Cap4 => "cap4",
            Constraint::Storage5 => "storage5",
            Constraint::Fifo6 => "fifo6",
            Constraint::Conserve7 => "vconserve7",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub link: Option<(NodeId, NodeId)>,
    pub t: Option<u32>,
    pub vehicles: Vec<u32>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint.family())?;
        if let Some((a, b)) = self.link {
            write!(f, " on ({a}, {b})")?;
        }
        if let Some(t) = self.t {
            write!(f, " at t={t}")?;
        }
        write!(f, " vehicles {:?}", self.vehicles)
    }
}

/// Checks capacity, storage, FIFO and path conservation of a loading
/// against the plan-induced capacity field.
pub fn validate_feasible(traj: &TrajectorySet, gamma: &GammaField, sc: &Scenario, aux: &PathAux) -> Vec<Violation> {
    let net = &sc.network;
    let h = net.horizon;
    let mut out = Vec::new();
    let pair = |l: LinkId| (net.link(l).from, net.link(l).to);

    // conservation and timing along each path
    let mut ok = vec![false; sc.vehicles.len()];
    for (v, path) in sc.vehicles.iter().enumerate() {
        let bad = |out: &mut Vec<Violation>, l: Option<LinkId>, t: Option<u32>| {
            out.push(Violation { constraint: Constraint::Conserve7, link: l.map(pair), t, vehicles: vec![path.vid] })
        };
        let Some(tr) = traj.vehicles.iter().find(|x| x.vid == path.vid) else {
            bad(&mut out, None, None);
            continue;
        };
        if tr.links != path.links || tr.entries.len() != path.links.len() {
            let missing = path.links.iter().find(|l| !tr.links.contains(l)).copied();
            bad(&mut out, missing, None);
            continue;
        }
        let mut fine = tr.entries[0] >= path.t0;
        if !fine {
            bad(&mut out, Some(path.links[0]), Some(tr.entries[0]));
        }
        for k in 0..path.links.len() {
            let f = net.link(path.links[k]).fftt;
            if tr.exit(k) < tr.entries[k] + f {
                bad(&mut out, Some(path.links[k]), Some(tr.entries[k]));
                fine = false;
            }
        }
        let last = path.links.len() - 1;
        if tr.arrival != tr.entries[last] + net.link(path.links[last]).fftt || tr.arrival > h {
            bad(&mut out, Some(path.links[last]), Some(tr.arrival));
            fine = false;
        }
        ok[v] = fine;
    }

    // per-link entry lists
    let mut entries: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); net.links.len()];
    for tr in &traj.vehicles {
        if tr.entries.len() != tr.links.len() {
            continue;
        }
        for (k, &l) in tr.links.iter().enumerate() {
            entries[l.0].push((tr.entries[k], tr.exit(k), tr.vid));
        }
    }
    let ctrl: BTreeMap<LinkId, usize> = net.controlled_links().into_iter().enumerate().map(|(k, l)| (l, k)).collect();
    for (l, list) in entries.iter().enumerate() {
        let link = net.link(LinkId(l));
        // capacity through the credit recursion
        let end = list.iter().map(|e| e.0).max().map_or(0, |m| m.max(h.saturating_sub(1)));
        let mut credit = CREDIT_CAP;
        for t in 0..=end {
            let rate = match ctrl.get(&LinkId(l)) {
                Some(&k) => gamma.get(k, t),
                None => 1.0,
            };
            let here: Vec<u32> = list.iter().filter(|e| e.0 == t).map(|e| e.2).collect();
            credit += rate * link.sat_rate - here.len() as f64;
            if credit < -1e-6 {
                let constraint = if ctrl.contains_key(&LinkId(l)) { Constraint::Cap3p } else { Constraint::Cap4 };
                out.push(Violation { constraint, link: Some(pair(LinkId(l))), t: Some(t), vehicles: here });
                credit = 0.0;
            }
            credit = credit.min(CREDIT_CAP);
        }
        // storage
        if let Some(cap) = link.storage {
            let mut times: Vec<u32> = list.iter().map(|e| e.0).collect();
            times.sort_unstable();
            times.dedup();
            for t in times {
                let on: Vec<u32> = list.iter().filter(|e| e.0 <= t && t < e.1).map(|e| e.2).collect();
                if on.len() as u32 > cap {
                    out.push(Violation { constraint: Constraint::Storage5, link: Some(pair(LinkId(l))), t: Some(t), vehicles: on });
                }
            }
        }
        // FIFO between consecutive chain members
        let entry_of = |v: usize| {
            let vid = sc.vehicles[v].vid;
            list.iter().find(|e| e.2 == vid).map(|e| e.0)
        };
        for w in aux.fifo_chain[l].windows(2) {
            if let (Some(a), Some(b)) = (entry_of(w[0]), entry_of(w[1])) {
                if a > b {
                    out.push(Violation {
                        constraint: Constraint::Fifo6,
                        link: Some(pair(LinkId(l))),
                        t: Some(b),
                        vehicles: vec![sc.vehicles[w[0]].vid, sc.vehicles[w[1]].vid],
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{derive_path_aux, load_scenario};
    use crate::phases::parse_phases;
    use crate::ptgraph::PhaseTimeArc;

    fn line(sat_vph: f64, storage: &str, vehicles: &str, horizon: u32) -> Scenario {
        let net = format!(
            r#"{{"horizon": {horizon}, "nodes": [1,2,3,4],
               "links": [{{"from":1,"to":2,"fftt":3,"sat_rate_vph":1800,"storage":"unbounded"}},
                         {{"from":2,"to":3,"fftt":2,"sat_rate_vph":{sat_vph},"storage":{storage},"control":{{"intersection":"A"}}}},
                         {{"from":3,"to":4,"fftt":5,"sat_rate_vph":3600,"storage":"unbounded"}}]}}"#
        );
        load_scenario(&net, vehicles).unwrap()
    }

    fn phases(sc: &Scenario) -> PhaseConfig {
        parse_phases(
            r#"{"intersections": [{"id": "A", "phases": [
                {"id": 1, "gmin": 2, "gmax": 60, "yellow": 2, "allred": 1, "serves": [{"from":2,"to":3}]},
                {"id": 2, "gmin": 2, "gmax": 60, "yellow": 2, "allred": 1, "serves": []}]}]}"#,
        )
        .unwrap()
        .build(&sc.network, None)
        .unwrap()
    }

    fn rest(state: usize, horizon: u32) -> SignalPlan {
        SignalPlan {
            horizon,
            arcs: vec![PhaseTimeArc { state, phase: state, tau: 0, green: horizon, yellow: 0, allred: 0, next: None }],
        }
    }

    #[test]
    fn single_vehicle_all_green_is_free_flow() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":4,"nodes":[1,2,3,4]}]}"#, 50);
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        let (traj, moe) = standard_dnl(&sc, &aux, &cfg, &rest(0, 50)).unwrap();
        assert_eq!(traj.vehicles[0].arrival, 14);
        assert_eq!(moe.total_delay, 0);
        assert_eq!(moe.arrivals_during_green["A"], 1);
        assert!(validate_feasible(&traj, &plan_gamma(&cfg, 50), &sc, &aux).is_empty());
    }

    fn plan_gamma(cfg: &PhaseConfig, h: u32) -> GammaField {
        rest(0, h).gamma(cfg)
    }

    #[test]
    fn half_rate_spaces_two_seconds() {
        let sc = line(
            1800.0,
            "\"unbounded\"",
            r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[2,3,4]},{"vid":2,"t0":0,"nodes":[2,3,4]}]}"#,
            30,
        );
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        let (traj, _) = standard_dnl(&sc, &aux, &cfg, &rest(0, 30)).unwrap();
        assert_eq!(traj.vehicles[0].entries[0], 0);
        assert_eq!(traj.vehicles[1].entries[0], 2);
    }

    #[test]
    fn red_hold_counts_as_delay() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3,4]}]}"#, 40);
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        // red for the approach until t = 10: phase 2 holds 7 s then clears 3 s
        let plan = SignalPlan {
            horizon: 40,
            arcs: vec![
                PhaseTimeArc { state: 1, phase: 1, tau: 0, green: 7, yellow: 2, allred: 1, next: Some((0, 0)) },
                PhaseTimeArc { state: 0, phase: 0, tau: 10, green: 30, yellow: 0, allred: 0, next: None },
            ],
        };
        plan.check(&cfg, Default::default()).unwrap();
        let (traj, moe) = standard_dnl(&sc, &aux, &cfg, &plan).unwrap();
        assert_eq!(traj.vehicles[0].entries, vec![0, 10, 12]);
        assert_eq!(moe.total_delay, 7);
        assert_eq!(moe.arrivals_during_non_green["A"], 0);
        assert_eq!(moe.max_controlled_wait, 7);
    }

    #[test]
    fn customized_run_ignores_red_and_is_flagged() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3,4]}]}"#, 40);
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        let lam = MultiplierField::zeros(1, 40);
        let (traj, l11) = customized_dnl(&sc, &aux, &lam, CustomMode::Greedy).unwrap();
        assert_eq!(traj.vehicles[0].arrival, 10);
        assert_eq!(l11.raw, 10.0);
        assert_eq!(l11.delay_scale, 0.0);
        let red = rest(1, 40).gamma(&cfg);
        let v = validate_feasible(&traj, &red, &sc, &aux);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].constraint, Constraint::Cap3p);
        assert_eq!(v[0].t, Some(3));
    }

    #[test]
    fn entry_price_is_charged() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":14,"nodes":[1,2,3,4]}]}"#, 40);
        let aux = derive_path_aux(&sc);
        let mut lam = MultiplierField::zeros(1, 40);
        lam.set(0, 17, 2.5);
        let (_, l11) = customized_dnl(&sc, &aux, &lam, CustomMode::Greedy).unwrap();
        assert_eq!(l11.raw, 24.0 + 2.5);
    }

    #[test]
    fn price_responsive_waits_out_an_expensive_second() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3,4]}]}"#, 40);
        let aux = derive_path_aux(&sc);
        let mut lam = MultiplierField::zeros(1, 40);
        lam.set(0, 3, 5.0);
        lam.set(0, 4, 5.0);
        let (traj, l11) = customized_dnl(&sc, &aux, &lam, CustomMode::PriceResponsive).unwrap();
        assert_eq!(traj.vehicles[0].entries[1], 5);
        assert_eq!(l11.raw, 12.0);
        let (greedy, g11) = customized_dnl(&sc, &aux, &lam, CustomMode::Greedy).unwrap();
        assert_eq!(greedy.vehicles[0].entries[1], 3);
        assert_eq!(g11.raw, 15.0);
    }

    #[test]
    fn storage_holds_upstream() {
        // link 2->3 stores one vehicle and the approach is red-free
        let sc = line(
            3600.0,
            "1",
            r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3,4]},{"vid":2,"t0":0,"nodes":[1,2,3,4]}]}"#,
            40,
        );
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        let (traj, _) = standard_dnl(&sc, &aux, &cfg, &rest(0, 40)).unwrap();
        assert_eq!(traj.vehicles[0].entries, vec![0, 3, 5]);
        // second vehicle enters the approach at 2 (regular rate 0.5/s), then
        // waits for the single storage slot freed at 5
        assert_eq!(traj.vehicles[1].entries, vec![2, 5, 7]);
        for t in 0..40 {
            assert!(occupancy(&traj, LinkId(1), t) <= 1);
        }
        assert!(validate_feasible(&traj, &rest(0, 40).gamma(&cfg), &sc, &aux).is_empty());
    }

    #[test]
    fn occupancy_single_vehicle() {
        let traj = TrajectorySet {
            vehicles: vec![VehicleTrajectory { vid: 1, t0: 3, links: vec![LinkId(0)], entries: vec![3], arrival: 13 }],
        };
        assert_eq!(occupancy(&traj, LinkId(0), 2), 0);
        assert_eq!(occupancy(&traj, LinkId(0), 3), 1);
        assert_eq!(occupancy(&traj, LinkId(0), 12), 1);
        assert_eq!(occupancy(&traj, LinkId(0), 13), 0);
        assert_eq!(occupancy(&TrajectorySet::default(), LinkId(0), 5), 0);
    }

    #[test]
    fn horizon_exhaustion_names_vehicle() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":7,"t0":0,"nodes":[1,2,3,4]}]}"#, 20);
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        match standard_dnl(&sc, &aux, &cfg, &rest(1, 20)) {
            Err(Error::HorizonExhausted { stuck, .. }) => assert_eq!(stuck, vec![7]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skipped_link_is_a_conservation_violation() {
        let sc = line(1800.0, "\"unbounded\"", r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3,4]}]}"#, 40);
        let aux = derive_path_aux(&sc);
        let cfg = phases(&sc);
        let (mut traj, _) = standard_dnl(&sc, &aux, &cfg, &rest(0, 40)).unwrap();
        traj.vehicles[0].links.remove(1);
        traj.vehicles[0].entries.remove(1);
        let v = validate_feasible(&traj, &rest(0, 40).gamma(&cfg), &sc, &aux);
        assert!(v.iter().any(|x| x.constraint == Constraint::Conserve7));
    }
}
