//! Ground truth for small instances: exhaustive plan enumeration with exact
//! loading, and a text export of the full mixed-integer model together with
//! a residual checker for assignments.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::loader::{compute_moe, EngineState, Gate, Loader, MoeReport, TrajectorySet, CREDIT_CAP};
use crate::network::LinkId;
use crate::ptgraph::{arcs_from, effective_factor, ClearancePlacement, PhaseTimeArc, PlanDoc, SignalPlan};

// ---------------------------------------------------------------------------
// Enumeration oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_phases: usize,
    pub max_horizon: u32,
    pub max_vehicles: usize,
    /// Entries kept in the dominance memo before it stops growing.
    pub memo_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_phases: 4, max_horizon: 60, max_vehicles: 8, memo_cap: 4_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub plan: SignalPlan,
    pub trajectories: TrajectorySet,
    pub moe: MoeReport,
    pub objective: u64,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDoc {
    pub objective: u64,
    pub total_delay: u64,
    pub transitions: usize,
    pub nodes_explored: u64,
    pub plan: PlanDoc,
}

impl OracleResult {
    pub fn to_doc(&self, inst: &Instance) -> OracleDoc {
        OracleDoc {
            objective: self.objective,
            total_delay: self.moe.total_delay,
            transitions: self.moe.transitions,
            nodes_explored: self.nodes,
            plan: self.plan.to_doc(&inst.phases),
        }
    }
}

struct Search<'a> {
    inst: &'a Instance,
    loader: Loader<'a>,
    placement: ClearancePlacement,
    bound: u64,
    best: Option<(u64, Vec<PhaseTimeArc>, TrajectorySet)>,
    memo: HashMap<(usize, Vec<u64>), u64>,
    memo_cap: usize,
    nodes: u64,
}

impl Search<'_> {
    fn cutoff(&self) -> u64 {
        match &self.best {
            // equal cost later in the order never wins the tie-break
            Some((obj, ..)) => (*obj).min(self.bound + 1),
            None => self.bound + 1,
        }
    }

    /// Steps `st` through second `t` under `arc`.
    fn step(&self, st: &mut EngineState, arc: &PhaseTimeArc) {
        let cfg = &self.inst.phases;
        let horizon = self.inst.horizon();
        let f = |k: usize, t: u32| if t < horizon { effective_factor(&cfg.mapping, &cfg.factors, k, arc, t) } else { 0.0 };
        self.loader.step(st, Gate::Factor(&f), None);
    }

    fn dfs(&mut self, state: usize, tau: u32, engine: &EngineState, transitions: u64, path: &mut Vec<PhaseTimeArc>) {
        self.nodes += 1;
        let horizon = self.inst.horizon();
        let mut arcs = Vec::new();
        arcs_from(&self.inst.phases, state, tau, horizon, self.placement, &mut arcs);
        let mut green_state = engine.clone();
        let mut green_done = 0;
        for arc in arcs {
            debug_assert!(arc.green >= green_done, "arcs must come in nondecreasing green order");
            while green_done < arc.green {
                let run = PhaseTimeArc { green: arc.green, ..arc };
                self.step(&mut green_state, &run);
                green_done += 1;
            }
            // later arcs only see the network further along
            if !self.loader.doomed(&green_state).is_empty()
                || transitions + self.loader.delay_bound(&green_state) >= self.cutoff()
            {
                break;
            }
            let cost = transitions + arc.is_transition() as u64;
            let mut st = green_state.clone();
            for _ in arc.green_end()..arc.h() {
                self.step(&mut st, &arc);
            }
            path.push(arc);
            match arc.next {
                None => self.finish(st, cost, path),
                Some((s2, _)) => {
                    let viable = self.loader.doomed(&st).is_empty() && cost + self.loader.delay_bound(&st) < self.cutoff();
                    if viable && self.fresh(s2, &st, cost) {
                        self.dfs(s2, arc.h(), &st, cost, path);
                    }
                }
            }
            path.pop();
        }
    }

    /// False when the same vertex and loading state was already reached
    /// with no more transitions.
    fn fresh(&mut self, state: usize, st: &EngineState, cost: u64) -> bool {
        let key = (state, st.key());
        match self.memo.get_mut(&key) {
            Some(seen) if *seen <= cost => false,
            Some(seen) => {
                *seen = cost;
                true
            }
            None => {
                if self.memo.len() < self.memo_cap {
                    self.memo.insert(key, cost);
                }
                true
            }
        }
    }

    fn finish(&mut self, st: EngineState, transitions: u64, path: &[PhaseTimeArc]) {
        let zero = |_: usize, _: u32| 0.0;
        let Ok(traj) = self.loader.run_from(st, Gate::Factor(&zero), None) else {
            return;
        };
        let delay: u64 = traj
            .vehicles
            .iter()
            .enumerate()
            .map(|(v, x)| (x.arrival - x.t0 - self.inst.aux.free_flow[v]) as u64)
            .sum();
        let obj = delay + transitions;
        if obj < self.cutoff() {
            self.best = Some((obj, path.to_vec(), traj));
        }
    }
}

/// Exhaustive search for the plan of least total delay plus transitions.
///
/// Plans are visited in the order arcs are generated (initial state, then
/// green duration, then successor); among optimal plans the first in that
/// order is returned.
pub fn brute_force_optimum(inst: &Instance, limits: &Limits, placement: ClearancePlacement) -> Result<OracleResult> {
    let phases = inst.phases.set.len();
    let horizon = inst.horizon();
    let vehicles = inst.scenario.vehicles.len();
    if phases > limits.max_phases || horizon > limits.max_horizon || vehicles > limits.max_vehicles {
        return Err(Error::LimitsExceeded(format!(
            "{phases} phases (max {}), horizon {horizon} (max {}), {vehicles} vehicles (max {})",
            limits.max_phases, limits.max_horizon, limits.max_vehicles
        )));
    }
    let loader = Loader::new(&inst.scenario, &inst.aux);
    let start = loader.start(None);
    let mut search = Search {
        inst,
        loader,
        placement,
        bound: 1,
        best: None,
        memo: HashMap::new(),
        memo_cap: limits.memo_cap,
        nodes: 0,
    };
    // ceiling: every vehicle waits the whole horizon, one transition per
    // second
    let ceiling = (vehicles as u64 + 1) * horizon as u64 + 1;
    loop {
        debug!("enumeration bound {}", search.bound);
        search.memo.clear();
        for &s in &inst.phases.graph.initial {
            let mut path = Vec::new();
            search.dfs(s, 0, &start, 0, &mut path);
        }
        if search.best.is_some() || search.bound >= ceiling {
            break;
        }
        search.bound *= 2;
    }
    let nodes = search.nodes;
    let Some((objective, arcs, trajectories)) = search.best else {
        return Err(Error::NoFeasiblePlan { horizon });
    };
    let plan = SignalPlan { horizon, arcs };
    let moe = compute_moe(&trajectories, &plan, &inst.phases, &inst.scenario, &inst.aux);
    debug_assert_eq!(moe.objective, objective);
    Ok(OracleResult { plan, trajectories, moe, objective, nodes })
}

// ---------------------------------------------------------------------------
// Model export
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cap3p,
    Cap4,
    Storage5,
    Fifo6,
    Vconserve7,
    Pconserve8,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Cap3p, Family::Cap4, Family::Storage5, Family::Fifo6, Family::Vconserve7, Family::Pconserve8];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Cap3p => "cap3p",
            Family::Cap4 => "cap4",
            Family::Storage5 => "storage5",
            Family::Fifo6 => "fifo6",
            Family::Vconserve7 => "vconserve7",
            Family::Pconserve8 => "pconserve8",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub family: Family,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
struct Registry {
    x: HashMap<(usize, usize, u32), usize>,
    w: HashMap<(usize, usize, u32), usize>,
    y: HashMap<PhaseTimeArc, usize>,
    cr: HashMap<(usize, u32), usize>,
    wa: HashMap<(usize, u32), usize>,
}

#[derive(Debug, Clone)]
pub struct MilpInstance {
    pub vars: Vec<Var>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    reg: Registry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCounts {
    pub rows: u64,
    pub cols: u64,
    pub nonzeros: u64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpCounts {
    pub rows: usize,
    pub cols: usize,
    pub nonzeros: usize,
    pub binaries: usize,
    pub rows_by_family: BTreeMap<String, usize>,
    pub cols_by_kind: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceCounts>,
}

impl MilpInstance {
    fn add_var(&mut self, name: String, kind: VarKind) -> usize {
        self.vars.push(Var { name, kind });
        self.vars.len() - 1
    }

    pub fn rows_in(&self, family: Family) -> usize {
        self.rows.iter().filter(|r| r.family == family).count()
    }

    pub fn counts(&self) -> MilpCounts {
        let mut rows_by_family = BTreeMap::new();
        for f in Family::ALL {
            rows_by_family.insert(f.name().to_string(), self.rows_in(f));
        }
        let mut cols_by_kind = BTreeMap::new();
        for v in &self.vars {
            let kind = v.name.split('_').next().unwrap_or("").to_string();
            *cols_by_kind.entry(kind).or_insert(0) += 1;
        }
        MilpCounts {
            rows: self.rows.len(),
            cols: self.vars.len(),
            nonzeros: self.rows.iter().map(|r| r.terms.len()).sum(),
            binaries: self.vars.iter().filter(|v| v.kind == VarKind::Binary).count(),
            rows_by_family,
            cols_by_kind,
            reference: None,
        }
    }

    /// CPLEX LP text.
    pub fn to_lp(&self) -> String {
        let mut out = String::new();
        out.push_str("\\ signal timing and vehicle loading model\nMinimize\n obj:");
        self.write_terms(&mut out, &self.objective);
        out.push_str("\nSubject To\n");
        for r in &self.rows {
            let _ = write!(out, " {}:", r.name);
            self.write_terms(&mut out, &r.terms);
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", r.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            if let VarKind::Continuous { lo, hi } = v.kind {
                if hi.is_finite() {
                    let _ = writeln!(out, " {lo} <= {} <= {hi}", v.name);
                } else {
                    let _ = writeln!(out, " {} >= {lo}", v.name);
                }
            }
        }
        out.push_str("Binaries\n");
        for v in self.vars.iter().filter(|v| v.kind == VarKind::Binary) {
            let _ = writeln!(out, " {}", v.name);
        }
        out.push_str("End\n");
        out
    }

    fn write_terms(&self, out: &mut String, terms: &[(usize, f64)]) {
        if terms.is_empty() {
            out.push_str(" 0 ");
            out.push_str(self.vars.first().map_or("x", |v| v.name.as_str()));
            return;
        }
        for (i, &(var, c)) in terms.iter().enumerate() {
            if i > 0 && i % 8 == 0 {
                out.push_str("\n   ");
            }
            let sign = if c < 0.0 { '-' } else { '+' };
            let mag = c.abs();
            if mag == 1.0 {
                let _ = write!(out, " {sign} {}", self.vars[var].name);
            } else {
                let _ = write!(out, " {sign} {mag} {}", self.vars[var].name);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportOptions {
    pub placement: ClearancePlacement,
    /// Refuse to build models with more columns than this.
    pub max_cols: usize,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { placement: ClearancePlacement::AfterGreen, max_cols: 2_000_000 }
    }
}

/// Phase-time arcs reachable from the source, in generation order.
fn reachable_arcs(inst: &Instance, placement: ClearancePlacement) -> Vec<PhaseTimeArc> {
    let cfg = &inst.phases;
    let horizon = inst.horizon();
    let mut seen: HashSet<(usize, u32)> = cfg.graph.initial.iter().map(|&s| (s, 0)).collect();
    let mut queue: VecDeque<(usize, u32)> = cfg.graph.initial.iter().map(|&s| (s, 0)).collect();
    let mut arcs = Vec::new();
    let mut buf = Vec::new();
    while let Some((s, tau)) = queue.pop_front() {
        buf.clear();
        arcs_from(cfg, s, tau, horizon, placement, &mut buf);
        for a in &buf {
            if let Some((s2, _)) = a.next {
                if seen.insert((s2, a.h())) {
                    queue.push_back((s2, a.h()));
                }
            }
        }
        arcs.extend_from_slice(&buf);
    }
    arcs.sort_by_key(|a| (a.tau, a.state, a.green, a.next));
    arcs
}

fn y_name(a: &PhaseTimeArc) -> String {
    match a.next {
        Some((s2, _)) => format!("y_s{}_{}_{}_s{}", a.state, a.tau, a.green, s2),
        None => format!("y_s{}_{}_{}_z", a.state, a.tau, a.green),
    }
}

/// Builds the full model over each vehicle's own path links.
pub fn export_milp(inst: &Instance, options: &ExportOptions) -> Result<MilpInstance> {
    let sc = &inst.scenario;
    let net = &sc.network;
    let cfg = &inst.phases;
    let h = inst.horizon();
    let arcs = reachable_arcs(inst, options.placement);

    // projected size before allocating names
    let mut x_cols = 0usize;
    let mut w_cols = 0usize;
    for (v, path) in sc.vehicles.iter().enumerate() {
        let mut rest: u32 = path.links.iter().map(|&l| net.link(l).fftt).sum();
        for (k, &l) in path.links.iter().enumerate() {
            let e = inst.aux.earliest[v][k];
            let latest = h - rest;
            x_cols += (latest - e + 1) as usize;
            w_cols += (latest - e) as usize;
            rest -= net.link(l).fftt;
        }
    }
    let used: Vec<bool> = (0..net.links.len()).map(|l| !inst.aux.fifo_chain[l].is_empty()).collect();
    let used_links = used.iter().filter(|&&u| u).count();
    let projected = x_cols + w_cols + arcs.len() + 2 * used_links * h as usize;
    if projected > options.max_cols {
        return Err(Error::LimitsExceeded(format!(
            "model would have {projected} columns ({x_cols} x, {w_cols} w, {} y) over the cap of {}",
            arcs.len(),
            options.max_cols
        )));
    }

    let mut m = MilpInstance { vars: Vec::new(), rows: Vec::new(), objective: Vec::new(), reg: Registry::default() };

    // vehicle movement: entries x and node waits w
    let mut latest: Vec<Vec<u32>> = Vec::new();
    for (v, path) in sc.vehicles.iter().enumerate() {
        let mut rest: u32 = path.links.iter().map(|&l| net.link(l).fftt).sum();
        let mut lv = Vec::new();
        for (k, &l) in path.links.iter().enumerate() {
            let link = net.link(l);
            let e = inst.aux.earliest[v][k];
            let last = h - rest;
            lv.push(last);
            for t in e..=last {
                let i = m.add_var(format!("x_v{}_{}_{}_t{}", path.vid, link.from, link.to, t), VarKind::Binary);
                m.reg.x.insert((v, k, t), i);
            }
            for t in e..last {
                let i = m.add_var(format!("w_v{}_n{}_t{}", path.vid, link.from, t), VarKind::Binary);
                m.reg.w.insert((v, k, t), i);
            }
            rest -= link.fftt;
        }
        latest.push(lv);
    }
    for a in &arcs {
        let i = m.add_var(y_name(a), VarKind::Binary);
        m.reg.y.insert(*a, i);
    }
    for (l, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        let link = net.link(LinkId(l));
        for t in 0..h {
            let i = m.add_var(
                format!("cr_{}_{}_t{t}", link.from, link.to),
                VarKind::Continuous { lo: 0.0, hi: CREDIT_CAP },
            );
            m.reg.cr.insert((l, t), i);
            let i = m.add_var(
                format!("wa_{}_{}_t{t}", link.from, link.to),
                VarKind::Continuous { lo: 0.0, hi: f64::INFINITY },
            );
            m.reg.wa.insert((l, t), i);
        }
    }

    // objective: delay of each arrival plus one per transition
    for (v, path) in sc.vehicles.iter().enumerate() {
        let k = path.links.len() - 1;
        let f = net.link(path.links[k]).fftt;
        for t in inst.aux.earliest[v][k]..=latest[v][k] {
            let delay = t + f - path.t0 - inst.aux.free_flow[v];
            if delay > 0 {
                m.objective.push((m.reg.x[&(v, k, t)], delay as f64));
            }
        }
    }
    for a in arcs.iter().filter(|a| a.is_transition()) {
        m.objective.push((m.reg.y[a], 1.0));
    }

    // capacity with carried credit
    let mut covering: Vec<Vec<Vec<(usize, f64)>>> = vec![vec![Vec::new(); h as usize]; cfg.mapping.links.len()];
    for a in &arcs {
        for t in a.tau..a.h() {
            for (k, cover) in covering.iter_mut().enumerate() {
                let f = effective_factor(&cfg.mapping, &cfg.factors, k, a, t);
                if f > 0.0 {
                    cover[t as usize].push((m.reg.y[a], f));
                }
            }
        }
    }
    let mut users: Vec<Vec<(usize, usize)>> = vec![Vec::new(); net.links.len()];
    for (l, chain) in inst.aux.fifo_chain.iter().enumerate() {
        for &v in chain {
            users[l].push((v, inst.aux.path_position(v, LinkId(l)).expect("chain member")));
        }
    }
    for (l, _) in used.iter().enumerate().filter(|(_, &u)| u) {
        let link = net.link(LinkId(l));
        let ctrl = cfg.mapping.position(LinkId(l));
        for t in 0..h {
            let mut terms: Vec<(usize, f64)> =
                users[l].iter().filter_map(|&(v, k)| m.reg.x.get(&(v, k, t)).map(|&i| (i, 1.0))).collect();
            terms.push((m.reg.cr[&(l, t)], 1.0));
            let mut rhs = 0.0;
            if t == 0 {
                rhs += CREDIT_CAP;
            } else {
                terms.push((m.reg.cr[&(l, t - 1)], -1.0));
            }
            terms.push((m.reg.wa[&(l, t)], 1.0));
            let family = match ctrl {
                Some(k) => {
                    for &(i, f) in &covering[k][t as usize] {
                        terms.push((i, -f * link.sat_rate));
                    }
                    Family::Cap3p
                }
                None => {
                    rhs += link.sat_rate;
                    Family::Cap4
                }
            };
            m.rows.push(Row {
                name: format!("{}_{}_{}_t{t}", family.name(), link.from, link.to),
                family,
                terms,
                sense: Sense::Eq,
                rhs,
            });
        }
    }

    // storage: cumulative entries minus cumulative exits
    for (l, link) in net.links.iter().enumerate() {
        let Some(cap) = link.storage else { continue };
        if users[l].len() as u32 <= cap {
            continue;
        }
        for t in 0..h {
            let mut terms = Vec::new();
            for &(v, k) in &users[l] {
                let path = &sc.vehicles[v];
                for s in inst.aux.earliest[v][k]..=latest[v][k].min(t) {
                    terms.push((m.reg.x[&(v, k, s)], 1.0));
                }
                if k + 1 < path.links.len() {
                    for s in inst.aux.earliest[v][k + 1]..=latest[v][k + 1].min(t) {
                        terms.push((m.reg.x[&(v, k + 1, s)], -1.0));
                    }
                } else {
                    let f = link.fftt;
                    for s in inst.aux.earliest[v][k]..=latest[v][k] {
                        if s + f <= t {
                            terms.push((m.reg.x[&(v, k, s)], -1.0));
                        }
                    }
                }
            }
            // an entry and its own exit cancel; keep rows with live terms
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (i, c) in terms {
                *merged.entry(i).or_insert(0.0) += c;
            }
            let terms: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
            if terms.is_empty() {
                continue;
            }
            m.rows.push(Row {
                name: format!("storage5_{}_{}_t{t}", link.from, link.to),
                family: Family::Storage5,
                terms,
                sense: Sense::Le,
                rhs: cap as f64,
            });
        }
    }

    // FIFO between consecutive chain members
    for (l, chain) in inst.aux.fifo_chain.iter().enumerate() {
        let link = net.link(LinkId(l));
        for pair in chain.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let (ka, kb) = (
                inst.aux.path_position(a, LinkId(l)).expect("chain member"),
                inst.aux.path_position(b, LinkId(l)).expect("chain member"),
            );
            let mut terms = Vec::new();
            for t in inst.aux.earliest[a][ka]..=latest[a][ka] {
                if t > 0 {
                    terms.push((m.reg.x[&(a, ka, t)], t as f64));
                }
            }
            for t in inst.aux.earliest[b][kb]..=latest[b][kb] {
                if t > 0 {
                    terms.push((m.reg.x[&(b, kb, t)], -(t as f64)));
                }
            }
            m.rows.push(Row {
                name: format!("fifo6_{}_{}_v{}_v{}", link.from, link.to, sc.vehicles[a].vid, sc.vehicles[b].vid),
                family: Family::Fifo6,
                terms,
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }

    // vehicle flow balance on each path's space-time network
    for (v, path) in sc.vehicles.iter().enumerate() {
        for (k, &l) in path.links.iter().enumerate() {
            let node = net.link(l).from;
            let (e, last) = (inst.aux.earliest[v][k], latest[v][k]);
            for t in e..=last {
                let mut terms = vec![(m.reg.x[&(v, k, t)], 1.0)];
                if let Some(&i) = m.reg.w.get(&(v, k, t)) {
                    terms.push((i, 1.0));
                }
                if t > e {
                    terms.push((m.reg.w[&(v, k, t - 1)], -1.0));
                }
                if k > 0 {
                    let f = net.link(path.links[k - 1]).fftt;
                    if let Some(&i) = m.reg.x.get(&(v, k - 1, t - f)) {
                        terms.push((i, -1.0));
                    }
                }
                let rhs = if k == 0 && t == e { 1.0 } else { 0.0 };
                m.rows.push(Row {
                    name: format!("vconserve7_v{}_n{node}_t{t}", path.vid),
                    family: Family::Vconserve7,
                    terms,
                    sense: Sense::Eq,
                    rhs,
                });
            }
        }
        let k = path.links.len() - 1;
        let terms = (inst.aux.earliest[v][k]..=latest[v][k]).map(|t| (m.reg.x[&(v, k, t)], 1.0)).collect();
        m.rows.push(Row {
            name: format!("vconserve7_v{}_n{}", path.vid, path.destination()),
            family: Family::Vconserve7,
            terms,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }

    // one path through the phase-time network
    let mut out_of: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
    let mut into: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
    let mut sink = Vec::new();
    for a in &arcs {
        let i = m.reg.y[a];
        out_of.entry((a.state, a.tau)).or_default().push(i);
        match a.next {
            Some((s2, _)) => into.entry((s2, a.h())).or_default().push(i),
            None => sink.push(i),
        }
    }
    let source: Vec<(usize, f64)> = out_of
        .iter()
        .filter(|((_, tau), _)| *tau == 0)
        .flat_map(|(_, ids)| ids.iter().map(|&i| (i, 1.0)))
        .collect();
    m.rows.push(Row { name: "pconserve8_source".into(), family: Family::Pconserve8, terms: source, sense: Sense::Eq, rhs: 1.0 });
    let mut vertices: Vec<(usize, u32)> = out_of.keys().chain(into.keys()).copied().filter(|v| v.1 > 0).collect();
    vertices.sort_by_key(|&(s, tau)| (tau, s));
    vertices.dedup();
    for (s, tau) in vertices {
        let mut terms: Vec<(usize, f64)> = into.get(&(s, tau)).into_iter().flatten().map(|&i| (i, 1.0)).collect();
        terms.extend(out_of.get(&(s, tau)).into_iter().flatten().map(|&i| (i, -1.0)));
        m.rows.push(Row {
            name: format!("pconserve8_s{s}_t{tau}"),
            family: Family::Pconserve8,
            terms,
            sense: Sense::Eq,
            rhs: 0.0,
        });
    }
    m.rows.push(Row {
        name: "pconserve8_sink".into(),
        family: Family::Pconserve8,
        terms: sink.into_iter().map(|i| (i, 1.0)).collect(),
        sense: Sense::Eq,
        rhs: 1.0,
    });
    Ok(m)
}

// ---------------------------------------------------------------------------
// Assignment encoding and checking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowViolation {
    pub row: String,
    pub family: Option<Family>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub violations: Vec<RowViolation>,
    pub objective: f64,
}

const TOL: f64 = 1e-6;

/// Residual check of every row, bound and integrality mark.
pub fn check_solution(m: &MilpInstance, assignment: &[f64]) -> CheckReport {
    assert_eq!(assignment.len(), m.vars.len(), "assignment must cover every variable");
    let mut violations = Vec::new();
    for (v, &x) in m.vars.iter().zip(assignment) {
        let ok = match v.kind {
            VarKind::Binary => x == 0.0 || x == 1.0,
            VarKind::Continuous { lo, hi } => x >= lo - TOL && x <= hi + TOL,
        };
        if !ok {
            violations.push(RowViolation { row: format!("bound {}", v.name), family: None, lhs: x, rhs: f64::NAN });
        }
    }
    for r in &m.rows {
        let lhs: f64 = r.terms.iter().map(|&(i, c)| c * assignment[i]).sum();
        let bad = match r.sense {
            Sense::Le => lhs > r.rhs + TOL,
            Sense::Eq => (lhs - r.rhs).abs() > TOL,
        };
        if bad {
            violations.push(RowViolation { row: r.name.clone(), family: Some(r.family), lhs, rhs: r.rhs });
        }
    }
    let objective = m.objective.iter().map(|&(i, c)| c * assignment[i]).sum();
    CheckReport { violations, objective }
}

/// Assignment describing a loading under a plan.  Credit and waste follow
/// the loader's own recursion; a second whose entries exceed the available
/// credit is left unbalanced so that its capacity row shows the excess.
pub fn encode_assignment(m: &MilpInstance, inst: &Instance, traj: &TrajectorySet, plan: &SignalPlan) -> Result<Vec<f64>> {
    let sc = &inst.scenario;
    let net = &sc.network;
    let h = inst.horizon();
    let mut a = vec![0.0; m.vars.len()];
    let mut entries_at: HashMap<(usize, u32), usize> = HashMap::new();
    for (v, tr) in traj.vehicles.iter().enumerate() {
        let path = &sc.vehicles[v];
        if tr.vid != path.vid || tr.entries.len() != path.links.len() {
            return Err(Error::Encoding(format!("trajectory {} does not follow its path", tr.vid)));
        }
        for (k, &t) in tr.entries.iter().enumerate() {
            let &i = m.reg.x.get(&(v, k, t)).ok_or_else(|| Error::Encoding(format!("vehicle {} enters link {k} at {t} outside the model window", tr.vid)))?;
            a[i] = 1.0;
            *entries_at.entry((path.links[k].0, t)).or_insert(0) += 1;
            let ready = if k == 0 { path.t0 } else { tr.entries[k - 1] + net.link(path.links[k - 1]).fftt };
            for s in ready..t {
                let &i = m.reg.w.get(&(v, k, s)).ok_or_else(|| Error::Encoding(format!("vehicle {} waits at {s} outside the model window", tr.vid)))?;
                a[i] = 1.0;
            }
        }
    }
    for arc in &plan.arcs {
        let &i = m.reg.y.get(arc).ok_or_else(|| Error::Encoding(format!("plan arc at {} is not in the model", arc.tau)))?;
        a[i] = 1.0;
    }
    let gamma = plan.gamma(&inst.phases);
    let ctrl: HashMap<usize, usize> = inst.phases.mapping.links.iter().enumerate().map(|(k, l)| (l.0, k)).collect();
    for (l, link) in net.links.iter().enumerate() {
        if !m.reg.cr.contains_key(&(l, 0)) {
            continue;
        }
        let mut credit = CREDIT_CAP;
        for t in 0..h {
            let rate = ctrl.get(&l).map_or(1.0, |&k| gamma.get(k, t)) * link.sat_rate;
            let raw = credit + rate - *entries_at.get(&(l, t)).unwrap_or(&0) as f64;
            let (cr, wa) = if raw < 0.0 { (0.0, 0.0) } else { (raw.min(CREDIT_CAP), (raw - CREDIT_CAP).max(0.0)) };
            a[m.reg.cr[&(l, t)]] = cr;
            a[m.reg.wa[&(l, t)]] = wa;
            credit = cr;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loader::standard_dnl;

    fn instance(vehicles: &str, horizon: u32) -> Instance {
        let net = format!(
            r#"{{"horizon": {horizon}, "nodes": [1,2,3],
               "links": [{{"from":1,"to":2,"fftt":2,"sat_rate_vph":1800,"storage":"unbounded","control":{{"intersection":"A"}}}},
                         {{"from":2,"to":3,"fftt":3,"sat_rate_vph":1800,"storage":"unbounded"}}]}}"#
        );
        let ph = r#"{"intersections": [{"id": "A", "phases": [
            {"id": 1, "gmin": 2, "gmax": 8, "yellow": 1, "allred": 1, "serves": [{"from":1,"to":2}]},
            {"id": 2, "gmin": 2, "gmax": 8, "yellow": 1, "allred": 1, "serves": []}]}]}"#;
        Instance::from_docs(&net, vehicles, ph).unwrap()
    }

    #[test]
    fn hand_counted_conservation_rows() {
        let inst = instance(r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]}]}"#, 10);
        let m = export_milp(&inst, &ExportOptions::default()).unwrap();
        // origin node over t = 0..=5, middle node over t = 2..=7, destination row
        assert_eq!(m.rows_in(Family::Vconserve7), 6 + 6 + 1);
    }

    #[test]
    fn no_vehicles_leaves_only_the_plan() {
        let inst = instance(r#"{"vehicles":[]}"#, 10);
        let m = export_milp(&inst, &ExportOptions::default()).unwrap();
        assert!(m.rows.iter().all(|r| r.family == Family::Pconserve8));
        assert!(m.vars.iter().all(|v| v.name.starts_with("y_")));
        assert!(!m.rows.is_empty());
    }

    #[test]
    fn encoded_loading_satisfies_every_row() {
        let inst = instance(
            r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]},{"vid":2,"t0":0,"nodes":[1,2,3]},{"vid":3,"t0":3,"nodes":[1,2,3]}]}"#,
            24,
        );
        let m = export_milp(&inst, &ExportOptions::default()).unwrap();
        let best = brute_force_optimum(&inst, &Limits::default(), ClearancePlacement::AfterGreen).unwrap();
        let (traj, moe) = standard_dnl(&inst.scenario, &inst.aux, &inst.phases, &best.plan).unwrap();
        let a = encode_assignment(&m, &inst, &traj, &best.plan).unwrap();
        let report = check_solution(&m, &a);
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.objective, moe.objective as f64);
        assert_eq!(moe.objective, best.objective);
    }

    #[test]
    fn zero_assignment_breaks_origins() {
        let inst = instance(r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]},{"vid":2,"t0":1,"nodes":[1,2,3]}]}"#, 12);
        let m = export_milp(&inst, &ExportOptions::default()).unwrap();
        let report = check_solution(&m, &vec![0.0; m.vars.len()]);
        for name in ["vconserve7_v1_n1_t0", "vconserve7_v2_n1_t1"] {
            assert!(report.violations.iter().any(|v| v.row == name), "{name}");
        }
    }

    #[test]
    fn lp_text_is_deterministic() {
        let v = r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]}]}"#;
        let a = export_milp(&instance(v, 12), &ExportOptions::default()).unwrap().to_lp();
        let b = export_milp(&instance(v, 12), &ExportOptions::default()).unwrap().to_lp();
        assert_eq!(a, b);
        assert!(a.starts_with("\\ "));
        assert!(a.contains("Binaries"));
    }

    #[test]
    fn oracle_finds_free_flow_for_one_vehicle() {
        let inst = instance(r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]}]}"#, 12);
        let r = brute_force_optimum(&inst, &Limits::default(), ClearancePlacement::AfterGreen).unwrap();
        assert_eq!(r.moe.total_delay, 0);
        assert_eq!(r.objective, 1);
    }

    #[test]
    fn limits_are_enforced() {
        let inst = instance(r#"{"vehicles":[{"vid":1,"t0":0,"nodes":[1,2,3]}]}"#, 12);
        let tight = Limits { max_horizon: 10, ..Limits::default() };
        assert!(matches!(
            brute_force_optimum(&inst, &tight, ClearancePlacement::AfterGreen),
            Err(Error::LimitsExceeded(_))
        ));
    }
}
