//! Lagrangian decomposition driver: vehicle and signal subproblems, lower
//! and upper bounds, and the subgradient multiplier update.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::loader::{compute_moe, customized_dnl, validate_feasible, CustomMode, Gate, Loader, MoeReport, TrajectorySet, L11};
use crate::network::LinkId;
use crate::ptgraph::{arcs_from, shortest_plan, ClearancePlacement, SearchOptions, SignalPlan};

/// Prices `λ(link, t) >= 0` on controlled links, addressed by mapping
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierField {
    horizon: u32,
    links: usize,
    values: Vec<f64>,
}

impl MultiplierField {
    pub fn zeros(links: usize, horizon: u32) -> Self {
        Self { horizon, links, values: vec![0.0; links * horizon as usize] }
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn links(&self) -> usize {
        self.links
    }

    pub fn get(&self, k: usize, t: u32) -> f64 {
        if t >= self.horizon {
            0.0
        } else {
            self.values[k * self.horizon as usize + t as usize]
        }
    }

    pub fn set(&mut self, k: usize, t: u32, v: f64) {
        self.values[k * self.horizon as usize + t as usize] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRule {
    /// `λ + max(0, θ∇)`: prices never fall.
    Monotone,
    /// `max(0, λ + θ∇)`.
    #[default]
    Projected,
}

/// Step size of iteration `n`.
pub fn step_size(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

/// Controlled-link entries under the relaxed loading minus the capacity the
/// plan offers, per link and second.
pub fn subgradient(custom: &TrajectorySet, plan: &SignalPlan, inst: &Instance) -> MultiplierField {
    let net = &inst.scenario.network;
    let gamma = plan.gamma(&inst.phases);
    let links = &inst.phases.mapping.links;
    let mut g = MultiplierField::zeros(links.len(), plan.horizon);
    for (k, &l) in links.iter().enumerate() {
        let sr = net.link(l).sat_rate;
        for t in 0..plan.horizon {
            g.set(k, t, -gamma.get(k, t) * sr);
        }
    }
    for v in &custom.vehicles {
        for (i, &l) in v.links.iter().enumerate() {
            if let Some(k) = inst.phases.mapping.position(l) {
                let t = v.entries[i];
                if t < plan.horizon {
                    g.set(k, t, g.get(k, t) + 1.0);
                }
            }
        }
    }
    g
}

pub fn update_multipliers(lam: &MultiplierField, grad: &MultiplierField, n: usize, rule: UpdateRule) -> MultiplierField {
    assert_eq!((lam.links, lam.horizon), (grad.links, grad.horizon), "multiplier shapes differ");
    let theta = step_size(n);
    let values = lam
        .values
        .iter()
        .zip(&grad.values)
        .map(|(&l, &g)| match rule {
            UpdateRule::Monotone => l + (theta * g).max(0.0),
            UpdateRule::Projected => (l + theta * g).max(0.0),
        })
        .collect();
    MultiplierField { horizon: lam.horizon, links: lam.links, values }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub max_iter: usize,
    pub gap_tol: f64,
    pub rule: UpdateRule,
    pub workers: usize,
    pub custom_mode: CustomMode,
    pub search: SearchOptions,
    /// Re-planning rounds in the upper-bound step; 0 loads the subproblem
    /// plan only.
    pub repair_rounds: usize,
    /// Loadings spent polishing each new incumbent; 0 disables.
    pub polish_budget: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            gap_tol: 0.01,
            rule: UpdateRule::default(),
            workers: 1,
            custom_mode: CustomMode::default(),
            search: SearchOptions::default(),
            repair_rounds: 4,
            polish_budget: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskTimes {
    pub customized_ms: f64,
    pub plan_ms: f64,
    pub update_ms: f64,
    pub standard_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub l11: f64,
    pub l12: f64,
    pub lb: f64,
    /// `f64::INFINITY` when the loading under this plan was infeasible.
    pub ub: f64,
    pub best_ub: f64,
    pub gap: f64,
    pub theta: f64,
    pub transitions: usize,
    pub times: TaskTimes,
}

impl IterationRecord {
    /// Record with timings cleared, for comparing runs.
    pub fn without_times(&self) -> Self {
        Self { times: TaskTimes { customized_ms: 0.0, plan_ms: 0.0, update_ms: 0.0, standard_ms: 0.0 }, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct Incumbent {
    pub plan: SignalPlan,
    pub trajectories: TrajectorySet,
    pub moe: MoeReport,
    pub iteration: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub best: Option<Incumbent>,
    pub history: Vec<IterationRecord>,
    pub multipliers: MultiplierField,
    /// Lower bound of the zero-price iteration.
    pub certified_lb: f64,
    pub converged: bool,
}

impl SolveOutcome {
    pub fn best_ub(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |r| r.best_ub)
    }

    pub fn history_csv(&self) -> String {
        let mut out = String::from("n,L11,L12,LB,UB,best_UB,gap,theta,transitions,ms_customized,ms_plan,ms_update,ms_standard\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
                r.n,
                r.l11,
                r.l12,
                r.lb,
                r.ub,
                r.best_ub,
                r.gap,
                r.theta,
                r.transitions,
                r.times.customized_ms,
                r.times.plan_ms,
                r.times.update_ms,
                r.times.standard_ms
            );
        }
        out
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Outcome of loading a plan: the feasible loading if there is one, and
/// the seconds vehicles stood queued at stop lines.
struct Loaded {
    result: Option<(TrajectorySet, MoeReport)>,
    waits: Vec<(LinkId, u32, u32)>,
    /// (vehicles not delivered, objective or delay lower bound); smaller is better
    score: (usize, u64),
}

fn load_plan(inst: &Instance, plan: &SignalPlan) -> Loaded {
    let sc = &inst.scenario;
    let gamma = plan.gamma(&inst.phases);
    let loader = Loader::new(sc, &inst.aux);
    let mut st = loader.start(None);
    while !st.all_placed() && st.time() <= loader.horizon() {
        loader.step(&mut st, Gate::Plan(&gamma), None);
    }
    let waits = loader.waits(&st);
    let stranded = loader.doomed(&st).len();
    let mut score = (stranded.max(1), loader.delay_bound(&st));
    let result = match loader.finish(&st) {
        Ok(traj) => {
            let violations = validate_feasible(&traj, &gamma, sc, &inst.aux);
            if violations.is_empty() {
                let moe = compute_moe(&traj, plan, &inst.phases, sc, &inst.aux);
                score = (0, moe.objective);
                Some((traj, moe))
            } else {
                warn!("loading violates {} constraint(s); upper bound discarded", violations.len());
                None
            }
        }
        Err(e) => {
            debug!("{e}");
            None
        }
    };
    Loaded { result, waits, score }
}

/// A plan with its loading, or the plan that came closest to a feasible one.
pub enum Primal {
    Feasible(SignalPlan, TrajectorySet, MoeReport),
    Stranded(SignalPlan),
}

/// Upper-bound step: loads the subproblem plan, then re-plans a few times
/// with every queued vehicle-second at a stop line added to the prices.
pub fn primal_plan(inst: &Instance, lam: &MultiplierField, plan: &SignalPlan, config: &SolveConfig) -> Primal {
    let cfg = &inst.phases;
    let first = load_plan(inst, plan);
    let mut waits = first.waits;
    let mut best = (first.score, plan.clone(), first.result);
    let mut prices = lam.clone();
    for _ in 0..config.repair_rounds {
        let mut queued = false;
        for &(l, from, to) in &waits {
            if let Some(k) = cfg.mapping.position(l) {
                for t in from..to.min(prices.horizon) {
                    prices.set(k, t, prices.get(k, t) + 1.0);
                    queued = true;
                }
            }
        }
        if !queued {
            break;
        }
        let Ok((next, _)) = shortest_plan(cfg, &inst.scenario.network, &prices, config.search) else {
            break;
        };
        let loaded = load_plan(inst, &next);
        if loaded.score < best.0 {
            best = (loaded.score, next, loaded.result);
        }
        waits = loaded.waits;
    }
    match best {
        (_, plan, Some((traj, moe))) => Primal::Feasible(plan, traj, moe),
        (_, plan, None) => Primal::Stranded(plan),
    }
}

/// Rebuilds a plan from its state sequence and green durations; the last
/// entry rests to the horizon.  `None` if some arc is not in the graph.
fn plan_from_steps(inst: &Instance, steps: &[(usize, u32)], placement: ClearancePlacement) -> Option<SignalPlan> {
    let cfg = &inst.phases;
    let horizon = inst.horizon();
    if !cfg.graph.initial.contains(&steps.first()?.0) {
        return None;
    }
    let mut tau = 0;
    let mut arcs = Vec::with_capacity(steps.len());
    let mut buf = Vec::new();
    for (i, &(state, green)) in steps.iter().enumerate() {
        buf.clear();
        arcs_from(cfg, state, tau, horizon, placement, &mut buf);
        let next = steps.get(i + 1).map(|x| x.0);
        let arc = *buf.iter().find(|a| a.next.map(|n| n.0) == next && (next.is_none() || a.green == green))?;
        tau = arc.h();
        arcs.push(arc);
    }
    Some(SignalPlan { horizon, arcs })
}

/// Neighbours of a step sequence: green changes, boundary shifts, dropped,
/// inserted and replaced steps.
fn neighbours(inst: &Instance, steps: &[(usize, u32)]) -> Vec<Vec<(usize, u32)>> {
    let graph = &inst.phases.graph;
    let n = steps.len();
    let mut out = Vec::new();
    for i in 0..n.saturating_sub(1) {
        for d in [-2i64, -1, 1, 2] {
            let g = steps[i].1 as i64 + d;
            if g < 0 {
                continue;
            }
            let mut s = steps.to_vec();
            s[i].1 = g as u32;
            out.push(s.clone());
            if i + 2 < n {
                let g2 = s[i + 1].1 as i64 - d;
                if g2 >= 0 {
                    s[i + 1].1 = g2 as u32;
                    out.push(s);
                }
            }
        }
    }
    for i in 0..n {
        if n > 1 {
            let mut s = steps.to_vec();
            s.remove(i);
            out.push(s);
        }
    }
    for i in 0..n {
        let prev = (i > 0).then(|| steps[i - 1].0);
        let candidates: Vec<usize> = match prev {
            Some(p) => graph.succ[p].clone(),
            None => graph.initial.clone(),
        };
        for &c in &candidates {
            let green = graph.states[c].min_green;
            // replace step i
            if c != steps[i].0 {
                let mut s = steps.to_vec();
                s[i] = (c, green.max(steps[i].1.min(graph.states[c].max_green)));
                out.push(s);
            }
            // insert before step i
            let mut s = steps.to_vec();
            s.insert(i, (c, green));
            out.push(s);
        }
    }
    if let Some(&(last, _)) = steps.last() {
        for &c in &graph.succ[last] {
            let mut s = steps.to_vec();
            let rest = graph.states[last].min_green;
            s.last_mut().expect("non-empty").1 = rest;
            s.push((c, 0));
            out.push(s);
        }
    }
    out
}

/// First-improvement local search scored by loading each neighbour: fewer
/// stranded vehicles first, then lower objective.  Stops at a local optimum
/// or after `budget` loadings; `None` if no feasible plan was reached.
pub fn polish_plan(inst: &Instance, start: &SignalPlan, placement: ClearancePlacement, budget: usize) -> Option<(SignalPlan, TrajectorySet, MoeReport)> {
    let first = load_plan(inst, start);
    let mut best = (first.score, start.clone(), first.result);
    let mut steps: Vec<(usize, u32)> = start.arcs.iter().map(|a| (a.state, a.green)).collect();
    let mut spent = 0;
    'outer: while spent < budget {
        for cand in neighbours(inst, &steps) {
            let Some(plan) = plan_from_steps(inst, &cand, placement) else { continue };
            spent += 1;
            let loaded = load_plan(inst, &plan);
            if loaded.score < best.0 {
                steps = plan.arcs.iter().map(|a| (a.state, a.green)).collect();
                best = (loaded.score, plan, loaded.result);
                continue 'outer;
            }
            if spent >= budget {
                break;
            }
        }
        break;
    }
    let (_, plan, result) = best;
    result.map(|(traj, moe)| (plan, traj, moe))
}

/// Runs the decomposition loop on a pool of `config.workers` threads, never
/// more than the machine has cores.  The result does not depend on the
/// thread count.
pub fn solve(inst: &Instance, config: &SolveConfig) -> Result<SolveOutcome> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.clamp(1, cores))
        .build()
        .map_err(|e| Error::LimitsExceeded(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| solve_in_pool(inst, config))
}

fn solve_in_pool(inst: &Instance, config: &SolveConfig) -> Result<SolveOutcome> {
    let sc = &inst.scenario;
    let cfg = &inst.phases;
    let horizon = inst.horizon();
    let mut lam = MultiplierField::zeros(cfg.mapping.links.len(), horizon);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut best: Option<Incumbent> = None;
    let mut best_ub = f64::INFINITY;
    let mut max_lb = f64::NEG_INFINITY;
    let mut certified_lb = f64::NEG_INFINITY;
    let mut converged = false;
    // plans already used as polishing starts
    let mut polished: HashSet<Vec<(usize, u32)>> = HashSet::new();

    for n in 0..config.max_iter {
        let ((custom, t_custom), (planned, t_plan)) = rayon::join(
            || {
                let t = Instant::now();
                (customized_dnl(sc, &inst.aux, &lam, config.custom_mode), ms_since(t))
            },
            || {
                let t = Instant::now();
                (shortest_plan(cfg, &sc.network, &lam, config.search), ms_since(t))
            },
        );
        let (custom_traj, l11): (TrajectorySet, L11) = custom?;
        let (plan, l12) = planned?;
        let lb = l11.delay_scale + l12;
        if n == 0 {
            certified_lb = lb;
        }
        max_lb = max_lb.max(lb);

        let theta = step_size(n);
        let ((primal, t_standard), (next_lam, t_update)) = rayon::join(
            || {
                let t = Instant::now();
                (primal_plan(inst, &lam, &plan, config), ms_since(t))
            },
            || {
                let t = Instant::now();
                let grad = subgradient(&custom_traj, &plan, inst);
                (update_multipliers(&lam, &grad, n, config.rule), ms_since(t))
            },
        );

        let mut ub = f64::INFINITY;
        let (seed, found) = match primal {
            Primal::Feasible(plan, traj, moe) => (plan.clone(), Some((plan, traj, moe))),
            Primal::Stranded(plan) => (plan, None),
        };
        let key: Vec<(usize, u32)> = seed.arcs.iter().map(|a| (a.state, a.green)).collect();
        let found = if config.polish_budget > 0 && polished.insert(key) {
            polish_plan(inst, &seed, config.search.clearance, config.polish_budget).or(found)
        } else {
            found
        };
        if let Some((plan, traj, moe)) = found {
            ub = moe.objective as f64;
            if ub < best_ub {
                best_ub = ub;
                best = Some(Incumbent { plan, trajectories: traj, moe, iteration: n });
            }
        }

        let gap = best_ub - max_lb;
        history.push(IterationRecord {
            n,
            l11: l11.delay_scale,
            l12,
            lb,
            ub,
            best_ub,
            gap,
            theta,
            transitions: plan.transitions(),
            times: TaskTimes { customized_ms: t_custom, plan_ms: t_plan, update_ms: t_update, standard_ms: t_standard },
        });
        debug!("iteration {n}: LB {lb:.3} UB {ub} best {best_ub} gap {gap:.3}");
        lam = next_lam;
        // a negative gap only shows the approximate bound overshooting
        if best_ub.is_finite() && (0.0..=config.gap_tol * best_ub.abs().max(1.0)).contains(&gap) {
            converged = true;
            break;
        }
    }
    info!(
        "solve finished after {} iteration(s): best UB {best_ub}, max LB {max_lb:.3}{}",
        history.len(),
        if converged { " (gap closed)" } else { "" }
    );
    Ok(SolveOutcome { best, history, multipliers: lam, certified_lb, converged })
}
