//! Time-space diagrams: one per distinct vehicle route, with signal bands
//! drawn at the entry of every controlled link on the route.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::instance::{pretty, write, Instance};
use crate::loader::{MoeReport, TrajectorySet};
use crate::network::{LinkId, NodeId};
use crate::ptgraph::{SignalPlan, Window};

/// What a vehicle at a controlled link's entry sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

impl Light {
    pub fn name(self) -> &'static str {
        match self {
            Light::Green => "green",
            Light::Yellow => "yellow",
            Light::Red => "red",
        }
    }

    fn colour(self) -> &'static str {
        match self {
            Light::Green => "#2e9d3a",
            Light::Yellow => "#e8b100",
            Light::Red => "#c8312b",
        }
    }
}

/// Indication on controlled link `pos` (its mapping row) at second `t`.
/// A link kept open across a transition stays green.
pub fn light(inst: &Instance, plan: &SignalPlan, pos: usize, t: u32) -> Light {
    let Some(arc) = plan.arc_at(t) else { return Light::Red };
    let m = inst.phases.mapping.row(pos);
    let serves = m[arc.phase] > 0.0;
    let carried = serves && arc.next_phase().is_some_and(|q| m[q] > 0.0);
    match arc.window(t) {
        Window::Green if serves => Light::Green,
        Window::Yellow | Window::AllRed if carried => Light::Green,
        Window::Yellow if serves => Light::Yellow,
        _ => Light::Red,
    }
}

/// A route shared by at least one vehicle, with positions measured in
/// free-flow seconds from its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corridor {
    pub nodes: Vec<NodeId>,
    pub links: Vec<LinkId>,
    /// `positions[k]` is where link `k` starts; one extra entry for the end.
    pub positions: Vec<u32>,
    /// Indices into the scenario's vehicle list.
    pub vehicles: Vec<usize>,
}

impl Corridor {
    pub fn name(&self) -> String {
        format!("{}-{}", self.nodes[0], self.nodes[self.nodes.len() - 1])
    }
}

/// Distinct routes in order of first use.
pub fn corridors(inst: &Instance) -> Vec<Corridor> {
    let net = &inst.scenario.network;
    let mut out: Vec<Corridor> = Vec::new();
    for (v, path) in inst.scenario.vehicles.iter().enumerate() {
        if let Some(c) = out.iter_mut().find(|c| c.nodes == path.nodes) {
            c.vehicles.push(v);
            continue;
        }
        let mut positions = vec![0];
        for &l in &path.links {
            positions.push(positions.last().unwrap() + net.link(l).fftt);
        }
        out.push(Corridor { nodes: path.nodes.clone(), links: path.links.clone(), positions, vehicles: vec![v] });
    }
    out
}

/// Polyline `(t, position)` of vehicle `v` along its corridor.
fn polyline(inst: &Instance, c: &Corridor, traj: &TrajectorySet, v: usize) -> Vec<(u32, u32)> {
    let tr = &traj.vehicles[v];
    let net = &inst.scenario.network;
    let mut pts = vec![(tr.t0, 0)];
    for (k, &l) in tr.links.iter().enumerate() {
        pts.push((tr.entries[k], c.positions[k]));
        pts.push(((tr.entries[k] + net.link(l).fftt).min(tr.exit(k)), c.positions[k + 1]));
    }
    pts.push((tr.arrival, *c.positions.last().unwrap()));
    pts.dedup();
    pts
}

/// Runs of constant indication `(from, to, light)` over `[0, H)`.
fn bands(inst: &Instance, plan: &SignalPlan, pos: usize) -> Vec<(u32, u32, Light)> {
    let mut out: Vec<(u32, u32, Light)> = Vec::new();
    for t in 0..plan.horizon {
        let l = light(inst, plan, pos, t);
        match out.last_mut() {
            Some(run) if run.2 == l => run.1 = t + 1,
            _ => out.push((t, t + 1, l)),
        }
    }
    out
}

/// Controlled links on the corridor as `(index on route, mapping row)`.
fn signals(inst: &Instance, c: &Corridor) -> Vec<(usize, usize)> {
    c.links.iter().enumerate().filter_map(|(k, &l)| inst.phases.mapping.position(l).map(|p| (k, p))).collect()
}

/// Raw diagram data: vehicle polyline points and signal runs.
pub fn timespace_csv(inst: &Instance, plan: &SignalPlan, traj: &TrajectorySet, c: &Corridor) -> String {
    let net = &inst.scenario.network;
    let mut out = String::from("kind,id,t_start,t_end,position,state\n");
    for (k, pos) in signals(inst, c) {
        let link = net.link(c.links[k]);
        for (a, b, l) in bands(inst, plan, pos) {
            let _ = writeln!(out, "signal,{}-{},{a},{b},{},{}", link.from, link.to, c.positions[k], l.name());
        }
    }
    for &v in &c.vehicles {
        let vid = traj.vehicles[v].vid;
        for (t, x) in polyline(inst, c, traj, v) {
            let _ = writeln!(out, "vehicle,{vid},{t},{t},{x},");
        }
    }
    out
}

const PX_T: u32 = 8;
const PX_X: u32 = 14;
const MARGIN: u32 = 40;

pub fn timespace_svg(inst: &Instance, plan: &SignalPlan, traj: &TrajectorySet, c: &Corridor) -> String {
    let net = &inst.scenario.network;
    let len = *c.positions.last().unwrap();
    let w = 2 * MARGIN + plan.horizon * PX_T;
    let h = 2 * MARGIN + len * PX_X;
    let x = |t: u32| MARGIN + t * PX_T;
    let y = |p: u32| MARGIN + (len - p) * PX_X;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="16">route {}</text>"#, c.name());
    let _ = writeln!(
        s,
        r#"<path d="M{} {} V{} H{}" stroke="black" fill="none"/>"#,
        x(0),
        y(len),
        y(0),
        x(plan.horizon)
    );
    for t in (0..=plan.horizon).step_by(10) {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#, x(t), y(0) + 14);
    }
    for (k, &p) in c.positions.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4, y(p) + 3, c.nodes[k]);
    }
    for (k, pos) in signals(inst, c) {
        let link = net.link(c.links[k]);
        for (a, b, l) in bands(inst, plan, pos) {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{}" height="4" fill="{}"><title>{}-{} {a}..{b} {}</title></rect>"#,
                x(a),
                y(c.positions[k]) - 2,
                (b - a) * PX_T,
                l.colour(),
                link.from,
                link.to,
                l.name()
            );
        }
    }
    for &v in &c.vehicles {
        let pts: Vec<String> = polyline(inst, c, traj, v).iter().map(|&(t, p)| format!("{},{}", x(t), y(p))).collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" stroke="#1f4e9c" fill="none"><title>v{}</title></polyline>"##,
            pts.join(" "),
            traj.vehicles[v].vid
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `plan.json`, `trajectories.csv`, `moe.json` and one
/// `timespace-<o>-<d>.{svg,csv}` pair per route.  Returns the written paths.
pub fn write_reports(dir: &Path, inst: &Instance, plan: &SignalPlan, traj: &TrajectorySet, moe: &MoeReport) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (dir.join("plan.json"), pretty(&plan.to_doc(&inst.phases))),
        (dir.join("trajectories.csv"), traj.to_csv(&inst.scenario)),
        (dir.join("moe.json"), pretty(moe)),
    ];
    for c in corridors(inst) {
        files.push((dir.join(format!("timespace-{}.svg", c.name())), timespace_svg(inst, plan, traj, &c)));
        files.push((dir.join(format!("timespace-{}.csv", c.name())), timespace_csv(inst, plan, traj, &c)));
    }
    for (path, text) in &files {
        write(path, text)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;
    use crate::lagrangian::{solve, SolveConfig};

    fn solved(name: &str) -> (Instance, SignalPlan, TrajectorySet) {
        let inst = fixture(name).unwrap();
        let best = solve(&inst, &SolveConfig { max_iter: 20, ..Default::default() }).unwrap().best.unwrap();
        (inst, best.plan, best.trajectories)
    }

    #[test]
    fn one_corridor_per_route() {
        let (inst, ..) = solved("exp1-s1");
        let cs = corridors(&inst);
        assert_eq!(cs.len(), 6);
        assert_eq!(cs[0].name(), "1-6");
        assert_eq!(cs[0].vehicles.len(), 10);
        assert_eq!(cs[0].positions, vec![0, 4, 6, 18, 20, 24]);
    }

    #[test]
    fn polylines_are_monotone() {
        let (inst, plan, traj) = solved("exp1-s1");
        for c in corridors(&inst) {
            for &v in &c.vehicles {
                let pts = polyline(&inst, &c, &traj, v);
                assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1), "{pts:?}");
            }
            let svg = timespace_svg(&inst, &plan, &traj, &c);
            assert_eq!(svg.matches("<polyline").count(), c.vehicles.len());
        }
    }

    #[test]
    fn bands_cover_the_horizon() {
        let (inst, plan, _) = solved("exp1-s2");
        for pos in 0..inst.phases.mapping.links.len() {
            let b = bands(&inst, &plan, pos);
            assert_eq!(b.first().unwrap().0, 0);
            assert_eq!(b.last().unwrap().1, inst.horizon());
            assert!(b.windows(2).all(|w| w[0].1 == w[1].0 && w[0].2 != w[1].2));
        }
    }
}
