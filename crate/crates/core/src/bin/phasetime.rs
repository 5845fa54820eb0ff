use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use phasetime::config::{Command, PolicyMode, RunConfig};
use phasetime::exact::{brute_force_optimum, check_solution, encode_assignment, export_milp, ExportOptions};
use phasetime::instance::pretty;
use phasetime::lagrangian::{solve, IterationRecord, SolveConfig};
use phasetime::loader::{standard_dnl, validate_feasible, CustomMode};
use phasetime::phases::transition_count;
use phasetime::ptgraph::{ClearancePlacement, GmaxFilter, PlanDoc, SignalPlan};
use phasetime::report::write_reports;
use phasetime::{Error, Instance};

#[derive(Parser)]
#[command(name = "phasetime", version, args_conflicts_with_subcommands = true, about = "Network signal timing on a generalized phase-time network")]
struct Cli {
    /// Re-run exactly the settings of an earlier `resolved_config.json`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a bundled scenario (or `random` with --seed) as a directory.
    Scaffold {
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lagrangian decomposition solve.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: Solver,
    },
    /// Exhaustive optimum for tiny instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_vehicles: Option<usize>,
        #[arg(long)]
        max_horizon: Option<u32>,
        #[arg(long)]
        max_phases: Option<usize>,
    },
    /// Write the full MILP as LP text with row and column counts.
    ExportMilp {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2_000_000)]
        max_cols: usize,
    },
    /// Check a scenario, and optionally a plan against it.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Load a plan and report measures of effectiveness and diagrams.
    Moe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Time solves across worker counts.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: Solver,
        #[arg(long = "worker-counts", value_delimiter = ',', default_value = "1,2,4,8")]
        counts: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    policy: Option<Policy>,
    #[arg(long)]
    rho_y: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Clearance::AfterGreen)]
    clearance: Clearance,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Solver {
    #[arg(long, default_value_t = 200)]
    iters: usize,
    #[arg(long, default_value_t = 0.01)]
    gap_tol: f64,
    #[arg(long, value_enum, default_value_t = Rule::Projected)]
    rule: Rule,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Custom::Greedy)]
    custom: Custom,
    /// Apply local maximum greens in the plan search.
    #[arg(long)]
    local_gmax: bool,
    #[arg(long, default_value_t = 4)]
    repair_rounds: usize,
    #[arg(long, default_value_t = 2000)]
    polish_budget: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Full,
    Semi,
    Groups,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Monotone,
    Projected,
}

#[derive(Clone, Copy, ValueEnum)]
enum Custom {
    Greedy,
    PriceResponsive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Clearance {
    AfterGreen,
    WithinDelta,
}

impl Common {
    fn apply(self, c: &mut RunConfig) {
        c.scenario = Some(self.scenario);
        c.policy = self.policy.map(|p| match p {
            Policy::Full => PolicyMode::Full,
            Policy::Semi => PolicyMode::Semi,
            Policy::Groups => PolicyMode::Groups,
        });
        c.rho_y = self.rho_y;
        c.delta = self.delta;
        c.solve.search.clearance = match self.clearance {
            Clearance::AfterGreen => ClearancePlacement::AfterGreen,
            Clearance::WithinDelta => ClearancePlacement::WithinDelta,
        };
        c.out = self.out;
    }
}

impl Solver {
    fn apply(self, s: &mut SolveConfig) {
        s.max_iter = self.iters;
        s.gap_tol = self.gap_tol;
        s.rule = match self.rule {
            Rule::Monotone => phasetime::lagrangian::UpdateRule::Monotone,
            Rule::Projected => phasetime::lagrangian::UpdateRule::Projected,
        };
        s.workers = self.workers;
        s.custom_mode = match self.custom {
            Custom::Greedy => CustomMode::Greedy,
            Custom::PriceResponsive => CustomMode::PriceResponsive,
        };
        s.search.gmax_local = if self.local_gmax { GmaxFilter::Enforce } else { GmaxFilter::Ignore };
        s.repair_rounds = self.repair_rounds;
        s.polish_budget = self.polish_budget;
    }
}

fn resolve(cmd: Cmd) -> RunConfig {
    let mut c = RunConfig::default();
    match cmd {
        Cmd::Scaffold { name, seed, out } => {
            c.command = Command::Scaffold;
            c.fixture = Some(name);
            c.seed = seed;
            c.out = out;
        }
        Cmd::Solve { common, solver } => {
            c.command = Command::Solve;
            common.apply(&mut c);
            solver.apply(&mut c.solve);
        }
        Cmd::Oracle { common, max_vehicles, max_horizon, max_phases } => {
            c.command = Command::Oracle;
            common.apply(&mut c);
            c.limits.max_vehicles = max_vehicles.unwrap_or(c.limits.max_vehicles);
            c.limits.max_horizon = max_horizon.unwrap_or(c.limits.max_horizon);
            c.limits.max_phases = max_phases.unwrap_or(c.limits.max_phases);
        }
        Cmd::ExportMilp { common, max_cols } => {
            c.command = Command::ExportMilp;
            common.apply(&mut c);
            c.max_cols = max_cols;
        }
        Cmd::Validate { common, plan } => {
            c.command = Command::Validate;
            common.apply(&mut c);
            c.plan = plan;
        }
        Cmd::Moe { common, plan } => {
            c.command = Command::Moe;
            common.apply(&mut c);
            c.plan = Some(plan);
        }
        Cmd::Bench { common, solver, counts } => {
            c.command = Command::Bench;
            common.apply(&mut c);
            solver.apply(&mut c.solve);
            c.bench_workers = counts;
        }
    }
    c
}

/// Why a run did not succeed, mapped onto the process exit code.
enum Failure {
    Invalid(String),
    Infeasible(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. }
            | Error::Scenario(_)
            | Error::Phases(_)
            | Error::PlanCoverage(_)
            | Error::ArcOutsideHorizon { .. }
            | Error::UnknownFixture(_) => Failure::Invalid(e.to_string()),
            Error::NoFeasiblePlan { .. } | Error::HorizonExhausted { .. } => Failure::Infeasible(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

type Run = std::result::Result<(), Failure>;

fn write(c: &RunConfig, name: &str, text: &str) -> Run {
    let path = c.out.join(name);
    std::fs::write(&path, text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn load_plan(c: &RunConfig, inst: &Instance) -> std::result::Result<SignalPlan, Failure> {
    let path = c.plan.as_ref().ok_or_else(|| Failure::Invalid("no plan given".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    let doc: PlanDoc = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(SignalPlan::from_doc(&doc, &inst.phases, c.solve.search.clearance)?)
}

fn run(c: &RunConfig) -> Run {
    std::fs::create_dir_all(&c.out).map_err(|e| Failure::Other(format!("{}: {e}", c.out.display())))?;
    c.write()?;
    match c.command {
        Command::Scaffold => {
            let inst = c.fixture_instance()?;
            inst.write_dir(&c.out)?;
            println!(
                "wrote {} with {} links, {} vehicles, {} generalized phases",
                c.out.display(),
                inst.scenario.network.links.len(),
                inst.scenario.vehicles.len(),
                inst.phases.set.len()
            );
            Ok(())
        }
        Command::Solve => {
            let inst = c.instance()?;
            let out = solve(&inst, &c.solve)?;
            write(c, "history.csv", &out.history_csv())?;
            let Some(best) = out.best.as_ref() else {
                return Err(Failure::Infeasible(format!(
                    "no feasible plan found in {} iteration(s); best lower bound {:.3}",
                    out.history.len(),
                    out.history.iter().map(|r| r.lb).fold(f64::NEG_INFINITY, f64::max)
                )));
            };
            write_reports(&c.out, &inst, &best.plan, &best.trajectories, &best.moe)?;
            let last = out.history.last().expect("at least one iteration");
            println!(
                "best objective {} (delay {}, {} transitions) at iteration {}; {} iteration(s), gap {:.3}{}",
                best.moe.objective,
                best.moe.total_delay,
                best.moe.transitions,
                best.iteration,
                out.history.len(),
                last.gap,
                if out.converged { ", converged" } else { "" }
            );
            Ok(())
        }
        Command::Oracle => {
            let inst = c.instance()?;
            let t = Instant::now();
            let r = brute_force_optimum(&inst, &c.limits, c.solve.search.clearance)?;
            write(c, "oracle.json", &pretty(&r.to_doc(&inst)))?;
            write_reports(&c.out, &inst, &r.plan, &r.trajectories, &r.moe)?;
            println!(
                "optimum {} (delay {}, {} transitions); {} nodes in {:.2}s",
                r.objective,
                r.moe.total_delay,
                r.moe.transitions,
                r.nodes,
                t.elapsed().as_secs_f64()
            );
            Ok(())
        }
        Command::ExportMilp => {
            let inst = c.instance()?;
            let m = export_milp(&inst, &ExportOptions { placement: c.solve.search.clearance, max_cols: c.max_cols })?;
            let counts = m.counts();
            write(c, "model.lp", &m.to_lp())?;
            write(c, "counts.json", &pretty(&counts))?;
            println!("{} rows, {} columns, {} nonzeros", counts.rows, counts.cols, counts.nonzeros);
            Ok(())
        }
        Command::Validate => {
            let inst = c.instance()?;
            let mut report = json!({
                "scenario": "ok",
                "nodes": inst.scenario.network.nodes.len(),
                "links": inst.scenario.network.links.len(),
                "vehicles": inst.scenario.vehicles.len(),
                "generalized_phases": inst.phases.set.len(),
                "policy": inst.phases.policy.name(),
                "transitions": transition_count(&inst.phases.set, &inst.phases.policy),
            });
            let mut failed = Vec::new();
            if c.plan.is_some() {
                let plan = load_plan(c, &inst)?;
                let (traj, moe) = standard_dnl(&inst.scenario, &inst.aux, &inst.phases, &plan)?;
                let violations = validate_feasible(&traj, &plan.gamma(&inst.phases), &inst.scenario, &inst.aux);
                failed.extend(violations.iter().map(|v| v.to_string()));
                let milp = export_milp(&inst, &ExportOptions { placement: c.solve.search.clearance, max_cols: c.max_cols })
                    .and_then(|m| Ok(check_solution(&m, &encode_assignment(&m, &inst, &traj, &plan)?)));
                let milp = match milp {
                    Ok(check) => {
                        failed.extend(check.violations.iter().map(|v| format!("row {}: {} vs {}", v.row, v.lhs, v.rhs)));
                        json!({ "violations": check.violations.len(), "objective": check.objective })
                    }
                    Err(e) => json!({ "skipped": e.to_string() }),
                };
                report["plan"] = json!({
                    "objective": moe.objective,
                    "violations": violations,
                    "milp": milp,
                });
            }
            write(c, "validation.json", &pretty(&report))?;
            if failed.is_empty() {
                println!("valid");
                Ok(())
            } else {
                Err(Failure::Invalid(failed.join("\n")))
            }
        }
        Command::Moe => {
            let inst = c.instance()?;
            let plan = load_plan(c, &inst)?;
            let (traj, moe) = standard_dnl(&inst.scenario, &inst.aux, &inst.phases, &plan)?;
            write_reports(&c.out, &inst, &plan, &traj, &moe)?;
            println!("objective {} (delay {}, {} transitions)", moe.objective, moe.total_delay, moe.transitions);
            Ok(())
        }
        Command::Bench => {
            let inst = c.instance()?;
            let mut csv = String::from("workers,iterations,total_ms,ms_per_iteration,identical\n");
            let mut reference: Option<Vec<IterationRecord>> = None;
            for &w in &c.bench_workers {
                let cfg = SolveConfig { workers: w, ..c.solve };
                let t = Instant::now();
                let out = solve(&inst, &cfg)?;
                let ms = t.elapsed().as_secs_f64() * 1e3;
                let hist: Vec<_> = out.history.iter().map(IterationRecord::without_times).collect();
                let same = reference.get_or_insert_with(|| hist.clone()) == &hist;
                let per = ms / out.history.len() as f64;
                info!("{w} worker(s): {per:.2} ms per iteration");
                println!("{w:>3} worker(s): {:>4} iterations, {per:>9.3} ms/iteration{}", out.history.len(), if same { "" } else { ", history differs" });
                csv.push_str(&format!("{w},{},{ms:.3},{per:.3},{same}\n", out.history.len()));
            }
            write(c, "bench.csv", &csv)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match (cli.config, cli.cmd) {
        (Some(path), _) => match RunConfig::load(&path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        (None, Some(cmd)) => resolve(cmd),
        (None, None) => {
            eprintln!("error: a subcommand or --config is required");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
