use std::path::Path;
use std::process::{Command, Output};

use phasetime::config::{Command as Cmd, RunConfig, RESOLVED_CONFIG_FILE};

fn phasetime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasetime")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scaffold(dir: &Path, name: &str, extra: &[&str]) {
    let mut args = vec!["scaffold", name, "--out", p(dir)];
    args.extend_from_slice(extra);
    let out = phasetime(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_reports_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("s2");
    scaffold(&sc, "exp1-s2", &[]);
    for f in ["network.json", "vehicles.json", "phases.json", RESOLVED_CONFIG_FILE] {
        assert!(sc.join(f).exists(), "{f}");
    }

    let out = tmp.path().join("run");
    let r = phasetime(&["solve", "--scenario", p(&sc), "--out", p(&out), "--iters", "30"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["history.csv", "plan.json", "moe.json", "trajectories.csv", "timespace-1-6.svg", "timespace-1-6.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let config = RunConfig::load(&out.join(RESOLVED_CONFIG_FILE)).unwrap();
    assert_eq!(config.command, Cmd::Solve);
    assert_eq!(config.solve.max_iter, 30);

    // replaying the resolved config gives the same history, timings aside
    let again = tmp.path().join("again");
    let mut replay = config.clone();
    replay.out = again.clone();
    let cfg_path = tmp.path().join("replay.json");
    std::fs::write(&cfg_path, serde_json::to_string(&replay).unwrap()).unwrap();
    let r = phasetime(&["--config", p(&cfg_path)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let strip = |path: &Path| -> Vec<String> {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .map(|l| l.split(',').take(9).collect::<Vec<_>>().join(","))
            .collect()
    };
    assert_eq!(strip(&out.join("history.csv")), strip(&again.join("history.csv")));
    assert_eq!(std::fs::read_to_string(out.join("plan.json")).unwrap(), std::fs::read_to_string(again.join("plan.json")).unwrap());

    // the solved plan validates and reloads
    let plan = out.join("plan.json");
    let v = tmp.path().join("validate");
    let r = phasetime(&["validate", "--scenario", p(&sc), "--plan", p(&plan), "--out", p(&v)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(v.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["plan"]["milp"]["violations"], 0);
    let m = tmp.path().join("moe");
    let r = phasetime(&["moe", "--scenario", p(&sc), "--plan", p(&plan), "--out", p(&m)]);
    assert_eq!(code(&r), 0);
    assert_eq!(std::fs::read_to_string(out.join("moe.json")).unwrap(), std::fs::read_to_string(m.join("moe.json")).unwrap());
}

#[test]
fn oracle_and_model_export() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("tiny");
    scaffold(&sc, "random", &["--seed", "3"]);
    let o = tmp.path().join("oracle");
    let r = phasetime(&["oracle", "--scenario", p(&sc), "--out", p(&o)]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(o.join("oracle.json").exists());
    let e = tmp.path().join("lp");
    let r = phasetime(&["export-milp", "--scenario", p(&sc), "--out", p(&e)]);
    assert_eq!(code(&r), 0);
    let lp = std::fs::read_to_string(e.join("model.lp")).unwrap();
    assert!(lp.contains("\nMinimize\n"));
    assert!(e.join("counts.json").exists());

    // the arterial is beyond the default enumeration limits
    let art = tmp.path().join("s1");
    scaffold(&art, "exp1-s1", &[]);
    let r = phasetime(&["oracle", "--scenario", p(&art), "--out", p(&tmp.path().join("o1"))]);
    assert_eq!(code(&r), 1);
}

#[test]
fn bench_reports_identical_histories() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("s2");
    scaffold(&sc, "exp1-s2", &[]);
    let b = tmp.path().join("bench");
    let r = phasetime(&["bench", "--scenario", p(&sc), "--out", p(&b), "--iters", "5", "--worker-counts", "1,2"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(b.join("bench.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{csv}");
}

#[test]
fn validation_failures_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("bad");
    scaffold(&sc, "exp1-s1", &[]);
    let net = sc.join("network.json");
    let text = std::fs::read_to_string(&net).unwrap().replacen("\"fftt\": 4", "\"fftt\": 0", 1);
    std::fs::write(&net, text).unwrap();
    let r = phasetime(&["validate", "--scenario", p(&sc), "--out", p(&tmp.path().join("v"))]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("fftt"));

    let r = phasetime(&["scaffold", "no-such-fixture", "--out", p(&tmp.path().join("x"))]);
    assert_eq!(code(&r), 2);

    // a plan that does not cover the horizon
    let good = tmp.path().join("good");
    scaffold(&good, "exp1-s1", &[]);
    let run = tmp.path().join("run");
    assert_eq!(code(&phasetime(&["solve", "--scenario", p(&good), "--out", p(&run)])), 0);
    let plan_path = run.join("plan.json");
    let mut plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    plan["arcs"].as_array_mut().unwrap().pop();
    std::fs::write(&plan_path, plan.to_string()).unwrap();
    let r = phasetime(&["moe", "--scenario", p(&good), "--plan", p(&plan_path), "--out", p(&tmp.path().join("m"))]);
    assert_eq!(code(&r), 2);
}

#[test]
fn infeasible_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let sc = tmp.path().join("stuck");
    // six vehicles through a one-vehicle exit link cannot clear before the horizon
    scaffold(&sc, "random", &["--seed", "64605"]);
    let r = phasetime(&["solve", "--scenario", p(&sc), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("infeasible"));
}
