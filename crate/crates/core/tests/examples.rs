//! Runs every example end to end.

#[path = "../examples/brute_force_oracle.rs"]
mod brute_force_oracle;

#[path = "../examples/lagrangian_solve.rs"]
mod lagrangian_solve;

#[path = "../examples/milp_export.rs"]
mod milp_export;

#[path = "../examples/network_loading.rs"]
mod network_loading;

#[path = "../examples/parallel_workers.rs"]
mod parallel_workers;

#[path = "../examples/phase_algebra.rs"]
mod phase_algebra;

#[path = "../examples/phase_groups.rs"]
mod phase_groups;

#[path = "../examples/plan_search.rs"]
mod plan_search;

#[path = "../examples/scaffold_fixture.rs"]
mod scaffold_fixture;

#[path = "../examples/time_space_report.rs"]
mod time_space_report;


#[test]
fn brute_force_oracle_runs() {
    brute_force_oracle::run_example().unwrap();
}

#[test]
fn lagrangian_solve_runs() {
    lagrangian_solve::run_example().unwrap();
}

#[test]
fn milp_export_runs() {
    milp_export::run_example().unwrap();
}

#[test]
fn network_loading_runs() {
    network_loading::run_example().unwrap();
}

#[test]
fn parallel_workers_runs() {
    parallel_workers::run_example().unwrap();
}

#[test]
fn phase_algebra_runs() {
    phase_algebra::run_example().unwrap();
}

#[test]
fn phase_groups_runs() {
    phase_groups::run_example().unwrap();
}

#[test]
fn plan_search_runs() {
    plan_search::run_example().unwrap();
}

#[test]
fn scaffold_fixture_runs() {
    scaffold_fixture::run_example().unwrap();
}

#[test]
fn time_space_report_runs() {
    time_space_report::run_example().unwrap();
}
