//! End-to-end flows through the public API.

use pulltrack_core::experiments::{run_sweep, PolicyFile, Preset, SimSettings, SweepSpec};
use pulltrack_core::solver::{evaluate_policy, stationary_distribution};
use pulltrack_core::{sim, Policy, PolicyKind, RviaOptions, SimConfig, SystemParams, TrackingModel};

fn small(n: u32) -> SystemParams {
    SystemParams::new([0.8, 0.7], [0.9, 0.6], 0.5, 0.3, 0.2)
        .unwrap()
        .with_truncation(n)
        .unwrap()
}

#[test]
fn policy_file_round_trip_reproduces_simulation() {
    let params = small(10);
    let model = TrackingModel::build(&params).unwrap();
    let solved = Policy::solve(PolicyKind::OptimalRvia, &model, &RviaOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.txt");
    PolicyFile::new(&params, solved.kind, solved.table.clone().unwrap())
        .write(&path)
        .unwrap();
    let loaded = PolicyFile::read(&path).unwrap();
    loaded.check_params(&params).unwrap();
    assert_eq!(loaded.table.actions, solved.table.as_ref().unwrap().actions);

    let cfg = SimConfig {
        params: params.clone(),
        horizon: 20_000,
        warmup: 1_000,
        seed: 9,
        replications: 3,
    };
    let from_file = sim::run(&cfg, &Policy::with_table(loaded.kind, loaded.table)).unwrap();
    let direct = sim::run(&cfg, &solved).unwrap();
    assert_eq!(from_file, direct);
}

#[test]
fn sweep_analytic_column_matches_direct_evaluation() {
    let preset = Preset::by_name("fig3b").unwrap();
    let mut spec = SweepSpec::from_preset(&preset, None);
    spec.base = spec.base.with_truncation(8).unwrap();
    spec.values = vec![0.2, 0.9];
    let points = run_sweep(&spec).unwrap();
    for point in &points {
        let model = TrackingModel::build(&point.params).unwrap();
        let o = point.outcome(PolicyKind::MaxAgeFirst).unwrap();
        let actions = o.policy.as_ref().unwrap().action_table(&model.space, point.params.w).unwrap();
        assert_eq!(o.analytic_cost.unwrap(), evaluate_policy(&model.mdp, &actions).unwrap());
        let opt = point.analytic(PolicyKind::OptimalRvia).unwrap();
        assert!(opt <= point.analytic(PolicyKind::MaxAgeFirst).unwrap() + 1e-3);
    }
}

#[test]
fn unichain_evaluation_equals_stationary_average() {
    let params = small(12);
    let model = TrackingModel::build(&params).unwrap();
    let table = Policy::solve(PolicyKind::OptimalRvia, &model, &RviaOptions::default())
        .unwrap()
        .table
        .unwrap();
    let pi = stationary_distribution(&model.mdp, &table.actions).unwrap();
    let direct: f64 = pi
        .iter()
        .enumerate()
        .map(|(z, w)| w * model.mdp.cost(z, table.actions[z]))
        .sum();
    let g = evaluate_policy(&model.mdp, &table.actions).unwrap();
    assert!((g - direct).abs() < 1e-12);
    assert!((g - table.average_cost).abs() < 1e-2);
}

#[test]
fn confidence_intervals_cover_the_idle_cost_near_nominally() {
    // Always-idle at p = 0.9 costs exactly 1 in the long run.
    let params = SystemParams::new([0.9, 0.9], [0.9, 0.9], 0.5, 0.5, 0.5).unwrap();
    let idle = Policy::fixed(PolicyKind::AlwaysIdle).unwrap();
    let trials = 60;
    let covered = (0..trials)
        .filter(|&t| {
            let cfg = SimConfig {
                params: params.clone(),
                horizon: 21_000,
                warmup: 1_000,
                seed: 1_000 + t,
                replications: 10,
            };
            let r = sim::run(&cfg, &idle).unwrap();
            (r.mean_cost - 1.0).abs() <= r.ci95_halfwidth
        })
        .count();
    // Nominal 95%; a binomial(60, 0.95) falls below 51 with probability < 1e-3.
    assert!(covered >= 51, "coverage {covered}/{trials}");
}

#[test]
fn sim_settings_default_to_a_million_measured_slots() {
    let s = SimSettings::default();
    assert_eq!(s.horizon - s.warmup, 1_000_000);
    assert_eq!(s.warmup, 10_000);
    assert!(s.replications >= 10);
}
