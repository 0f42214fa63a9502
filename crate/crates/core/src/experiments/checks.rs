//! Self-checks with pinned tolerances, shared by `validate` and the acceptance tests.
//!
//! Each check returns a [`CheckOutcome`] carrying the measured quantity so a
//! failing run says by how much it failed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::belief::Belief;
use crate::error::Result;
use crate::experiments::config::{SimSettings, SweepSpec};
use crate::experiments::presets::Preset;
use crate::experiments::sweep::{run_sweep, GridPoint};
use crate::markov::SourceModel;
use crate::model::{SystemParams, TrackingModel};
use crate::policies::{Policy, PolicyKind};
use crate::sim::{self, SimConfig};
use crate::solver::{
    bellman_residual, brute_force_oracle, random_unichain_mdp, rvia, RviaOptions,
};

pub const BELIEF_TOL: f64 = 1e-12;
pub const KERNEL_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-6;
/// RVIA tolerance used for every preset solve.
pub const SOLVER_EPS: f64 = 1e-3;
/// `10 * SOLVER_EPS`.
pub const CERTIFICATE_TOL: f64 = 1e-2;
pub const SIM_REL_TOL: f64 = 0.02;
pub const FLATTEN_REL_TOL: f64 = 0.01;
pub const SYMMETRY_TOL: f64 = 1e-3;
/// Slack for orderings and monotonicity between exactly evaluated policies.
pub const TREND_TOL: f64 = SOLVER_EPS;

/// Policies compared in the simulation-consistency check.
pub const COMPARED: [PolicyKind; 3] = [
    PolicyKind::OptimalRvia,
    PolicyKind::AgeOptimalRvia,
    PolicyKind::MaxAgeFirst,
];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Recursive belief update against the closed form, for p on a 0.05 grid and ages 1..=100.
pub fn belief_equivalence() -> CheckOutcome {
    let mut worst = 0.0f64;
    for k in 0..=20 {
        let m = SourceModel::new(1, k as f64 * 0.05).expect("grid probability");
        for last in 0..=1u8 {
            let mut b = Belief::closed_form(&m, last, 1).expect("age 1");
            for age in 2..=100 {
                b = b.step(&m, age, last);
                let c = Belief::closed_form(&m, last, age).expect("age >= 1");
                worst = worst.max((b.value() - c.value()).abs());
            }
        }
    }
    CheckOutcome::new(
        "belief equivalence",
        worst <= BELIEF_TOL,
        format!("max |recursive - closed form| = {worst:.3e} (tol {BELIEF_TOL:e})"),
    )
}

/// Row sums of the N=30 kernel for every preset's reference parameters.
pub fn kernel_stochasticity(presets: &[Preset]) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut rows = 0usize;
    for p in presets {
        let model = TrackingModel::build(&p.base)?;
        let mdp = &model.mdp;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let sum: f64 = mdp.row(s, a).iter().map(|e| e.1).sum();
                worst = worst.max((sum - 1.0).abs());
                rows += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "kernel stochasticity",
        worst <= KERNEL_TOL,
        format!("{rows} rows over {} presets, max |sum - 1| = {worst:.3e} (tol {KERNEL_TOL:e})", presets.len()),
    ))
}

/// RVIA against exhaustive policy enumeration on random MDPs with at most 6 states and 3 actions.
pub fn solver_vs_oracle(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let opts = RviaOptions {
        epsilon: 1e-10,
        max_iters: 1_000_000,
    };
    let mut worst = 0.0f64;
    for k in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let n = rng.random_range(2..=6);
        let a = rng.random_range(2..=3);
        let mdp = random_unichain_mdp(&mut rng, n, a);
        let t = rvia(&mdp, 0, &opts)?;
        let o = brute_force_oracle(&mdp)?;
        worst = worst.max((t.average_cost - o.average_cost).abs());
    }
    Ok(CheckOutcome::new(
        "solver vs oracle",
        worst <= ORACLE_TOL,
        format!("{instances} random MDPs, max |rvia - enumeration| = {worst:.3e} (tol {ORACLE_TOL:e})"),
    ))
}

/// Bellman residual of every grid-point solve, and the spread of the average
/// cost over five random reference states.
pub fn optimality_certificate(presets: &[Preset], seed: u64) -> Result<CheckOutcome> {
    let opts = RviaOptions {
        epsilon: SOLVER_EPS,
        ..RviaOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_residual, mut worst_spread, mut solves) = (0.0f64, 0.0f64, 0usize);
    for p in presets {
        for &v in &p.grid {
            let model = TrackingModel::build(&p.params_at(v)?)?;
            for mdp in [&model.mdp, &model.age_mdp] {
                let t = rvia(mdp, model.start_state(), &opts)?;
                worst_residual = worst_residual.max(bellman_residual(mdp, &t.actions, &t.bias, t.average_cost));
                let (mut lo, mut hi) = (t.average_cost, t.average_cost);
                for _ in 0..5 {
                    let r = rng.random_range(0..mdp.n_states());
                    let g = rvia(mdp, r, &opts)?.average_cost;
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
                worst_spread = worst_spread.max(hi - lo);
                solves += 6;
            }
        }
    }
    Ok(CheckOutcome::new(
        "optimality certificate",
        worst_residual <= CERTIFICATE_TOL && worst_spread <= CERTIFICATE_TOL,
        format!(
            "{solves} solves, max Bellman residual = {worst_residual:.3e}, max reference-state spread = {worst_spread:.3e} (tol {CERTIFICATE_TOL:e})"
        ),
    ))
}

fn sim_config(params: &SystemParams, s: &SimSettings) -> SimConfig {
    SimConfig {
        params: params.clone(),
        horizon: s.horizon,
        warmup: s.warmup,
        seed: s.seed,
        replications: s.replications,
    }
}

/// Simulated mean cost against the exact evaluation for each preset's
/// reference point, plus always-idle against its derived value of 1.
pub fn simulation_consistency(presets: &[Preset], settings: &SimSettings) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for p in presets {
        let spec = SweepSpec {
            values: vec![p.base_value],
            policies: COMPARED.to_vec(),
            sim: Some(*settings),
            ..SweepSpec::from_preset(p, None)
        };
        let point = run_sweep(&spec)?.remove(0);
        for o in &point.outcomes {
            let name = format!("simulation {} {}", p.name, o.kind);
            let (Some(analytic), Some(sim)) = (o.analytic_cost, o.sim.as_ref()) else {
                out.push(CheckOutcome::new(&name, false, format!("missing result: {:?}", o.error)));
                continue;
            };
            let tol = (SIM_REL_TOL * analytic.abs()).max(sim.ci95_halfwidth);
            let diff = (sim.mean_cost - analytic).abs();
            out.push(CheckOutcome::new(
                &name,
                diff <= tol,
                format!(
                    "simulated {:.5} ± {:.5} vs exact {analytic:.5}, |diff| = {diff:.2e} (tol {tol:.2e})",
                    sim.mean_cost, sim.ci95_halfwidth
                ),
            ));
        }
    }

    let idle_params = SystemParams::new([0.9, 0.9], [0.9, 0.9], 0.5, 0.5, 0.5)?;
    let r = sim::run(&sim_config(&idle_params, settings), &Policy::fixed(PolicyKind::AlwaysIdle)?)?;
    let tol = (SIM_REL_TOL * 1.0f64).max(r.ci95_halfwidth);
    let diff = (r.mean_cost - 1.0).abs();
    out.push(CheckOutcome::new(
        "simulation always_idle p=0.9",
        diff <= tol,
        format!("simulated {:.5} vs derived 1.0, |diff| = {diff:.2e} (tol {tol:.2e})", r.mean_cost),
    ));
    Ok(out)
}

/// Exact costs of the optimal policy and the benchmarks across a preset's grid.
pub fn analytic_sweep(preset: &Preset) -> Result<Vec<GridPoint>> {
    let mut spec = SweepSpec::from_preset(preset, None);
    spec.solver.epsilon = SOLVER_EPS;
    run_sweep(&spec)
}

fn cost(point: &GridPoint, kind: PolicyKind) -> f64 {
    point.analytic(kind).unwrap_or(f64::NAN)
}

fn fmt_series(points: &[GridPoint], kind: PolicyKind) -> String {
    points
        .iter()
        .map(|p| format!("{:.4}", cost(p, kind)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Transmission-cost sweep: optimal never worse than the age-based benchmarks,
/// strictly better at the largest alpha, non-decreasing, and flat at the end.
pub fn fig2_trend(points: &[GridPoint]) -> CheckOutcome {
    let opt: Vec<f64> = points.iter().map(|p| cost(p, PolicyKind::OptimalRvia)).collect();
    let baseline = |p: &GridPoint| cost(p, PolicyKind::MaxAgeFirst).min(cost(p, PolicyKind::AgeOptimalRvia));
    let dominated = points.iter().all(|p| cost(p, PolicyKind::OptimalRvia) <= baseline(p) + TREND_TOL);
    let last = points.last().expect("non-empty grid");
    let strict = cost(last, PolicyKind::OptimalRvia) < baseline(last) - TREND_TOL;
    let monotone = opt.windows(2).all(|w| w[1] >= w[0] - TREND_TOL);
    let n = opt.len();
    let plateau = opt[n - 1];
    let flat = (opt[n - 1] - opt[n - 2]).abs() <= FLATTEN_REL_TOL * plateau.abs();
    CheckOutcome::new(
        "fig2 trend",
        dominated && strict && monotone && flat,
        format!(
            "dominates={dominated} strict_at_max_alpha={strict} non_decreasing={monotone} flat={flat}; optimal [{}] max_age_first [{}] age_optimal [{}]",
            fmt_series(points, PolicyKind::OptimalRvia),
            fmt_series(points, PolicyKind::MaxAgeFirst),
            fmt_series(points, PolicyKind::AgeOptimalRvia),
        ),
    )
}

/// Correlation sweep: optimal cost non-increasing in rho.
pub fn fig3_trend(name: &str, points: &[GridPoint]) -> CheckOutcome {
    let opt: Vec<f64> = points.iter().map(|p| cost(p, PolicyKind::OptimalRvia)).collect();
    let monotone = opt.windows(2).all(|w| w[1] <= w[0] + TREND_TOL);
    CheckOutcome::new(
        &format!("{name} trend"),
        monotone,
        format!("non_increasing={monotone}; optimal [{}]", fmt_series(points, PolicyKind::OptimalRvia)),
    )
}

/// Self-transition sweep: symmetric about 0.5, peaked at 0.5, and the
/// benchmark gap largest at 0.5.
pub fn fig4_trend(points: &[GridPoint]) -> CheckOutcome {
    let at = |v: f64| points.iter().find(|p| (p.value - v).abs() < 1e-9);
    let mut worst_asym = 0.0f64;
    let mut symmetric = true;
    for k in 1..=4 {
        let v = k as f64 / 10.0;
        match (at(v), at(1.0 - v)) {
            (Some(a), Some(b)) => {
                worst_asym = worst_asym.max((cost(a, PolicyKind::OptimalRvia) - cost(b, PolicyKind::OptimalRvia)).abs())
            }
            _ => symmetric = false,
        }
    }
    symmetric &= worst_asym <= SYMMETRY_TOL;
    let Some(mid) = at(0.5) else {
        return CheckOutcome::new("fig4 trend", false, "grid lacks p = 0.5".into());
    };
    let peak = points
        .iter()
        .all(|p| cost(mid, PolicyKind::OptimalRvia) >= cost(p, PolicyKind::OptimalRvia) - 1e-9);
    let gap = |p: &GridPoint| cost(p, PolicyKind::MaxAgeFirst) - cost(p, PolicyKind::OptimalRvia);
    let widest = points.iter().all(|p| gap(mid) >= gap(p) - 1e-9);
    CheckOutcome::new(
        "fig4 trend",
        symmetric && peak && widest,
        format!(
            "max |c(p) - c(1-p)| = {worst_asym:.2e} (tol {SYMMETRY_TOL:e}) peak_at_0.5={peak} widest_gap_at_0.5={widest}; optimal [{}] gaps [{}]",
            fmt_series(points, PolicyKind::OptimalRvia),
            points.iter().map(|p| format!("{:.4}", gap(p))).collect::<Vec<_>>().join(" "),
        ),
    )
}

/// Channel-reliability sweep: every policy non-increasing in q, optimal never worse.
pub fn fig5_trend(points: &[GridPoint]) -> CheckOutcome {
    let kinds = [PolicyKind::OptimalRvia, PolicyKind::AgeOptimalRvia, PolicyKind::MaxAgeFirst];
    let monotone = kinds.iter().all(|&k| {
        points
            .windows(2)
            .all(|w| cost(&w[1], k) <= cost(&w[0], k) + TREND_TOL)
    });
    let dominated = points.iter().all(|p| {
        cost(p, PolicyKind::OptimalRvia)
            <= cost(p, PolicyKind::MaxAgeFirst).min(cost(p, PolicyKind::AgeOptimalRvia)) + TREND_TOL
    });
    CheckOutcome::new(
        "fig5 trend",
        monotone && dominated,
        format!(
            "non_increasing={monotone} dominates={dominated}; optimal [{}] max_age_first [{}] age_optimal [{}]",
            fmt_series(points, PolicyKind::OptimalRvia),
            fmt_series(points, PolicyKind::MaxAgeFirst),
            fmt_series(points, PolicyKind::AgeOptimalRvia),
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

impl std::str::FromStr for Level {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Level::Quick),
            "full" => Ok(Level::Full),
            other => Err(crate::error::Error::Unknown {
                kind: "validation level",
                name: other.to_string(),
            }),
        }
    }
}

/// Simulation budget per level: `full` matches the acceptance settings.
pub fn sim_settings(level: Level) -> SimSettings {
    match level {
        Level::Quick => SimSettings {
            horizon: 110_000,
            warmup: 10_000,
            seed: 20_240_601,
            replications: 4,
        },
        Level::Full => SimSettings {
            horizon: 1_010_000,
            warmup: 10_000,
            seed: 20_240_601,
            replications: 10,
        },
    }
}

/// Runs every check. `quick` uses the reference-point presets only and a
/// shorter simulation; `full` solves every grid point and simulates 10^6 slots.
pub fn validate(level: Level) -> Result<Vec<CheckOutcome>> {
    let presets = Preset::all();
    let mut out = vec![belief_equivalence(), kernel_stochasticity(&presets)?, solver_vs_oracle(50, 7)?];
    let cert_presets: Vec<Preset> = match level {
        Level::Full => presets.clone(),
        Level::Quick => presets
            .iter()
            .map(|p| Preset {
                grid: vec![p.base_value],
                ..p.clone()
            })
            .collect(),
    };
    out.push(optimality_certificate(&cert_presets, 11)?);
    out.extend(simulation_consistency(&presets, &sim_settings(level))?);
    for p in &presets {
        let points = analytic_sweep(p)?;
        out.push(match p.name {
            "fig2" => fig2_trend(&points),
            "fig4" => fig4_trend(&points),
            "fig5" => fig5_trend(&points),
            name => fig3_trend(name, &points),
        });
    }
    Ok(out)
}
