//! Parameter sweeps: solve, evaluate and simulate each policy at every grid point.
//!
//! # CSV schema (version 1)
//!
//! One `aggregate` row per `(grid value, policy)` and, when simulating, one
//! `replication` row per replication. Empty cells mean "not applicable".
//!
//! | column | meaning |
//! |---|---|
//! | `schema_version` | always `1` |
//! | `sweep` | preset or sweep name |
//! | `params_hash` | hash of the grid point's parameters (same as policy files) |
//! | `parameter` | swept parameter: `alpha`, `rho`, `p` or `q` |
//! | `value` | swept value |
//! | `policy` | policy kind |
//! | `row_kind` | `aggregate` or `replication` |
//! | `replication` | replication index (replication rows only) |
//! | `analytic_cost` | exact long-run cost from the stationary distribution, started at `(0,0,1,1)` |
//! | `solver_cost` | RVIA's `V(ref)` for the policy's own objective (RVIA kinds) |
//! | `simulated_cost` | Monte-Carlo mean cost |
//! | `ci95_halfwidth` | 95% CI half-width across replications (aggregate rows) |
//! | `distortion1`, `distortion2` | simulated mean distortion per source |
//! | `pull_rate1`, `pull_rate2` | simulated fraction of slots pulling each sensor |
//! | `unichain` | whether the induced chain has a single closed class |
//! | `solver_iterations`, `solver_residual` | RVIA diagnostics |
//! | `rng` | generator identity |
//! | `status` | `ok` or the error encountered at this point |

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::experiments::config::{SimSettings, SweepSpec};
use crate::experiments::policy_file::params_hash;
use crate::model::{SystemParams, TrackingModel};
use crate::policies::{Policy, PolicyKind};
use crate::sim::{self, SimConfig, SimResult};
use crate::solver::{certify_unichain, evaluate_policy, RviaOptions};

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    pub kind: PolicyKind,
    pub policy: Option<Policy>,
    pub analytic_cost: Option<f64>,
    pub unichain: Option<bool>,
    pub sim: Option<SimResult>,
    pub error: Option<String>,
}

impl PolicyOutcome {
    fn failed(kind: PolicyKind, err: impl ToString) -> Self {
        Self {
            kind,
            policy: None,
            analytic_cost: None,
            unichain: None,
            sim: None,
            error: Some(err.to_string()),
        }
    }

    pub fn solver_cost(&self) -> Option<f64> {
        self.policy.as_ref()?.table.as_ref().map(|t| t.average_cost)
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub value: f64,
    pub params: SystemParams,
    pub outcomes: Vec<PolicyOutcome>,
}

impl GridPoint {
    pub fn outcome(&self, kind: PolicyKind) -> Option<&PolicyOutcome> {
        self.outcomes.iter().find(|o| o.kind == kind)
    }

    /// Analytic cost of `kind`, if it was evaluated.
    pub fn analytic(&self, kind: PolicyKind) -> Option<f64> {
        self.outcome(kind)?.analytic_cost
    }
}

/// Solves, evaluates and optionally simulates every policy at one parameter point.
pub fn evaluate_point(
    params: &SystemParams,
    policies: &[PolicyKind],
    solver: &RviaOptions,
    sim_settings: Option<&SimSettings>,
) -> Result<Vec<PolicyOutcome>> {
    let model = TrackingModel::build(params)?;
    let outcomes = policies
        .iter()
        .map(|&kind| {
            let policy = match Policy::solve(kind, &model, solver) {
                Ok(p) => p,
                Err(e) => return PolicyOutcome::failed(kind, e),
            };
            let mut outcome = PolicyOutcome {
                kind,
                policy: None,
                analytic_cost: None,
                unichain: None,
                sim: None,
                error: None,
            };
            if let Some(actions) = policy.action_table(&model.space, params.w) {
                outcome.unichain = Some(certify_unichain(&model.mdp, &actions));
                match evaluate_policy(&model.mdp, &actions) {
                    Ok(c) => outcome.analytic_cost = Some(c),
                    Err(e) => outcome.error = Some(e.to_string()),
                }
            }
            if let Some(s) = sim_settings {
                let cfg = SimConfig {
                    params: params.clone(),
                    horizon: s.horizon,
                    warmup: s.warmup,
                    seed: s.seed,
                    replications: s.replications,
                };
                match sim::run(&cfg, &policy) {
                    Ok(r) => outcome.sim = Some(r),
                    Err(e) => outcome.error = Some(e.to_string()),
                }
            }
            outcome.policy = Some(policy);
            outcome
        })
        .collect();
    Ok(outcomes)
}

/// Runs all grid points in parallel; results come back in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<GridPoint>> {
    spec.validate()?;
    spec.values
        .par_iter()
        .map(|&value| {
            let params = spec.parameter.apply(&spec.base, value)?;
            let outcomes = evaluate_point(&params, &spec.policies, &spec.solver, spec.sim.as_ref())?;
            Ok(GridPoint {
                value,
                params,
                outcomes,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    sweep: &'a str,
    params_hash: &'a str,
    parameter: &'a str,
    value: f64,
    policy: &'a str,
    row_kind: &'a str,
    replication: Option<usize>,
    analytic_cost: Option<f64>,
    solver_cost: Option<f64>,
    simulated_cost: Option<f64>,
    ci95_halfwidth: Option<f64>,
    distortion1: Option<f64>,
    distortion2: Option<f64>,
    pull_rate1: Option<f64>,
    pull_rate2: Option<f64>,
    unichain: Option<bool>,
    solver_iterations: Option<usize>,
    solver_residual: Option<f64>,
    rng: Option<&'a str>,
    status: &'a str,
}

pub fn write_csv<W: Write>(spec: &SweepSpec, points: &[GridPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for point in points {
        let hash = params_hash(&point.params);
        for o in &point.outcomes {
            let table = o.policy.as_ref().and_then(|p| p.table.as_ref());
            let status = o.error.as_deref().unwrap_or("ok");
            let base = CsvRow {
                schema_version: CSV_SCHEMA_VERSION,
                sweep: &spec.name,
                params_hash: &hash,
                parameter: spec.parameter.name(),
                value: point.value,
                policy: o.kind.name(),
                row_kind: "aggregate",
                replication: None,
                analytic_cost: o.analytic_cost,
                solver_cost: table.map(|t| t.average_cost),
                simulated_cost: o.sim.as_ref().map(|s| s.mean_cost),
                ci95_halfwidth: o.sim.as_ref().map(|s| s.ci95_halfwidth),
                distortion1: o.sim.as_ref().map(|s| s.mean_distortion[0]),
                distortion2: o.sim.as_ref().map(|s| s.mean_distortion[1]),
                pull_rate1: o.sim.as_ref().map(|s| s.pull_rate[0]),
                pull_rate2: o.sim.as_ref().map(|s| s.pull_rate[1]),
                unichain: o.unichain,
                solver_iterations: table.map(|t| t.iterations),
                solver_residual: table.map(|t| t.residual),
                rng: o.sim.as_ref().map(|s| s.rng.as_str()),
                status,
            };
            if let Some(s) = &o.sim {
                for r in &s.per_replication {
                    w.serialize(CsvRow {
                        row_kind: "replication",
                        replication: Some(r.replication),
                        simulated_cost: Some(r.mean_cost),
                        ci95_halfwidth: None,
                        distortion1: Some(r.mean_distortion[0]),
                        distortion2: Some(r.mean_distortion[1]),
                        pull_rate1: Some(r.pull_rate[0]),
                        pull_rate2: Some(r.pull_rate[1]),
                        ..base.clone()
                    })?;
                }
            }
            w.serialize(base)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(spec: &SweepSpec, points: &[GridPoint], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(spec, points, std::io::BufWriter::new(file))
}
