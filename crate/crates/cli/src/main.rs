//! `pulltrack`: solve, simulate, sweep and validate the two-source pull-tracking model.
//!
//! Every verb reads one TOML file (`--config`) and applies flag overrides on
//! top. Configuration problems exit with status 2, runtime failures with 1.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pulltrack_core::experiments::checks::{self, CheckOutcome, Level};
use pulltrack_core::experiments::{
    params_hash, run_sweep, write_csv, ExperimentConfig, PolicyFile, Preset, Resolved, SimSettings, SweptParam,
};
use pulltrack_core::solver::{certify_unichain, evaluate_policy};
use pulltrack_core::{sim, Policy, PolicyKind, SimConfig, SimResult, SystemParams, TrackingModel};

#[derive(Parser, Debug)]
#[command(name = "pulltrack", version, about = "Optimal pull scheduling for remote tracking of two Markov sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for a policy table and optionally write it to a policy file.
    Solve(SolveArgs),
    /// Monte-Carlo simulation of one policy.
    Simulate(SimulateArgs),
    /// Solve, evaluate and simulate every policy across a parameter grid; writes CSV.
    Sweep(SweepArgs),
    /// Run the built-in self-checks and print a pass/fail report.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Built-in preset: fig2, fig3a, fig3b, fig4 or fig5.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    q1: Option<f64>,
    #[arg(long)]
    q2: Option<f64>,
    #[arg(long)]
    rho12: Option<f64>,
    #[arg(long)]
    rho21: Option<f64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    /// Cost per pull.
    #[arg(long)]
    alpha: Option<f64>,
    /// Age truncation N.
    #[arg(short = 'N', long = "truncation")]
    n: Option<u32>,
    /// RVIA stopping tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Simulated slots per replication, warmup included.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// optimal_rvia or age_optimal_rvia.
    #[arg(long)]
    policy: Option<String>,
    /// Where to write the policy file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    policy: Option<String>,
    /// Use a previously solved policy instead of solving again.
    #[arg(long)]
    policy_file: Option<PathBuf>,
    /// Per-replication CSV output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// alpha, rho, p or q.
    #[arg(long)]
    parameter: Option<String>,
    /// Comma-separated grid, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Comma-separated policy kinds.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Analytic evaluation only.
    #[arg(long)]
    no_sim: bool,
    /// CSV output; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Optional configuration; its parameter point is checked too.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "quick", value_parser = ["quick", "full"])]
    level: String,
    /// Also write the report to this file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Bad configuration or flags; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl fmt::Display) -> anyhow::Error {
    UsageError(msg.to_string()).into()
}

/// Validation ran but a check failed; exits with status 1.
#[derive(Debug)]
struct ChecksFailed(usize);

impl fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

fn load_file(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => load_file(path)?,
            None if self.preset.is_some() => ExperimentConfig::default(),
            None => return Err(usage("a configuration is required: pass --config FILE or --preset NAME")),
        };
        if self.preset.is_some() {
            c.preset.clone_from(&self.preset);
        }
        let p = &mut c.params;
        for (slot, flag) in [
            (&mut p.p1, self.p1),
            (&mut p.p2, self.p2),
            (&mut p.q1, self.q1),
            (&mut p.q2, self.q2),
            (&mut p.rho12, self.rho12),
            (&mut p.rho21, self.rho21),
            (&mut p.w1, self.w1),
            (&mut p.w2, self.w2),
            (&mut p.alpha, self.alpha),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        p.n = self.n.or(p.n);
        c.solver.epsilon = self.epsilon.or(c.solver.epsilon);
        c.solver.max_iters = self.max_iters.or(c.solver.max_iters);
        c.sim.horizon = self.horizon.or(c.sim.horizon);
        c.sim.warmup = self.warmup.or(c.sim.warmup);
        c.sim.seed = self.seed.or(c.sim.seed);
        c.sim.replications = self.reps.or(c.sim.replications);
        Ok(c)
    }
}

fn resolve(c: &ExperimentConfig) -> Result<Resolved> {
    let r = c.resolve().map_err(usage)?;
    for w in r.params.truncation_warnings() {
        eprintln!("warning: {w}");
    }
    Ok(r)
}

fn with_policy(mut c: ExperimentConfig, policy: &Option<String>) -> ExperimentConfig {
    if policy.is_some() {
        c.policy.clone_from(policy);
    }
    c
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

fn solve(args: &SolveArgs) -> Result<()> {
    let r = resolve(&with_policy(args.cfg.experiment()?, &args.policy))?;
    if !r.policy.needs_table() {
        return Err(usage(format!("`solve` needs an RVIA policy kind, got `{}`", r.policy)));
    }
    let model = TrackingModel::build(&r.params)?;
    let policy = Policy::solve(r.policy, &model, &r.solver)?;
    let table = policy.table.clone().expect("RVIA kinds carry a table");
    let analytic = evaluate_policy(&model.mdp, &table.actions)?;
    let pulls = table.actions.iter().filter(|&&a| a != 0).count();

    let mut out = io::stdout().lock();
    writeln!(out, "policy = {}", r.policy)?;
    writeln!(out, "params_hash = {}", params_hash(&r.params))?;
    writeln!(out, "states = {}", model.space.len())?;
    writeln!(out, "solver_cost = {}", table.average_cost)?;
    writeln!(out, "analytic_cost = {analytic}")?;
    writeln!(out, "unichain = {}", certify_unichain(&model.mdp, &table.actions))?;
    writeln!(out, "iterations = {}", table.iterations)?;
    writeln!(out, "residual = {:e}", table.residual)?;
    writeln!(out, "pulling_states = {pulls}")?;
    if let Some(path) = &args.output {
        PolicyFile::new(&r.params, r.policy, table)
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?;
        writeln!(out, "written = {}", path.display())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimRow<'a> {
    policy: &'a str,
    params_hash: &'a str,
    row_kind: &'a str,
    replication: Option<usize>,
    mean_cost: f64,
    ci95_halfwidth: Option<f64>,
    distortion1: f64,
    distortion2: f64,
    pull_rate1: f64,
    pull_rate2: f64,
    rng: &'a str,
}

fn write_sim_csv(path: &Path, kind: PolicyKind, hash: &str, res: &SimResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for r in &res.per_replication {
        w.serialize(SimRow {
            policy: kind.name(),
            params_hash: hash,
            row_kind: "replication",
            replication: Some(r.replication),
            mean_cost: r.mean_cost,
            ci95_halfwidth: None,
            distortion1: r.mean_distortion[0],
            distortion2: r.mean_distortion[1],
            pull_rate1: r.pull_rate[0],
            pull_rate2: r.pull_rate[1],
            rng: &res.rng,
        })?;
    }
    w.serialize(SimRow {
        policy: kind.name(),
        params_hash: hash,
        row_kind: "aggregate",
        replication: None,
        mean_cost: res.mean_cost,
        ci95_halfwidth: Some(res.ci95_halfwidth),
        distortion1: res.mean_distortion[0],
        distortion2: res.mean_distortion[1],
        pull_rate1: res.pull_rate[0],
        pull_rate2: res.pull_rate[1],
        rng: &res.rng,
    })?;
    w.flush()?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let r = resolve(&with_policy(args.cfg.experiment()?, &args.policy))?;
    let model = TrackingModel::build(&r.params)?;
    let policy = match &args.policy_file {
        Some(path) => {
            let f = PolicyFile::read(path).map_err(usage)?;
            f.check_params(&r.params).map_err(usage)?;
            if args.policy.is_some() && f.kind != r.policy {
                return Err(usage(format!("--policy {} conflicts with the policy file's {}", r.policy, f.kind)));
            }
            Policy::with_table(f.kind, f.table)
        }
        None if r.policy.needs_table() => Policy::solve(r.policy, &model, &r.solver)?,
        None => Policy::fixed(r.policy)?,
    };
    let cfg = sim_config(&r.params, &r.sim);
    cfg.validate().map_err(usage)?;
    let res = sim::run(&cfg, &policy)?;
    let hash = params_hash(&r.params);

    let mut out = io::stdout().lock();
    writeln!(out, "policy = {}", policy.kind)?;
    writeln!(out, "params_hash = {hash}")?;
    writeln!(out, "rng = {}", res.rng)?;
    writeln!(out, "replications = {}", r.sim.replications)?;
    writeln!(out, "measured_slots = {}", cfg.measured_slots())?;
    writeln!(out, "mean_cost = {}", res.mean_cost)?;
    writeln!(out, "ci95_halfwidth = {}", res.ci95_halfwidth)?;
    writeln!(out, "distortion = {} {}", res.mean_distortion[0], res.mean_distortion[1])?;
    writeln!(out, "pull_rate = {} {}", res.pull_rate[0], res.pull_rate[1])?;
    if let Some(actions) = policy.action_table(&model.space, r.params.w) {
        writeln!(out, "analytic_cost = {}", evaluate_policy(&model.mdp, &actions)?)?;
    }
    if let Some(path) = &args.output {
        write_sim_csv(path, policy.kind, &hash, &res).with_context(|| format!("writing {}", path.display()))?;
        writeln!(out, "written = {}", path.display())?;
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut c = args.cfg.experiment()?;
    if args.parameter.is_some() {
        c.sweep.parameter.clone_from(&args.parameter);
    }
    if args.values.is_some() {
        c.sweep.values.clone_from(&args.values);
    }
    if args.policies.is_some() {
        c.sweep.policies.clone_from(&args.policies);
    }
    let r = resolve(&c)?;
    let Some(mut spec) = r.sweep else {
        return Err(usage("nothing to sweep: give a preset or a [sweep] section with parameter and values"));
    };
    if args.no_sim {
        spec.sim = None;
    }
    if let Some(s) = &spec.sim {
        sim_config(&spec.base, s).validate().map_err(usage)?;
    }
    let points = run_sweep(&spec)?;
    let output = args.output.clone().or_else(|| spec.output.clone());
    match &output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&spec, &points, BufWriter::new(file))?;
            eprintln!("wrote {} grid points to {}", points.len(), path.display());
        }
        None => write_csv(&spec, &points, io::stdout().lock())?,
    }
    let flagged = points
        .iter()
        .flat_map(|p| p.outcomes.iter().map(move |o| (p.value, o)))
        .filter_map(|(v, o)| o.error.as_ref().map(|e| format!("{} at {v}: {e}", o.kind)))
        .collect::<Vec<_>>();
    for f in &flagged {
        eprintln!("warning: {f}");
    }
    Ok(())
}

fn config_checks(r: &Resolved, level: Level) -> Result<Vec<CheckOutcome>> {
    let point = Preset {
        name: "config",
        base: r.params.clone(),
        parameter: SweptParam::Alpha,
        base_value: r.params.alpha,
        grid: vec![r.params.alpha],
    };
    let mut out = vec![
        checks::kernel_stochasticity(std::slice::from_ref(&point))?,
        checks::optimality_certificate(std::slice::from_ref(&point), 11)?,
    ];
    out.extend(checks::simulation_consistency(std::slice::from_ref(&point), &checks::sim_settings(level))?);
    // The always-idle line refers to a fixed parameter set already covered above.
    out.pop();
    Ok(out)
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let level: Level = args.level.parse().map_err(usage)?;
    let configured = match &args.config {
        Some(path) => Some(resolve(&load_file(path)?)?),
        None => None,
    };
    let start = std::time::Instant::now();
    let mut results = checks::validate(level)?;
    if let Some(r) = &configured {
        for mut c in config_checks(r, level)? {
            c.name = format!("config: {}", c.name);
            results.push(c);
        }
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    let mut report = format!("pulltrack validation ({})\n", args.level);
    for c in &results {
        report.push_str(&format!("{c}\n"));
    }
    report.push_str(&format!(
        "{} passed, {failed} failed in {:.1} s\n",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    ));
    print!("{report}");
    if let Some(path) = &args.output {
        std::fs::write(path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    if failed > 0 {
        return Err(ChecksFailed(failed).into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ChecksFailed>() => {
            eprintln!("pulltrack: {e}");
            ExitCode::FAILURE
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("pulltrack: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("pulltrack: {e:#}");
            ExitCode::FAILURE
        }
    }
}
