//! Slotted Monte-Carlo simulation of the physical system.
//!
//! Each slot the monitor acts on its observable state, pays the realized
//! distortion of its MMD estimates against the true source states plus the
//! transmission cost, receives the pull outcome (which carries the sources'
//! current values), and then both sources make one Markov transition. The
//! cost is accrued before the pull outcome is applied, matching the
//! `C(z, a)` accounting of the finite MDP.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::belief::closed_form_unchecked;
use crate::error::{Error, Result};
use crate::model::{Action, StateSpace, SystemParams, TrackingState};
use crate::policies::Policy;

/// Identity of the generator behind every simulated stream.
pub const RNG_NAME: &str = "chacha12(seed_from_u64(seed), stream=replication)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    /// Total simulated slots per replication, warmup included.
    pub horizon: u64,
    /// Leading slots excluded from the averages.
    pub warmup: u64,
    pub seed: u64,
    pub replications: usize,
}

impl SimConfig {
    pub fn new(params: SystemParams, horizon: u64, seed: u64) -> Self {
        Self {
            params,
            horizon,
            warmup: 10_000.min(horizon / 2),
            seed,
            replications: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon <= self.warmup {
            return Err(Error::param("horizon", format!("{} must exceed warmup {}", self.horizon, self.warmup)));
        }
        if self.replications == 0 {
            return Err(Error::param("replications", "must be at least 1"));
        }
        Ok(())
    }

    pub fn measured_slots(&self) -> u64 {
        self.horizon - self.warmup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    pub mean_cost: f64,
    pub mean_distortion: [f64; 2],
    pub pull_rate: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean_cost: f64,
    pub mean_distortion: [f64; 2],
    pub pull_rate: [f64; 2],
    /// Half-width of the 95% confidence interval of `mean_cost` across
    /// replications; NaN with a single replication.
    pub ci95_halfwidth: f64,
    pub per_replication: Vec<ReplicationResult>,
    pub rng: String,
}

impl SimResult {
    pub fn replication_costs(&self) -> Vec<f64> {
        self.per_replication.iter().map(|r| r.mean_cost).collect()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// MMD estimate per `(source, sample, age)` with ages `1..=N`.
struct EstimateTable {
    n: u32,
    est: Vec<u8>,
}

impl EstimateTable {
    fn new(params: &SystemParams) -> Self {
        let n = params.n;
        let mut est = Vec::with_capacity(2 * 2 * n as usize);
        for i in 0..2 {
            for x in 0..=1u8 {
                for age in 1..=n {
                    let b = closed_form_unchecked(params.sources[i].p, x, age);
                    est.push(params.distortions[i].mmd_estimate(b));
                }
            }
        }
        Self { n, est }
    }

    #[inline]
    fn get(&self, i: usize, x: u8, age: u32) -> u8 {
        self.est[(i * 2 + x as usize) * self.n as usize + age as usize - 1]
    }
}

pub fn replication_rng(seed: u64, replication: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(replication as u64);
    rng
}

fn run_replication(cfg: &SimConfig, policy: &Policy, replication: usize) -> ReplicationResult {
    let params = &cfg.params;
    let n = params.n;
    let space = StateSpace::new(n);
    let table = EstimateTable::new(params);
    let mut rng = replication_rng(cfg.seed, replication);

    let mut x: [u8; 2] = [rng.random_range(0..2), rng.random_range(0..2)];
    let mut obs = TrackingState {
        xbar: x,
        age: [1, 1],
    };

    let mut cost = CompensatedSum::default();
    let mut distortion = [CompensatedSum::default(); 2];
    let mut pulls = [0u64; 2];

    for t in 0..cfg.horizon {
        let a = policy.decide(&space, &obs, params.w, &mut rng);

        if t >= cfg.warmup {
            let mut c = 0.0;
            for i in 0..2 {
                let est = table.get(i, obs.xbar[i], obs.age[i]);
                let d = params.distortions[i].get(x[i], est);
                distortion[i].add(d);
                c += params.w[i] * d;
            }
            if let Some(i) = a.sensor() {
                c += params.alpha;
                pulls[i] += 1;
            }
            cost.add(c);
        }

        let mut fresh = [false; 2];
        if let Some(i) = a.sensor() {
            let j = 1 - i;
            let (q, rho) = if a == Action::PullSensor1 {
                (params.q[0], params.rho12)
            } else {
                (params.q[1], params.rho21)
            };
            if rng.random::<f64>() < q {
                fresh[i] = true;
                if rng.random::<f64>() < rho {
                    fresh[j] = true;
                }
            }
        }
        for i in 0..2 {
            if fresh[i] {
                obs.xbar[i] = x[i];
                obs.age[i] = 1;
            } else {
                obs.age[i] = (obs.age[i] + 1).min(n);
            }
        }
        for (xi, src) in x.iter_mut().zip(&params.sources) {
            *xi = src.sample_next(*xi, &mut rng);
        }
    }

    let slots = cfg.measured_slots() as f64;
    ReplicationResult {
        replication,
        mean_cost: cost.value() / slots,
        mean_distortion: [distortion[0].value() / slots, distortion[1].value() / slots],
        pull_rate: [pulls[0] as f64 / slots, pulls[1] as f64 / slots],
    }
}

/// Simulates `cfg.replications` independent replications in parallel.
pub fn run(cfg: &SimConfig, policy: &Policy) -> Result<SimResult> {
    cfg.validate()?;
    if policy.kind.needs_table() && policy.table.is_none() {
        return Err(Error::MissingTable(policy.kind.name()));
    }
    if let Some(t) = &policy.table {
        if t.actions.len() != StateSpace::new(cfg.params.n).len() {
            return Err(Error::param("policy table", "size does not match the state space"));
        }
    }
    let per_replication: Vec<ReplicationResult> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, policy, r))
        .collect();
    Ok(aggregate(per_replication))
}

fn aggregate(per_replication: Vec<ReplicationResult>) -> SimResult {
    let k = per_replication.len() as f64;
    let mean = |f: &dyn Fn(&ReplicationResult) -> f64| per_replication.iter().map(f).sum::<f64>() / k;
    let mean_cost = mean(&|r| r.mean_cost);
    let ci95_halfwidth = if per_replication.len() < 2 {
        f64::NAN
    } else {
        let var = per_replication
            .iter()
            .map(|r| (r.mean_cost - mean_cost).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        critical_value(per_replication.len()) * (var / k).sqrt()
    };
    SimResult {
        mean_cost,
        mean_distortion: [mean(&|r| r.mean_distortion[0]), mean(&|r| r.mean_distortion[1])],
        pull_rate: [mean(&|r| r.pull_rate[0]), mean(&|r| r.pull_rate[1])],
        ci95_halfwidth,
        per_replication,
        rng: RNG_NAME.to_string(),
    }
}

/// Two-sided 95% critical value: Student t below 30 replications, normal otherwise.
pub fn critical_value(replications: usize) -> f64 {
    if replications >= 30 {
        1.959_963_984_540_054
    } else {
        StudentsT::new(0.0, 1.0, (replications - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975)
    }
}
