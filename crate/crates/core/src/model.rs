//! The truncated belief MDP of the two-source tracking problem.
//!
//! The monitor's observable state is the last received sample of each source
//! together with its age, with ages clamped to `1..=N`. Beliefs, and hence the
//! per-slot expected distortion, are closed-form functions of that state, so
//! the partially observed problem reduces to a finite MDP over `4 N^2` states
//! and three actions.

use serde::{Deserialize, Serialize};

use crate::belief::closed_form_unchecked;
use crate::distortion::DistortionMatrix;
use crate::error::{Error, Result};
use crate::markov::SourceModel;
use crate::solver::FiniteMdp;

/// Full scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub sources: [SourceModel; 2],
    /// Probability that a successful update from sensor 1 also carries source 2.
    pub rho12: f64,
    /// Probability that a successful update from sensor 2 also carries source 1.
    pub rho21: f64,
    /// Reception success probabilities.
    pub q: [f64; 2],
    pub w: [f64; 2],
    /// Cost of one transmission.
    pub alpha: f64,
    pub distortions: [DistortionMatrix; 2],
    /// Truncation depth; ages saturate at this value.
    pub n: u32,
}

impl SystemParams {
    /// Symmetric-weight real-time-error scenario with `N = 30`.
    pub fn new(p: [f64; 2], q: [f64; 2], rho12: f64, rho21: f64, alpha: f64) -> Result<Self> {
        let params = Self {
            sources: [SourceModel::new(1, p[0])?, SourceModel::new(2, p[1])?],
            rho12,
            rho21,
            q,
            w: [1.0, 1.0],
            alpha,
            distortions: [DistortionMatrix::real_time_error(); 2],
            n: 30,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_truncation(mut self, n: u32) -> Result<Self> {
        self.n = n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_distortions(mut self, d: [DistortionMatrix; 2]) -> Self {
        self.distortions = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} is not a probability")))
            }
        };
        prob("p1", self.sources[0].p)?;
        prob("p2", self.sources[1].p)?;
        prob("q1", self.q[0])?;
        prob("q2", self.q[1])?;
        prob("rho12", self.rho12)?;
        prob("rho21", self.rho21)?;
        for (name, v) in [("w1", self.w[0]), ("w2", self.w[1]), ("alpha", self.alpha)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("{v} must be finite and non-negative")));
            }
        }
        if self.n < 2 {
            return Err(Error::param("N", format!("truncation depth {} < 2", self.n)));
        }
        for d in &self.distortions {
            DistortionMatrix::new(d.entries())?;
        }
        Ok(())
    }

    /// Sources whose belief at age `N` is still far from the steady state.
    pub fn truncation_warnings(&self) -> Vec<String> {
        self.sources
            .iter()
            .filter_map(|s| {
                let gap = s.correlation().abs().powi(self.n as i32);
                (gap > 0.05).then(|| {
                    format!(
                        "source {}: |2p-1|^N = {gap:.3} > 0.05 at N = {}; consider a larger N",
                        s.id, self.n
                    )
                })
            })
            .collect()
    }

    /// `Pr{X_i = 1 | s}` for source index `i` in `{0, 1}`.
    #[inline]
    pub fn conditional_state_prob(&self, s: &TrackingState, i: usize) -> f64 {
        closed_form_unchecked(self.sources[i].p, s.xbar[i], s.age[i])
    }

    fn pull_params(&self, sensor: usize) -> (f64, f64) {
        match sensor {
            0 => (self.q[0], self.rho12),
            _ => (self.q[1], self.rho21),
        }
    }
}

/// Observable monitor state: last samples and their ages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackingState {
    pub xbar: [u8; 2],
    pub age: [u32; 2],
}

impl TrackingState {
    pub fn new(x1: u8, x2: u8, d1: u32, d2: u32) -> Self {
        Self {
            xbar: [x1, x2],
            age: [d1, d2],
        }
    }

    fn aged(&self, n: u32) -> Self {
        Self {
            xbar: self.xbar,
            age: self.age.map(|d| (d + 1).min(n)),
        }
    }

    /// Same ages, both samples flipped.
    pub fn flipped(&self) -> Self {
        Self {
            xbar: self.xbar.map(|x| 1 - x),
            age: self.age,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Idle = 0,
    PullSensor1 = 1,
    PullSensor2 = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Idle, Action::PullSensor1, Action::PullSensor2];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Zero-based index of the pulled sensor.
    pub fn sensor(self) -> Option<usize> {
        match self {
            Action::Idle => None,
            Action::PullSensor1 => Some(0),
            Action::PullSensor2 => Some(1),
        }
    }
}

/// Bijection between [`TrackingState`] and `0..4N^2`, lexicographic in
/// `(xbar1, xbar2, d1, d2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    n: u32,
}

impl StateSpace {
    pub fn new(n: u32) -> Self {
        Self { n }
    }

    pub fn truncation(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        4 * (self.n as usize).pow(2)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn index(&self, s: &TrackingState) -> usize {
        let n = self.n as usize;
        debug_assert!((1..=self.n).contains(&s.age[0]) && (1..=self.n).contains(&s.age[1]));
        ((s.xbar[0] as usize * 2 + s.xbar[1] as usize) * n + (s.age[0] as usize - 1)) * n
            + (s.age[1] as usize - 1)
    }

    #[inline]
    pub fn state(&self, idx: usize) -> TrackingState {
        let n = self.n as usize;
        let d2 = idx % n;
        let d1 = (idx / n) % n;
        let x = idx / (n * n);
        TrackingState::new((x / 2) as u8, (x % 2) as u8, d1 as u32 + 1, d2 as u32 + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = TrackingState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

pub fn enumerate_states(params: &SystemParams) -> Vec<TrackingState> {
    StateSpace::new(params.n).iter().collect()
}

/// Next-slot observable state given the hypothesized current source states `x`.
///
/// A successful pull records the sources' current values (before they
/// transition) with age 1; everything not refreshed ages by one slot,
/// saturating at `N`.
pub fn observation_kernel(
    params: &SystemParams,
    s: &TrackingState,
    a: Action,
    x: [u8; 2],
) -> Vec<(TrackingState, f64)> {
    let aged = s.aged(params.n);
    let Some(i) = a.sensor() else {
        return vec![(aged, 1.0)];
    };
    let j = 1 - i;
    let (q, rho) = params.pull_params(i);

    let mut both = aged;
    both.xbar = x;
    both.age = [1, 1];

    let mut own = aged;
    own.xbar[i] = x[i];
    own.age[i] = 1;
    debug_assert_eq!(own.age[j], aged.age[j]);

    vec![(aged, 1.0 - q), (both, q * rho), (own, q * (1.0 - rho))]
}

/// Sparse transition rows of the truncated belief MDP, one per `(state, action)`.
///
/// Equal to marginalizing [`observation_kernel`] over the hypothesized source
/// states with weights `Pr{X_i | s}`, but each outcome family is summed only
/// over the sources it records, so idle rows are exactly 1.
pub fn build_kernel(params: &SystemParams) -> Vec<Vec<(usize, f64)>> {
    let space = StateSpace::new(params.n);
    let mut rows = Vec::with_capacity(space.len() * Action::ALL.len());
    for s in space.iter() {
        let b = [
            params.conditional_state_prob(&s, 0),
            params.conditional_state_prob(&s, 1),
        ];
        let aged = s.aged(params.n);
        for a in Action::ALL {
            let Some(i) = a.sensor() else {
                rows.push(vec![(space.index(&aged), 1.0)]);
                continue;
            };
            let (q, rho) = params.pull_params(i);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(7);
            row.push((space.index(&aged), 1.0 - q));
            for xi in 0..=1u8 {
                let pi = marginal(b[i], xi);
                let mut own = aged;
                own.xbar[i] = xi;
                own.age[i] = 1;
                row.push((space.index(&own), q * (1.0 - rho) * pi));
                for xj in 0..=1u8 {
                    let mut x = [0u8; 2];
                    x[i] = xi;
                    x[1 - i] = xj;
                    let both = TrackingState { xbar: x, age: [1, 1] };
                    row.push((space.index(&both), q * rho * pi * marginal(b[1 - i], xj)));
                }
            }
            row.retain(|e| e.1 > 0.0);
            rows.push(merge_row(row));
        }
    }
    rows
}

/// Reference composition: sum over `(x1, x2)` of
/// `observation_kernel(s, a, x) * Pr{x1 | s} * Pr{x2 | s}`.
pub fn marginalized_row(params: &SystemParams, s: &TrackingState, a: Action) -> Vec<(usize, f64)> {
    let space = StateSpace::new(params.n);
    let b = [params.conditional_state_prob(s, 0), params.conditional_state_prob(s, 1)];
    let mut row = Vec::with_capacity(12);
    for x1 in 0..=1u8 {
        for x2 in 0..=1u8 {
            let px = marginal(b[0], x1) * marginal(b[1], x2);
            for (next, pr) in observation_kernel(params, s, a, [x1, x2]) {
                if pr * px > 0.0 {
                    row.push((space.index(&next), pr * px));
                }
            }
        }
    }
    merge_row(row)
}

#[inline]
fn marginal(b1: f64, x: u8) -> f64 {
    if x == 1 {
        b1
    } else {
        1.0 - b1
    }
}

fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, p) in row {
        match out.last_mut() {
            Some((k, acc)) if *k == j => *acc += p,
            _ => out.push((j, p)),
        }
    }
    out
}

/// Expected weighted distortion under MMD estimation plus the transmission cost.
pub fn build_cost(params: &SystemParams) -> Vec<f64> {
    let space = StateSpace::new(params.n);
    let mut cost = Vec::with_capacity(space.len() * Action::ALL.len());
    for s in space.iter() {
        let distortion: f64 = (0..2)
            .map(|i| {
                let b = params.conditional_state_prob(&s, i);
                params.w[i] * params.distortions[i].min_expected_distortion(b)
            })
            .sum();
        for a in Action::ALL {
            cost.push(distortion + transmission_cost(params, a));
        }
    }
    cost
}

/// Weighted age plus transmission cost.
pub fn build_age_cost(params: &SystemParams) -> Vec<f64> {
    let space = StateSpace::new(params.n);
    let mut cost = Vec::with_capacity(space.len() * Action::ALL.len());
    for s in space.iter() {
        let age = params.w[0] * s.age[0] as f64 + params.w[1] * s.age[1] as f64;
        for a in Action::ALL {
            cost.push(age + transmission_cost(params, a));
        }
    }
    cost
}

#[inline]
fn transmission_cost(params: &SystemParams, a: Action) -> f64 {
    if a == Action::Idle {
        0.0
    } else {
        params.alpha
    }
}

/// The kernel together with both cost tables.
#[derive(Debug, Clone)]
pub struct TrackingModel {
    pub params: SystemParams,
    pub space: StateSpace,
    /// MDP with the distortion cost.
    pub mdp: FiniteMdp,
    /// Same kernel with the age cost.
    pub age_mdp: FiniteMdp,
}

impl TrackingModel {
    pub fn build(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let space = StateSpace::new(params.n);
        let kernel = build_kernel(params);
        let mdp = FiniteMdp::new(space.len(), Action::ALL.len(), kernel, build_cost(params))?;
        let age_mdp = mdp.with_cost(build_age_cost(params))?;
        Ok(Self {
            params: params.clone(),
            space,
            mdp,
            age_mdp,
        })
    }

    /// Index of `(0, 0, 1, 1)`, the documented start state for evaluations.
    pub fn start_state(&self) -> usize {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn fig2(n: u32) -> SystemParams {
        SystemParams::new([0.7, 0.7], [0.8, 0.6], 0.4, 0.7, 0.5)
            .unwrap()
            .with_truncation(n)
            .unwrap()
    }

    fn dense_row(rows: &[Vec<(usize, f64)>], s: usize, a: Action) -> HashMap<usize, f64> {
        rows[s * 3 + a.index()].iter().copied().collect()
    }

    #[test]
    fn state_counts() {
        assert_eq!(enumerate_states(&fig2(30)).len(), 3600);
        assert_eq!(enumerate_states(&fig2(2)).len(), 16);
        assert_eq!(enumerate_states(&fig2(3)).len(), 36);
        assert_eq!(enumerate_states(&fig2(30))[0], TrackingState::new(0, 0, 1, 1));
    }

    #[test]
    fn index_is_bijective_and_lexicographic() {
        let space = StateSpace::new(5);
        let states: Vec<_> = space.iter().collect();
        let mut sorted = states.clone();
        sorted.sort();
        assert_eq!(states, sorted);
        for (i, s) in states.iter().enumerate() {
            assert_eq!(space.index(s), i);
        }
    }

    #[test]
    fn conditional_probability_examples() {
        let mut p = fig2(30);
        p.sources[0].p = 0.9;
        assert!((p.conditional_state_prob(&TrackingState::new(1, 0, 1, 1), 0) - 0.9).abs() < 1e-15);
        p.sources[0].p = 0.7;
        assert!((p.conditional_state_prob(&TrackingState::new(0, 0, 2, 1), 0) - 0.42).abs() < 1e-12);
        p.sources[0].p = 0.5;
        for d in 1..=30 {
            assert_eq!(p.conditional_state_prob(&TrackingState::new(1, 1, d, 1), 0), 0.5);
        }
    }

    #[test]
    fn conditional_matches_belief_module() {
        let p = fig2(30);
        for s in StateSpace::new(30).iter() {
            for i in 0..2 {
                let b = crate::belief::Belief::closed_form(&p.sources[i], s.xbar[i], s.age[i])
                    .unwrap()
                    .value();
                assert_eq!(p.conditional_state_prob(&s, i), b);
            }
        }
    }

    #[test]
    fn observation_kernel_examples() {
        let p = fig2(30);
        let s = TrackingState::new(0, 1, 4, 30);
        let idle = observation_kernel(&p, &s, Action::Idle, [1, 1]);
        assert_eq!(idle, vec![(TrackingState::new(0, 1, 5, 30), 1.0)]);

        let pull = observation_kernel(&p, &s, Action::PullSensor1, [1, 0]);
        let probs: Vec<f64> = pull.iter().map(|o| o.1).collect();
        for (got, want) in probs.iter().zip([0.2, 0.32, 0.48]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(pull[0].0, TrackingState::new(0, 1, 5, 30));
        assert_eq!(pull[1].0, TrackingState::new(1, 0, 1, 1));
        assert_eq!(pull[2].0, TrackingState::new(1, 1, 1, 30));

        let mut certain = p.clone();
        certain.q[1] = 1.0;
        certain.rho21 = 1.0;
        let out: Vec<_> = observation_kernel(&certain, &TrackingState::new(0, 0, 30, 30), Action::PullSensor2, [1, 1])
            .into_iter()
            .filter(|o| o.1 > 0.0)
            .collect();
        assert_eq!(out, vec![(TrackingState::new(1, 1, 1, 1), 1.0)]);
    }

    #[test]
    fn idle_rows_are_deterministic() {
        let p = fig2(6);
        let rows = build_kernel(&p);
        for s in 0..StateSpace::new(6).len() {
            let row = &rows[s * 3];
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].1, 1.0);
        }
    }

    #[test]
    fn kernel_matches_marginalized_observation_kernel() {
        for params in [fig2(7), {
            let mut p = fig2(5);
            p.sources[1].p = 1.0;
            p.q = [1.0, 0.3];
            p.rho21 = 0.0;
            p
        }] {
            let space = StateSpace::new(params.n);
            let rows = build_kernel(&params);
            for s in space.iter() {
                for a in Action::ALL {
                    let got = dense_row(&rows, space.index(&s), a);
                    let want: HashMap<usize, f64> = marginalized_row(&params, &s, a).into_iter().collect();
                    assert_eq!(got.len(), want.len());
                    for (j, p) in want {
                        assert!((got[&j] - p).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn pull_rows_are_small() {
        let rows = build_kernel(&fig2(30));
        assert!(rows.iter().all(|r| r.len() <= 12));
    }

    #[test]
    fn uncorrelated_pull_leaves_other_source_alone() {
        // Independent single-source oracle: without correlation, pulling sensor 1
        // moves source 2's fields exactly as idling would.
        let mut p = fig2(8);
        p.rho12 = 0.0;
        p.rho21 = 0.0;
        let space = StateSpace::new(8);
        let rows = build_kernel(&p);
        for s in space.iter() {
            let row = dense_row(&rows, space.index(&s), Action::PullSensor1);
            let mut marg: HashMap<(u8, u32), f64> = HashMap::new();
            for (j, pr) in row {
                let t = space.state(j);
                *marg.entry((t.xbar[1], t.age[1])).or_default() += pr;
            }
            let expect = (s.xbar[1], (s.age[1] + 1).min(8));
            assert_eq!(marg.len(), 1);
            assert!((marg[&expect] - 1.0).abs() < 1e-12);

            let mut own: HashMap<(u8, u32), f64> = HashMap::new();
            for (j, pr) in dense_row(&rows, space.index(&s), Action::PullSensor1) {
                let t = space.state(j);
                *own.entry((t.xbar[0], t.age[0])).or_default() += pr;
            }
            let b = p.conditional_state_prob(&s, 0);
            let fail = (s.xbar[0], (s.age[0] + 1).min(8));
            let expect_own = [((1, 1), p.q[0] * b), ((0, 1), p.q[0] * (1.0 - b))];
            assert!((own.get(&fail).copied().unwrap_or(0.0) - (1.0 - p.q[0])).abs() < 1e-12);
            for (k, v) in expect_own {
                assert!((own.get(&k).copied().unwrap_or(0.0) - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cost_examples() {
        let mut p = SystemParams::new([0.9, 0.9], [0.8, 0.6], 0.4, 0.7, 0.5).unwrap();
        let space = StateSpace::new(p.n);
        let cost = build_cost(&p);
        let s = space.index(&TrackingState::new(1, 1, 1, 1));
        assert!((cost[s * 3] - 0.2).abs() < 1e-12);
        assert!((cost[s * 3 + 1] - 0.7).abs() < 1e-12);

        p.sources[0].p = 0.5;
        p.sources[1].p = 0.5;
        let cost = build_cost(&p);
        for s in 0..space.len() {
            assert_eq!(cost[s * 3], 1.0);
        }
    }

    #[test]
    fn age_cost_examples() {
        let p = fig2(30);
        let space = StateSpace::new(30);
        let cost = build_age_cost(&p);
        for x1 in 0..=1 {
            for x2 in 0..=1 {
                let s = space.index(&TrackingState::new(x1, x2, 3, 5));
                assert_eq!(cost[s * 3], 8.0);
                let s = space.index(&TrackingState::new(x1, x2, 1, 1));
                assert_eq!(cost[s * 3 + 1], 2.5);
            }
        }
    }

    #[test]
    fn idle_reaches_saturated_state_only_with_matching_samples() {
        // Idling freezes the samples, so (0,0,N,N) is reached from (x1,x2,*,*)
        // only when x1 = x2 = 0; any state reaches it once pulls are allowed.
        let p = fig2(5);
        let space = StateSpace::new(5);
        let rows = build_kernel(&p);
        let target = space.index(&TrackingState::new(0, 0, 5, 5));
        let reach = |start: usize, actions: &[Action]| {
            let mut dist = vec![0.0; space.len()];
            dist[start] = 1.0;
            for a in actions {
                let mut next = vec![0.0; space.len()];
                for (s, &m) in dist.iter().enumerate() {
                    if m > 0.0 {
                        for &(j, pr) in &rows[s * 3 + a.index()] {
                            next[j] += m * pr;
                        }
                    }
                }
                dist = next;
            }
            dist[target]
        };
        let idle = [Action::Idle; 5];
        let mut mixed = vec![Action::PullSensor1, Action::PullSensor2];
        mixed.extend([Action::Idle; 5]);
        for s in space.iter() {
            let i = space.index(&s);
            assert_eq!(reach(i, &idle) > 0.0, s.xbar == [0, 0]);
            assert!(reach(i, &mixed) > 0.0);
        }
    }

    fn arb_params() -> impl Strategy<Value = SystemParams> {
        (
            proptest::array::uniform2(0.0f64..=1.0),
            proptest::array::uniform2(0.0f64..=1.0),
            0.0f64..=1.0,
            0.0f64..=1.0,
            0.0f64..3.0,
            2u32..9,
            proptest::array::uniform2(0.0f64..3.0),
        )
            .prop_map(|(p, q, r12, r21, alpha, n, w)| {
                let mut params = SystemParams::new(p, q, r12, r21, alpha)
                    .unwrap()
                    .with_truncation(n)
                    .unwrap()
                    .with_distortions([DistortionMatrix::d1(), DistortionMatrix::d2()]);
                params.w = w;
                params
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn kernel_is_stochastic(params in arb_params()) {
            for row in build_kernel(&params) {
                let s: f64 = row.iter().map(|e| e.1).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|e| e.1 > 0.0));
            }
        }

        #[test]
        fn cost_bounds(params in arb_params()) {
            let hi = params.w[0] * params.distortions[0].max_entry()
                + params.w[1] * params.distortions[1].max_entry()
                + params.alpha;
            for c in build_cost(&params) {
                prop_assert!((0.0..=hi + 1e-12).contains(&c));
            }
        }

        #[test]
        fn relabel_symmetry(mut params in arb_params()) {
            params.distortions = [DistortionMatrix::real_time_error(); 2];
            let space = StateSpace::new(params.n);
            let rows = build_kernel(&params);
            let cost = build_cost(&params);
            for s in space.iter() {
                let (i, fi) = (space.index(&s), space.index(&s.flipped()));
                for a in Action::ALL {
                    let row = dense_row(&rows, i, a);
                    let frow = dense_row(&rows, fi, a);
                    prop_assert_eq!(row.len(), frow.len());
                    for (j, pr) in row {
                        let fj = space.index(&space.state(j).flipped());
                        prop_assert!((frow[&fj] - pr).abs() < 1e-12);
                    }
                    prop_assert!((cost[i * 3 + a.index()] - cost[fi * 3 + a.index()]).abs() < 1e-12);
                }
            }
        }
    }
}
