//! Monitor policies: the distortion-optimal table and the benchmarks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, StateSpace, TrackingModel, TrackingState};
use crate::solver::{rvia, PolicyTable, RviaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// RVIA on the distortion cost.
    OptimalRvia,
    /// RVIA on the age cost, run under the distortion cost.
    AgeOptimalRvia,
    /// Pull the sensor with the largest weighted age.
    MaxAgeFirst,
    AlwaysIdle,
    UniformRandom,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::OptimalRvia,
        PolicyKind::AgeOptimalRvia,
        PolicyKind::MaxAgeFirst,
        PolicyKind::AlwaysIdle,
        PolicyKind::UniformRandom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OptimalRvia => "optimal_rvia",
            PolicyKind::AgeOptimalRvia => "age_optimal_rvia",
            PolicyKind::MaxAgeFirst => "max_age_first",
            PolicyKind::AlwaysIdle => "always_idle",
            PolicyKind::UniformRandom => "uniform_random",
        }
    }

    pub fn needs_table(self) -> bool {
        matches!(self, PolicyKind::OptimalRvia | PolicyKind::AgeOptimalRvia)
    }

    pub fn is_deterministic(self) -> bool {
        self != PolicyKind::UniformRandom
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "policy",
                name: s.to_string(),
            })
    }
}

/// Weighted max-age-first: `argmax_i w_i * age_i`, ties to sensor 1.
pub fn max_age_first(state: &TrackingState, w: [f64; 2]) -> Action {
    if w[1] * state.age[1] as f64 > w[0] * state.age[0] as f64 {
        Action::PullSensor2
    } else {
        Action::PullSensor1
    }
}

/// Chooses the monitor's action from its observable state.
pub fn decide(
    kind: PolicyKind,
    state: &TrackingState,
    space: &StateSpace,
    table: Option<&PolicyTable>,
    w: [f64; 2],
    rng: Option<&mut dyn RngCore>,
) -> Result<Action> {
    match kind {
        PolicyKind::OptimalRvia | PolicyKind::AgeOptimalRvia => {
            let table = table.ok_or(Error::MissingTable(kind.name()))?;
            let a = table.action(space.index(state));
            Action::from_index(a).ok_or_else(|| Error::param("policy table", format!("action {a}")))
        }
        PolicyKind::MaxAgeFirst => Ok(max_age_first(state, w)),
        PolicyKind::AlwaysIdle => Ok(Action::Idle),
        PolicyKind::UniformRandom => {
            let rng = rng.ok_or(Error::MissingRng(kind.name()))?;
            Ok(Action::ALL[rng.random_range(0..3)])
        }
    }
}

/// A policy kind bundled with its solved table, if it needs one.
#[derive(Debug, Clone)]
pub struct Policy {
    pub kind: PolicyKind,
    pub table: Option<PolicyTable>,
}

impl Policy {
    /// Builds the policy, solving RVIA for the table-backed kinds.
    pub fn solve(kind: PolicyKind, model: &TrackingModel, opts: &RviaOptions) -> Result<Self> {
        let table = match kind {
            PolicyKind::OptimalRvia => Some(rvia(&model.mdp, model.start_state(), opts)?),
            PolicyKind::AgeOptimalRvia => Some(rvia(&model.age_mdp, model.start_state(), opts)?),
            _ => None,
        };
        Ok(Self { kind, table })
    }

    pub fn with_table(kind: PolicyKind, table: PolicyTable) -> Self {
        Self {
            kind,
            table: Some(table),
        }
    }

    pub fn fixed(kind: PolicyKind) -> Result<Self> {
        if kind.needs_table() {
            return Err(Error::MissingTable(kind.name()));
        }
        Ok(Self { kind, table: None })
    }

    #[inline]
    pub fn decide<R: Rng + ?Sized>(
        &self,
        space: &StateSpace,
        state: &TrackingState,
        w: [f64; 2],
        rng: &mut R,
    ) -> Action {
        match (&self.table, self.kind) {
            (Some(t), _) => Action::from_index(t.action(space.index(state))).unwrap_or(Action::Idle),
            (None, PolicyKind::MaxAgeFirst) => max_age_first(state, w),
            (None, PolicyKind::UniformRandom) => Action::ALL[rng.random_range(0..3)],
            (None, _) => Action::Idle,
        }
    }

    /// Action per state index, or `None` for randomized policies.
    pub fn action_table(&self, space: &StateSpace, w: [f64; 2]) -> Option<Vec<usize>> {
        if let Some(t) = &self.table {
            return Some(t.actions.clone());
        }
        match self.kind {
            PolicyKind::MaxAgeFirst => Some(space.iter().map(|s| max_age_first(&s, w).index()).collect()),
            PolicyKind::AlwaysIdle => Some(vec![0; space.len()]),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_age_first_examples() {
        let s = TrackingState::new(0, 0, 3, 5);
        assert_eq!(max_age_first(&s, [1.0, 1.0]), Action::PullSensor2);
        assert_eq!(max_age_first(&s, [2.0, 1.0]), Action::PullSensor1);
        assert_eq!(max_age_first(&TrackingState::new(0, 1, 4, 4), [1.0, 1.0]), Action::PullSensor1);
    }

    #[test]
    fn max_age_first_never_idles() {
        let space = StateSpace::new(6);
        for s in space.iter() {
            for w in [[1.0, 1.0], [0.0, 1.0], [3.0, 0.5], [0.0, 0.0]] {
                assert_ne!(max_age_first(&s, w), Action::Idle);
            }
        }
    }

    #[test]
    fn decide_errors() {
        let space = StateSpace::new(4);
        let s = TrackingState::new(0, 0, 1, 1);
        assert!(matches!(
            decide(PolicyKind::OptimalRvia, &s, &space, None, [1.0; 2], None),
            Err(Error::MissingTable(_))
        ));
        assert!(matches!(
            decide(PolicyKind::UniformRandom, &s, &space, None, [1.0; 2], None),
            Err(Error::MissingRng(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = decide(PolicyKind::UniformRandom, &s, &space, None, [1.0; 2], Some(&mut rng)).unwrap();
        assert!(Action::ALL.contains(&a));
        assert_eq!(
            decide(PolicyKind::AlwaysIdle, &s, &space, None, [1.0; 2], None).unwrap(),
            Action::Idle
        );
    }

    #[test]
    fn names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("dqn".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn memoryless_sources_make_optimal_idle() {
        let params = SystemParams::new([0.5, 0.5], [0.8, 0.6], 0.4, 0.7, 0.5)
            .unwrap()
            .with_truncation(10)
            .unwrap();
        let model = TrackingModel::build(&params).unwrap();
        let policy = Policy::solve(PolicyKind::OptimalRvia, &model, &RviaOptions::default()).unwrap();
        assert!(policy.table.unwrap().actions.iter().all(|&a| a == 0));
    }
}
