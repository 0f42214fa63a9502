//! Binary symmetric Markov sources.
//!
//! A source stays in its current state with probability `p` and flips with
//! probability `1 - p`. States are the bits `0` and `1`, carried as `u8`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Self-transition probability.
    pub p: f64,
    /// Source index, 1 or 2.
    pub id: u8,
}

impl SourceModel {
    pub fn new(id: u8, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} is not a probability")));
        }
        if !(1..=2).contains(&id) {
            return Err(Error::param("id", format!("source index {id} not in 1..=2")));
        }
        Ok(Self { p, id })
    }

    /// `2p - 1`, the second eigenvalue of the one-step matrix.
    #[inline]
    pub fn correlation(&self) -> f64 {
        2.0 * self.p - 1.0
    }

    #[inline]
    pub fn one_step_prob(&self, from: u8, to: u8) -> f64 {
        debug_assert!(from <= 1 && to <= 1);
        if from == to {
            self.p
        } else {
            1.0 - self.p
        }
    }

    /// Probability of moving `from -> to` in exactly `n` steps.
    pub fn n_step_prob(&self, from: u8, to: u8, n: u32) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroSteps);
        }
        debug_assert!(from <= 1 && to <= 1);
        let lambda = self.correlation().powi(n as i32);
        Ok(if from == to {
            0.5 * (1.0 + lambda)
        } else {
            0.5 * (1.0 - lambda)
        })
    }

    /// Stationary probability of state 1 (always 1/2 for a symmetric chain).
    pub fn steady_state(&self) -> f64 {
        0.5
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, current: u8, rng: &mut R) -> u8 {
        debug_assert!(current <= 1);
        // Draw even at p in {0, 1} so the stream position is policy independent.
        let u: f64 = rng.random();
        if u < self.p {
            current
        } else {
            1 - current
        }
    }
}
