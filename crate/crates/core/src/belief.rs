//! Monitor-side belief `Pr{X = 1}` about a single source.
//!
//! Two equivalent forms are provided: the one-slot recursive update used by an
//! online monitor, and the closed form in terms of the last sample and its
//! age, which is what makes the finite-state reduction possible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::SourceModel;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(f64);

impl Belief {
    pub fn new(b: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::param("belief", format!("{b} is not a probability")));
        }
        Ok(Self(b))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// One-slot update given the next observation `(last_sample_next, age_next)`.
    ///
    /// A fresh sample (age 1) pins the belief to one transition away from the
    /// sample; otherwise the belief is propagated through the chain.
    pub fn step(self, m: &SourceModel, age_next: u32, last_sample_next: u8) -> Belief {
        debug_assert!(age_next >= 1);
        if age_next == 1 {
            if last_sample_next == 1 {
                Belief(m.p)
            } else {
                Belief(1.0 - m.p)
            }
        } else {
            Belief(self.0 * m.p + (1.0 - self.0) * (1.0 - m.p))
        }
    }

    /// Belief after `age` transitions since the source was seen in `last_sample`.
    pub fn closed_form(m: &SourceModel, last_sample: u8, age: u32) -> Result<Belief> {
        if age == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(Belief(closed_form_unchecked(m.p, last_sample, age)))
    }
}

#[inline]
pub(crate) fn closed_form_unchecked(p: f64, last_sample: u8, age: u32) -> f64 {
    let lambda = (2.0 * p - 1.0).powi(age as i32);
    // `1 - hi` is exact for hi in [0.5, 1], so the two branches sum to exactly 1.
    let hi = 0.5 * (1.0 + lambda.abs());
    if (lambda >= 0.0) == (last_sample == 1) {
        hi
    } else {
        1.0 - hi
    }
}
