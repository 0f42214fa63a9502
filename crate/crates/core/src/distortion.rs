//! Distortion functions and minimum-mean-distortion estimation.
//!
//! A [`DistortionMatrix`] is indexed `[actual][estimate]`, so `f(1, 0)` is
//! the penalty for estimating 0 while the source is in state 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistortionMatrix {
    entries: [[f64; 2]; 2],
}

impl DistortionMatrix {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param(
                "distortion",
                format!("entries must be finite and non-negative, got {entries:?}"),
            ));
        }
        Ok(Self { entries })
    }

    /// `1{x != x_hat}`.
    pub const fn real_time_error() -> Self {
        Self {
            entries: [[0.0, 1.0], [1.0, 0.0]],
        }
    }

    /// Asymmetric preset for source 1: a miss of state 0 costs 3, a miss of state 1 costs 1.
    pub const fn d1() -> Self {
        Self {
            entries: [[0.0, 3.0], [1.0, 0.0]],
        }
    }

    /// Asymmetric preset for source 2: a miss of state 1 costs 5.
    pub const fn d2() -> Self {
        Self {
            entries: [[0.0, 1.0], [5.0, 0.0]],
        }
    }

    /// Looks up `real_time_error`, `d1` or `d2`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "real_time_error" => Ok(Self::real_time_error()),
            "d1" => Ok(Self::d1()),
            "d2" => Ok(Self::d2()),
            other => Err(Error::Unknown {
                kind: "distortion preset",
                name: other.to_string(),
            }),
        }
    }

    pub fn transposed(&self) -> Self {
        let e = &self.entries;
        Self {
            entries: [[e[0][0], e[1][0]], [e[0][1], e[1][1]]],
        }
    }

    #[inline]
    pub fn get(&self, actual: u8, estimate: u8) -> f64 {
        self.entries[actual as usize][estimate as usize]
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Mean distortion of `estimate` when `Pr{X = 1} = belief`.
    #[inline]
    pub fn expected_distortion(&self, belief: f64, estimate: u8) -> f64 {
        belief * self.get(1, estimate) + (1.0 - belief) * self.get(0, estimate)
    }

    /// Estimate minimizing the mean distortion. Ties go to 0.
    #[inline]
    pub fn mmd_estimate(&self, belief: f64) -> u8 {
        if self.expected_distortion(belief, 1) < self.expected_distortion(belief, 0) {
            1
        } else {
            0
        }
    }

    /// Mean distortion under the MMD estimate.
    #[inline]
    pub fn min_expected_distortion(&self, belief: f64) -> f64 {
        self.expected_distortion(belief, self.mmd_estimate(belief))
    }
}

impl Default for DistortionMatrix {
    fn default() -> Self {
        Self::real_time_error()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RTE: DistortionMatrix = DistortionMatrix::real_time_error();

    #[test]
    fn expected_distortion_examples() {
        assert!((RTE.expected_distortion(0.3, 0) - 0.3).abs() < 1e-15);
        assert!((DistortionMatrix::d1().expected_distortion(0.6, 1) - 1.2).abs() < 1e-12);
        let f = DistortionMatrix::new([[0.2, 1.5], [4.0, 0.7]]).unwrap();
        assert_eq!(f.expected_distortion(1.0, 1), 0.7);
    }

    #[test]
    fn mmd_examples() {
        assert_eq!(RTE.mmd_estimate(0.8), 1);
        assert_eq!(DistortionMatrix::d1().mmd_estimate(0.6), 0);
        assert_eq!(DistortionMatrix::d1().mmd_estimate(0.80), 1);
    }

    #[test]
    fn d1_threshold_sweep() {
        // Exhaustive two-candidate comparison against the hand-derived threshold b > 0.75.
        let d1 = DistortionMatrix::d1();
        for k in 0..=100 {
            let b = k as f64 / 100.0;
            let c0 = b * 1.0;
            let c1 = (1.0 - b) * 3.0;
            let brute = if c1 < c0 { 1 } else { 0 };
            assert_eq!(d1.mmd_estimate(b), brute, "b = {b}");
            if k >= 76 {
                assert_eq!(brute, 1);
            } else if k <= 74 {
                assert_eq!(brute, 0);
            }
        }
    }

    #[test]
    fn real_time_error_tie_goes_to_zero() {
        assert_eq!(RTE.mmd_estimate(0.5), 0);
        assert_eq!(RTE.mmd_estimate(0.5 + 1e-12), 1);
    }

    #[test]
    fn presets_and_validation() {
        assert_eq!(DistortionMatrix::preset("d2").unwrap().get(1, 0), 5.0);
        assert!(DistortionMatrix::preset("nope").is_err());
        assert!(DistortionMatrix::new([[0.0, f64::INFINITY], [1.0, 0.0]]).is_err());
        assert_eq!(DistortionMatrix::d1().transposed().get(0, 1), 1.0);
    }

    proptest! {
        #[test]
        fn mmd_is_argmin(
            e in proptest::array::uniform2(proptest::array::uniform2(0.0f64..10.0)),
            b in 0.0f64..=1.0,
        ) {
            let f = DistortionMatrix::new(e).unwrap();
            let x = f.mmd_estimate(b);
            prop_assert!(f.expected_distortion(b, x) <= f.expected_distortion(b, 1 - x));
        }

        #[test]
        fn rte_is_map(b in 0.0f64..=1.0) {
            let expected = if b > 0.5 { 1 } else { 0 };
            prop_assert_eq!(RTE.mmd_estimate(b), expected);
        }

        #[test]
        fn scaling_invariance(
            e in proptest::array::uniform2(proptest::array::uniform2(0.0f64..10.0)),
            b in 0.0f64..=1.0,
            c in prop_oneof![Just(0.5f64), Just(2.0), Just(4.0), Just(0.25)],
        ) {
            let f = DistortionMatrix::new(e).unwrap();
            let scaled = DistortionMatrix::new(e.map(|r| r.map(|v| v * c))).unwrap();
            prop_assert_eq!(f.mmd_estimate(b), scaled.mmd_estimate(b));
        }
    }
}
