//! Named scenario presets for the four benchmark experiments.
//!
//! All presets use unit weights, `N = 30`, an RVIA tolerance of `1e-3` and
//! `alpha = 0.5` unless swept. fig2's reference point is `alpha = 0.25`,
//! where the optimal policy still pulls.
//! Grid densities are a plotting choice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionMatrix;
use crate::error::{Error, Result};
use crate::model::SystemParams;

/// Parameter varied along a sweep. `Rho`, `P` and `Q` move both sources together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    Alpha,
    Rho,
    P,
    Q,
}

impl SweptParam {
    pub fn name(self) -> &'static str {
        match self {
            SweptParam::Alpha => "alpha",
            SweptParam::Rho => "rho",
            SweptParam::P => "p",
            SweptParam::Q => "q",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemParams, value: f64) -> Result<SystemParams> {
        let mut p = base.clone();
        match self {
            SweptParam::Alpha => p.alpha = value,
            SweptParam::Rho => {
                p.rho12 = value;
                p.rho21 = value;
            }
            SweptParam::P => {
                p.sources[0].p = value;
                p.sources[1].p = value;
            }
            SweptParam::Q => p.q = [value, value],
        }
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for SweptParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweptParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweptParam::Alpha),
            "rho" => Ok(SweptParam::Rho),
            "p" => Ok(SweptParam::P),
            "q" => Ok(SweptParam::Q),
            other => Err(Error::Unknown {
                kind: "swept parameter",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    /// Parameters at the preset's reference point; the swept value is `base_value`.
    pub base: SystemParams,
    pub parameter: SweptParam,
    pub base_value: f64,
    pub grid: Vec<f64>,
}

impl Preset {
    pub const NAMES: [&'static str; 5] = ["fig2", "fig3a", "fig3b", "fig4", "fig5"];

    pub fn by_name(name: &str) -> Result<Self> {
        let tenths = |lo: u32, hi: u32| (lo..=hi).map(|k| k as f64 / 10.0).collect::<Vec<_>>();
        let preset = match name {
            "fig2" => Preset {
                name: "fig2",
                base: SystemParams::new([0.7, 0.7], [0.8, 0.6], 0.4, 0.7, 0.25)?,
                parameter: SweptParam::Alpha,
                base_value: 0.25,
                grid: (0..=8).map(|k| k as f64 * 0.25).collect(),
            },
            "fig3a" => Preset {
                name: "fig3a",
                base: SystemParams::new([0.9, 0.9], [0.9, 0.9], 0.5, 0.5, 0.5)?,
                parameter: SweptParam::Rho,
                base_value: 0.5,
                grid: tenths(0, 10),
            },
            "fig3b" => Preset {
                name: "fig3b",
                base: SystemParams::new([0.9, 0.9], [0.9, 0.9], 0.5, 0.5, 0.5)?
                    .with_distortions([DistortionMatrix::d1(), DistortionMatrix::d2()]),
                parameter: SweptParam::Rho,
                base_value: 0.5,
                grid: tenths(0, 10),
            },
            "fig4" => Preset {
                name: "fig4",
                base: SystemParams::new([0.7, 0.7], [0.8, 0.6], 0.4, 0.7, 0.5)?,
                parameter: SweptParam::P,
                base_value: 0.7,
                grid: tenths(1, 9),
            },
            "fig5" => Preset {
                name: "fig5",
                base: SystemParams::new([0.9, 0.9], [0.8, 0.8], 0.8, 0.8, 0.5)?,
                parameter: SweptParam::Q,
                base_value: 0.8,
                grid: tenths(1, 10),
            },
            other => {
                return Err(Error::Unknown {
                    kind: "preset",
                    name: other.to_string(),
                })
            }
        };
        Ok(preset)
    }

    pub fn all() -> Vec<Preset> {
        Self::NAMES
            .iter()
            .map(|n| Self::by_name(n).expect("built-in preset"))
            .collect()
    }

    pub fn params_at(&self, value: f64) -> Result<SystemParams> {
        self.parameter.apply(&self.base, value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        for p in Preset::all() {
            assert!(!p.grid.is_empty());
            assert!(p.grid.windows(2).all(|w| w[0] < w[1]));
            assert!(p.grid.iter().any(|v| (v - p.base_value).abs() < 1e-12), "{}", p.name);
            assert_eq!(p.params_at(p.base_value).unwrap(), p.base);
            assert_eq!(p.base.n, 30);
            assert_eq!(p.base.w, [1.0, 1.0]);
        }
    }

    #[test]
    fn fig2_grid() {
        let p = Preset::by_name("fig2").unwrap();
        assert_eq!(p.grid.len(), 9);
        assert_eq!(p.grid[8], 2.0);
        assert!(Preset::by_name("fig9").is_err());
    }

    #[test]
    fn sweeps_move_both_sources() {
        let base = Preset::by_name("fig4").unwrap();
        let p = base.params_at(0.3).unwrap();
        assert_eq!([p.sources[0].p, p.sources[1].p], [0.3, 0.3]);
        let q = SweptParam::Q.apply(&p, 0.4).unwrap();
        assert_eq!(q.q, [0.4, 0.4]);
        assert!(SweptParam::Q.apply(&p, 1.4).is_err());
        assert_eq!("rho".parse::<SweptParam>().unwrap(), SweptParam::Rho);
    }
}
