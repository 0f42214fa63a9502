//! TOML experiment configuration.
//!
//! ```toml
//! preset = "fig2"            # optional starting point
//! policy = "optimal_rvia"    # used by `simulate`
//!
//! [params]                   # every key optional when a preset is given
//! p1 = 0.7
//! p2 = 0.7
//! q1 = 0.8
//! q2 = 0.6
//! rho12 = 0.4
//! rho21 = 0.7
//! w1 = 1.0
//! w2 = 1.0
//! alpha = 0.5
//! N = 30
//! distortion1 = "real_time_error"     # "d1", "d2" or a 2x2 array [[f(0,0), f(0,1)], [f(1,0), f(1,1)]]
//! distortion2 = [[0.0, 1.0], [5.0, 0.0]]
//! transpose = false                   # read matrices as [estimate][actual]
//!
//! [solver]
//! epsilon = 1e-3
//! max_iters = 1000000
//!
//! [sim]
//! horizon = 1010000                   # total slots, warmup included
//! warmup = 10000
//! seed = 1
//! replications = 10
//!
//! [sweep]
//! parameter = "alpha"                 # alpha | rho | p | q
//! values = [0.0, 0.5, 1.0]
//! policies = ["optimal_rvia", "max_age_first"]
//! output = "sweep.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distortion::DistortionMatrix;
use crate::error::{Error, Result};
use crate::experiments::presets::{Preset, SweptParam};
use crate::markov::SourceModel;
use crate::model::SystemParams;
use crate::policies::PolicyKind;
use crate::solver::RviaOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistortionSpec {
    Preset(String),
    Matrix([[f64; 2]; 2]),
}

impl DistortionSpec {
    pub fn resolve(&self, transpose: bool) -> Result<DistortionMatrix> {
        let m = match self {
            DistortionSpec::Preset(name) => DistortionMatrix::preset(name)?,
            DistortionSpec::Matrix(e) => DistortionMatrix::new(*e)?,
        };
        Ok(if transpose { m.transposed() } else { m })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub rho12: Option<f64>,
    pub rho21: Option<f64>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub distortion1: Option<DistortionSpec>,
    pub distortion2: Option<DistortionSpec>,
    pub transpose: Option<bool>,
}

impl ParamsConfig {
    /// Applies the set keys on top of `base`, or builds from scratch when `base` is `None`.
    pub fn resolve(&self, base: Option<&SystemParams>) -> Result<SystemParams> {
        let need = |v: Option<f64>, fallback: Option<f64>, key: &str| {
            v.or(fallback)
                .ok_or_else(|| Error::Config(format!("missing key `params.{key}` (no preset given)")))
        };
        let p1 = need(self.p1, base.map(|b| b.sources[0].p), "p1")?;
        let p2 = need(self.p2, base.map(|b| b.sources[1].p), "p2")?;
        let transpose = self.transpose.unwrap_or(false);
        let distortion = |spec: &Option<DistortionSpec>, i: usize| -> Result<DistortionMatrix> {
            match spec {
                Some(s) => s.resolve(transpose),
                None => Ok(base.map_or(DistortionMatrix::real_time_error(), |b| b.distortions[i])),
            }
        };
        let params = SystemParams {
            sources: [SourceModel::new(1, p1)?, SourceModel::new(2, p2)?],
            rho12: need(self.rho12, base.map(|b| b.rho12), "rho12")?,
            rho21: need(self.rho21, base.map(|b| b.rho21), "rho21")?,
            q: [
                need(self.q1, base.map(|b| b.q[0]), "q1")?,
                need(self.q2, base.map(|b| b.q[1]), "q2")?,
            ],
            w: [
                self.w1.or(base.map(|b| b.w[0])).unwrap_or(1.0),
                self.w2.or(base.map(|b| b.w[1])).unwrap_or(1.0),
            ],
            alpha: need(self.alpha, base.map(|b| b.alpha), "alpha")?,
            distortions: [distortion(&self.distortion1, 0)?, distortion(&self.distortion2, 1)?],
            n: self.n.or(base.map(|b| b.n)).unwrap_or(30),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    pub replications: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon: 1_010_000,
            warmup: 10_000,
            seed: 1,
            replications: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigToml {
    pub horizon: Option<u64>,
    pub warmup: Option<u64>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
    pub policies: Option<Vec<String>>,
    pub output: Option<PathBuf>,
}

/// Raw file contents; every section optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub policy: Option<String>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sim: SimConfigToml,
    #[serde(default)]
    pub sweep: SweepConfig,
}

/// Sweep description after defaults are filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: SystemParams,
    pub parameter: SweptParam,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
    pub solver: RviaOptions,
    /// `None` skips simulation; analytic columns are still filled.
    pub sim: Option<SimSettings>,
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("sweep grid must be strictly increasing".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("sweep needs at least one policy".into()));
        }
        for v in &self.values {
            self.parameter.apply(&self.base, *v)?;
        }
        Ok(())
    }

    /// Sweep of a built-in preset with its default policy list.
    pub fn from_preset(preset: &Preset, sim: Option<SimSettings>) -> Self {
        Self {
            name: preset.name.to_string(),
            base: preset.base.clone(),
            parameter: preset.parameter,
            values: preset.grid.clone(),
            policies: DEFAULT_SWEEP_POLICIES.to_vec(),
            solver: RviaOptions::default(),
            sim,
            output: None,
        }
    }
}

pub const DEFAULT_SWEEP_POLICIES: [PolicyKind; 4] = [
    PolicyKind::OptimalRvia,
    PolicyKind::AgeOptimalRvia,
    PolicyKind::MaxAgeFirst,
    PolicyKind::AlwaysIdle,
];

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub preset: Option<Preset>,
    pub params: SystemParams,
    pub policy: PolicyKind,
    pub solver: RviaOptions,
    pub sim: SimSettings,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        // Whitespace and comments alone count as empty.
        if cfg == Self::default() {
            return Err(Error::Config("configuration file is empty".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let preset = self.preset.as_deref().map(Preset::by_name).transpose()?;
        let params = self.params.resolve(preset.as_ref().map(|p| &p.base))?;
        let policy = self
            .policy
            .as_deref()
            .unwrap_or(PolicyKind::OptimalRvia.name())
            .parse()?;
        let defaults = RviaOptions::default();
        let solver = RviaOptions {
            epsilon: self.solver.epsilon.unwrap_or(defaults.epsilon),
            max_iters: self.solver.max_iters.unwrap_or(defaults.max_iters),
        };
        let d = SimSettings::default();
        let sim = SimSettings {
            horizon: self.sim.horizon.unwrap_or(d.horizon),
            warmup: self.sim.warmup.unwrap_or(d.warmup),
            seed: self.sim.seed.unwrap_or(d.seed),
            replications: self.sim.replications.unwrap_or(d.replications),
        };

        let sweep_given = self.sweep != SweepConfig::default();
        let sweep = if sweep_given || preset.is_some() {
            let parameter = match (&self.sweep.parameter, &preset) {
                (Some(name), _) => Some(name.parse::<SweptParam>()?),
                (None, Some(p)) => Some(p.parameter),
                (None, None) => None,
            };
            let values = match (&self.sweep.values, &preset) {
                (Some(v), _) => Some(v.clone()),
                (None, Some(p)) if Some(p.parameter) == parameter => Some(p.grid.clone()),
                _ => None,
            };
            match (parameter, values) {
                (Some(parameter), Some(values)) => {
                    let policies = match &self.sweep.policies {
                        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
                        None => DEFAULT_SWEEP_POLICIES.to_vec(),
                    };
                    let spec = SweepSpec {
                        name: self
                            .preset
                            .clone()
                            .unwrap_or_else(|| format!("custom_{}", parameter.name())),
                        base: params.clone(),
                        parameter,
                        values,
                        policies,
                        solver,
                        sim: Some(sim),
                        output: self.sweep.output.clone(),
                    };
                    spec.validate()?;
                    Some(spec)
                }
                _ if sweep_given => {
                    return Err(Error::Config(
                        "sweep needs `sweep.parameter` and `sweep.values` (or a preset)".into(),
                    ))
                }
                _ => None,
            }
        } else {
            None
        };

        Ok(Resolved {
            preset,
            params,
            policy,
            solver,
            sim,
            sweep,
        })
    }
}
