//! JSON run configuration.
//!
//! Infinity is written as the string `"inf"` wherever a real is accepted.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cost::{CostSpec, Numerics, PenaltyTable, Policy};
use crate::error::{Error, Result};
use crate::levy::{JumpDist, JumpMeasure, LevyModel, TabulatedDensity};
use crate::mc::SimConfig;
use crate::optimize::{Objective, SearchSpec};

/// A real that may be given as a JSON number or as `"inf"` / `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Real(x)),
            Raw::Text(t) => parse_real(&t).map(Real).ok_or_else(|| {
                serde::de::Error::custom(format!("expected a number or \"inf\", got \"{t}\""))
            }),
        }
    }
}

/// Parses a decimal real or `inf`, `+inf`, `-inf`.
pub fn parse_real(t: &str) -> Option<f64> {
    match t.trim() {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        s => s.parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpConfig {
    Exponential {
        b: f64,
    },
    Tabulated {
        step: f64,
        values: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Brownian {
        mu: f64,
        sigma2: f64,
        #[serde(default)]
        reflected: bool,
    },
    CompoundPoisson {
        drift: f64,
        rate: f64,
        jumps: JumpConfig,
        #[serde(default)]
        reflected: bool,
    },
    Gamma {
        drift: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        reflected: bool,
    },
    InverseGaussian {
        drift: f64,
        sigma: f64,
        c: f64,
        #[serde(default)]
        reflected: bool,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<LevyModel> {
        match self {
            ModelConfig::Brownian { mu, sigma2, reflected } => LevyModel::brownian(*mu, *sigma2, *reflected),
            ModelConfig::CompoundPoisson { drift, rate, jumps, reflected } => {
                let dist = match jumps {
                    JumpConfig::Exponential { b } => JumpDist::Exponential { b: *b },
                    JumpConfig::Tabulated { step, values, normalize } => {
                        JumpDist::Tabulated(TabulatedDensity::new(*step, values.clone(), *normalize)?)
                    }
                };
                LevyModel::bounded_variation(*drift, JumpMeasure::CompoundPoisson { rate: *rate, dist }, *reflected)
            }
            ModelConfig::Gamma { drift, a, b, reflected } => {
                LevyModel::bounded_variation(*drift, JumpMeasure::Gamma { a: *a, b: *b }, *reflected)
            }
            ModelConfig::InverseGaussian { drift, sigma, c, reflected } => {
                LevyModel::bounded_variation(*drift, JumpMeasure::InverseGaussian { sigma: *sigma, c: *c }, *reflected)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub lambda: f64,
    pub tau: f64,
    pub m: f64,
    pub v: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub g: Vec<[f64; 2]>,
    #[serde(default)]
    pub g_star: Vec<[f64; 2]>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { k1: 0.0, k2: 0.0, r: 0.0, alpha: 0.0, g: Vec::new(), g_star: Vec::new() }
    }
}

fn table(name: &str, pts: &[[f64; 2]]) -> Result<PenaltyTable> {
    if pts.is_empty() {
        return Ok(PenaltyTable::zero());
    }
    let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
    PenaltyTable::new(&pairs).map_err(|e| Error::config(format!("{name}: {e}")))
}

impl CostConfig {
    pub fn build(&self) -> Result<CostSpec> {
        let spec = CostSpec {
            k1: self.k1,
            k2: self.k2,
            r: self.r,
            alpha: self.alpha,
            g: table("cost.g", &self.g)?,
            g_star: table("cost.g_star", &self.g_star)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default)]
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub horizon_cap: Real,
    pub antithetic: bool,
    /// Paths for the full-policy discounted run.
    pub discounted_paths: usize,
    pub discounted_dt: f64,
    pub discounted_horizon: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        SimSection {
            n_paths: d.n_paths,
            dt: d.dt,
            seed: d.seed,
            horizon_cap: Real(d.horizon_cap),
            antithetic: d.antithetic,
            discounted_paths: 10_000,
            discounted_dt: 1e-2,
            discounted_horizon: 200.0,
        }
    }
}

impl SimSection {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            seed: self.seed,
            horizon_cap: self.horizon_cap.0,
            antithetic: self.antithetic,
        }
    }

    pub fn discounted_config(&self) -> SimConfig {
        SimConfig { n_paths: self.discounted_paths, dt: self.discounted_dt, ..self.config() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Longrun,
    Discounted {
        #[serde(default)]
        x: Option<f64>,
        #[serde(default)]
        alpha: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub objective: ObjectiveConfig,
    pub lambda: [f64; 2],
    pub tau: [f64; 2],
    pub grid: [usize; 2],
    pub refine_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    /// Start state; defaults to `τ`.
    #[serde(default)]
    pub x: Option<f64>,
}

/// A fully checked configuration.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: LevyModel,
    pub policy: Policy,
    pub cost: CostSpec,
    pub numerics: Numerics,
    pub sim: SimSection,
    pub search: Option<SearchSpec>,
    pub x: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn build(&self) -> Result<Scenario> {
        let model = self.model.build()?;
        if let Some(rho) = model.load() {
            if rho >= 1.0 {
                return Err(Error::config(format!(
                    "bounded-variation input needs load rho = E[jump rate]/drift < 1, got rho = {rho}"
                )));
            }
        }
        let p = &self.policy;
        let policy = Policy::new(p.lambda, p.tau, p.m, p.v.0)?;
        let cost = self.cost.build()?;
        let n = &self.numerics;
        if let Some(h) = n.grid_step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::config(format!("numerics.grid_step must be finite and > 0, got {h}")));
            }
        }
        if let Some(x) = n.x_max {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::config(format!("numerics.x_max must be finite and > 0, got {x}")));
            }
        }
        let numerics = Numerics { grid_step: n.grid_step, x_max: n.x_max };
        self.sim.config().validate()?;
        self.sim.discounted_config().validate()?;
        let x = self.x.unwrap_or(policy.tau);
        let lo = if model.reflected { 0.0 } else { f64::NEG_INFINITY };
        if !(x >= lo && x <= policy.v) {
            return Err(Error::config(format!("start state x = {x} outside the content range [{lo}, {}]", policy.v)));
        }
        let search = match &self.search {
            None => None,
            Some(s) => {
                let objective = match s.objective {
                    ObjectiveConfig::Longrun => Objective::LongRun,
                    ObjectiveConfig::Discounted { x: sx, alpha } => {
                        Objective::Discounted { x: sx.unwrap_or(x), alpha: alpha.unwrap_or(cost.alpha) }
                    }
                };
                let spec = SearchSpec {
                    objective,
                    lambda: (s.lambda[0], s.lambda[1]),
                    tau: (s.tau[0], s.tau[1]),
                    grid: (s.grid[0], s.grid[1]),
                    refine_tol: s.refine_tol,
                };
                spec.validate(policy.v)?;
                Some(spec)
            }
        };
        Ok(Scenario { model, policy, cost, numerics, sim: self.sim.clone(), search, x })
    }
}
