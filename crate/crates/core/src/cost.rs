//! Policies, cost specifications and the discounted / long-run cost functionals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exit::{self, OvershootKernel, PotentialMeasure};
use crate::levy::LevyModel;
use crate::scale::{ScaleCache, ScaleTable, DEFAULT_CELLS};

/// The release policy: rate 0 until content crosses `lambda`, then rate `m`
/// until it returns to `tau`. `v` is the capacity (may be infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub lambda: f64,
    pub tau: f64,
    pub m: f64,
    pub v: f64,
}

impl Policy {
    pub fn new(lambda: f64, tau: f64, m: f64, v: f64) -> Result<Self> {
        let p = Policy { lambda, tau, m, v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Policy { lambda, tau, m, v } = *self;
        if !lambda.is_finite() || !tau.is_finite() {
            return Err(Error::config("lambda and tau must be finite"));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::config(format!("release rate M must be finite and > 0, got {m}")));
        }
        if tau < 0.0 {
            return Err(Error::config(format!("policy requires 0 <= tau, got tau = {tau}")));
        }
        if tau >= lambda {
            return Err(Error::config(format!("policy requires tau < lambda, got tau = {tau}, lambda = {lambda}")));
        }
        if !(v > lambda) {
            return Err(Error::config(format!("policy requires lambda < V, got lambda = {lambda}, V = {v}")));
        }
        Ok(())
    }
}

/// Piecewise-linear penalty rate through `(x, value)` pairs, constant
/// beyond the first and last points.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PenaltyTable {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("penalty table needs at least one point"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::config("penalty table abscissae must be strictly increasing"));
            }
        }
        for &(x, y) in points {
            if !x.is_finite() || !y.is_finite() || y < 0.0 {
                return Err(Error::config(format!(
                    "penalty table entries must be finite with values >= 0, got ({x}, {y})"
                )));
            }
        }
        Ok(PenaltyTable { xs: points.iter().map(|p| p.0).collect(), ys: points.iter().map(|p| p.1).collect() })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(&[(0.0, c)])
    }

    pub fn zero() -> Self {
        PenaltyTable { xs: vec![0.0], ys: vec![0.0] }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.xs.iter().copied().zip(self.ys.iter().copied()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.ys.iter().all(|y| *y == 0.0)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    /// Left end of the non-constant part.
    pub fn start(&self) -> f64 {
        self.xs[0]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&p| p <= x) - 1;
        let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
        self.ys[k] + t * (self.ys[k + 1] - self.ys[k])
    }

    pub fn scaled(&self, c: f64) -> PenaltyTable {
        PenaltyTable { xs: self.xs.clone(), ys: self.ys.iter().map(|y| y * c).collect() }
    }
}

/// Economic parameters: start and close cost coefficients, reward per unit
/// released, discount rate, and penalty rates for the two phases.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub k1: f64,
    pub k2: f64,
    pub r: f64,
    pub alpha: f64,
    pub g: PenaltyTable,
    pub g_star: PenaltyTable,
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("K1", self.k1), ("K2", self.k2), ("R", self.r)] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> CostSpec {
        CostSpec { alpha, ..self.clone() }
    }
}

/// Grid controls for the scale tables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Numerics {
    pub grid_step: Option<f64>,
    pub x_max: Option<f64>,
}

/// A model under a fixed policy, with memoised scale tables.
#[derive(Clone)]
pub struct Dam {
    pub model: LevyModel,
    pub policy: Policy,
    pub numerics: Numerics,
    shifted: LevyModel,
    cache: Arc<ScaleCache>,
    penalty_floor: f64,
    perturb: f64,
}

impl Dam {
    pub fn new(model: LevyModel, policy: Policy, numerics: Numerics) -> Result<Self> {
        Self::with_cache(model, policy, numerics, Arc::new(ScaleCache::new()))
    }

    pub fn with_cache(model: LevyModel, policy: Policy, numerics: Numerics, cache: Arc<ScaleCache>) -> Result<Self> {
        model.validate()?;
        policy.validate()?;
        let shifted = model.shifted(policy.m);
        Ok(Dam { model, policy, numerics, shifted, cache, penalty_floor: 0.0, perturb: 0.0 })
    }

    /// Lowest level a free-input penalty integral must resolve on the grid.
    pub fn with_penalty_floor(mut self, floor: f64) -> Self {
        self.penalty_floor = floor.min(0.0);
        self
    }

    /// Sets the penalty floor a free input needs for `spec`'s fill penalty.
    pub fn for_spec(self, spec: &CostSpec) -> Self {
        if self.model.reflected {
            self
        } else {
            let floor = spec.g.start();
            self.with_penalty_floor(floor)
        }
    }

    /// Scales every `W`, `W̄`, `W'` by `1 + eps`. Exists to prove that
    /// validation catches a corrupted table.
    pub fn with_perturbation(mut self, eps: f64) -> Self {
        self.perturb = eps;
        self
    }

    pub fn with_policy(&self, policy: Policy) -> Result<Self> {
        policy.validate()?;
        let mut d = self.clone();
        d.shifted = d.model.shifted(policy.m);
        d.policy = policy;
        Ok(d)
    }

    pub fn cache(&self) -> &Arc<ScaleCache> {
        &self.cache
    }

    fn base_range(&self) -> f64 {
        if let Some(x) = self.numerics.x_max {
            return x;
        }
        let extra = -self.penalty_floor;
        if self.policy.v.is_finite() {
            self.policy.v + extra
        } else {
            self.policy.lambda + extra
        }
    }

    fn shifted_range(&self) -> f64 {
        if let Some(x) = self.numerics.x_max {
            return x;
        }
        if self.policy.v.is_finite() {
            self.policy.v
        } else {
            self.policy.lambda
        }
    }

    fn table(&self, model: &LevyModel, alpha: f64, x_max: f64) -> Result<Arc<ScaleTable>> {
        let step = self.numerics.grid_step.or(Some(x_max / DEFAULT_CELLS as f64));
        let t = self.cache.get(model, alpha, x_max, step)?;
        if self.perturb != 0.0 {
            return Ok(Arc::new(t.perturbed(self.perturb)));
        }
        Ok(t)
    }

    pub fn base(&self, alpha: f64) -> Result<Arc<ScaleTable>> {
        self.table(&self.model, alpha, self.base_range())
    }

    pub fn shifted(&self, alpha: f64) -> Result<Arc<ScaleTable>> {
        self.table(&self.shifted, alpha, self.shifted_range())
    }

    fn in_fill(&self, x: f64) -> bool {
        x <= self.policy.lambda
    }

    fn check_state(&self, x: f64) -> Result<()> {
        let lo = if self.model.reflected { 0.0 } else { f64::NEG_INFINITY };
        if !(x >= lo && x <= self.policy.v) || x.is_nan() {
            return Err(Error::domain(format!("state x = {x} outside the content range [{lo}, {}]", self.policy.v)));
        }
        Ok(())
    }

    pub fn lt_fill(&self, alpha: f64, x: f64) -> Result<f64> {
        let t = self.base(alpha)?;
        if self.model.reflected {
            exit::lt_fill_reflected(&t, self.policy.lambda, x)
        } else {
            exit::lt_fill_free(&t, self.policy.lambda, x)
        }
    }

    pub fn mean_fill(&self, x: f64) -> Result<f64> {
        let t = self.base(0.0)?;
        if self.model.reflected {
            exit::mean_fill_reflected(&t, self.policy.lambda, x)
        } else {
            exit::mean_fill_free(&t, self.policy.lambda, x)
        }
    }

    /// Fill-phase potential started at `x`.
    pub fn potential_fill(&self, alpha: f64, x: f64) -> Result<PotentialMeasure> {
        let t = self.base(alpha)?;
        if self.model.reflected {
            exit::potential_reflected(&t, self.policy.lambda, x)
        } else {
            exit::potential_free_measure(&t, self.policy.lambda, x, self.penalty_floor)
        }
    }

    pub fn overshoot(&self, alpha: f64, x: f64) -> Result<OvershootKernel> {
        let t = self.base(alpha)?;
        let (lambda, v) = (self.policy.lambda, self.policy.v);
        if self.model.reflected {
            exit::overshoot_reflected(&self.model, &t, lambda, x, v)
        } else {
            exit::overshoot_free(&self.model, &t, lambda, x, v)
        }
    }

    pub fn lt_release(&self, alpha: f64, x: f64) -> Result<f64> {
        exit::lt_release(&*self.shifted(alpha)?, self.policy.v, self.policy.tau, x.min(self.policy.v))
    }

    pub fn mean_release(&self, x: f64) -> Result<f64> {
        exit::mean_release(&*self.shifted(0.0)?, self.policy.v, self.policy.tau, x.min(self.policy.v))
    }

    pub fn potential_release(&self, alpha: f64, x: f64) -> Result<PotentialMeasure> {
        exit::potential_release_measure(&*self.shifted(alpha)?, self.policy.v, self.policy.tau, x)
    }

    /// `E_x[e^{-αT*}]`: time to the end of the current cycle.
    pub fn lt_cycle(&self, alpha: f64, x: f64) -> Result<f64> {
        self.check_state(x)?;
        if !self.in_fill(x) {
            return self.lt_release(alpha, x);
        }
        if self.model.is_brownian() {
            return Ok(self.lt_fill(alpha, x)? * self.lt_release(alpha, self.policy.lambda)?);
        }
        let k = self.overshoot(alpha, x)?;
        exit::lt_cycle(&k, &*self.shifted(alpha)?, self.policy.v, self.policy.tau)
    }

    /// `E_x[T*]`.
    pub fn mean_cycle_from(&self, x: f64) -> Result<f64> {
        self.check_state(x)?;
        if !self.in_fill(x) {
            return self.mean_release(x);
        }
        let fill = self.mean_fill(x)?;
        if fill.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let k = self.overshoot(0.0, x)?;
        exit::mean_cycle(fill, &k, &*self.shifted(0.0)?, self.policy.v, self.policy.tau)
    }

    /// `E_τ[T*]`, the mean regeneration cycle.
    pub fn mean_cycle(&self) -> Result<f64> {
        self.mean_cycle_from(self.policy.tau)
    }
}

fn require_finite_capacity(dam: &Dam) -> Result<()> {
    if dam.policy.v.is_infinite() {
        return Err(Error::config("cost functionals need a finite capacity V"));
    }
    Ok(())
}

/// Expected discounted fill-phase penalty `∫ g(y) U^α(x, dy)`.
pub fn penalty_fill(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    if spec.g.is_zero() {
        return Ok(0.0);
    }
    let u = dam.potential_fill(spec.alpha, x)?;
    Ok(u.integrate(|y| spec.g.eval(y)))
}

/// Expected discounted release-phase penalty `∫ g*(y) u*^α(x, y) dy`.
pub fn penalty_release(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    require_finite_capacity(dam)?;
    if spec.g_star.is_zero() {
        return Ok(0.0);
    }
    let x = x.min(dam.policy.v);
    if x <= dam.policy.tau {
        return Ok(0.0);
    }
    let u = dam.potential_release(spec.alpha, x)?;
    Ok(u.integrate(|y| spec.g_star.eval(y)))
}

/// Cycle cost from a state in the release phase (`λ < x <= V`).
pub fn cycle_cost_release(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    require_finite_capacity(dam)?;
    let m = dam.policy.m;
    let reward = if spec.alpha > 0.0 {
        m * spec.r * (1.0 - dam.lt_release(spec.alpha, x)?) / spec.alpha
    } else {
        m * spec.r * dam.mean_release(x)?
    };
    Ok(m * spec.k1 - reward + penalty_release(dam, spec, x)?)
}

/// Components of the cycle cost from a fill-phase state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillCycleCost {
    pub switching: f64,
    pub reward: f64,
    pub penalty_fill: f64,
    pub penalty_release: f64,
    pub lt_fill: f64,
    pub lt_cycle: f64,
}

impl FillCycleCost {
    pub fn total(&self) -> f64 {
        self.switching - self.reward + self.penalty_fill + self.penalty_release
    }
}

/// Cycle cost from a state in the fill phase (`τ <= x <= λ`), split into
/// its parts. At `α = 0` the reward is `MR(E_x T* - E_x T̂)`.
pub fn cycle_cost_fill_parts(dam: &Dam, spec: &CostSpec, x: f64) -> Result<FillCycleCost> {
    require_finite_capacity(dam)?;
    let (m, alpha) = (dam.policy.m, spec.alpha);
    let lambda = dam.policy.lambda;
    let brownian = dam.model.is_brownian();
    let kernel = if brownian { None } else { Some(dam.overshoot(alpha, x)?) };
    let lt_fill = match &kernel {
        Some(k) => k.lt,
        None => dam.lt_fill(alpha, x)?,
    };
    let lt_cycle = match &kernel {
        Some(k) => exit::lt_cycle(k, &*dam.shifted(alpha)?, dam.policy.v, dam.policy.tau)?,
        None => lt_fill * dam.lt_release(alpha, lambda)?,
    };
    let reward = if spec.r == 0.0 {
        0.0
    } else if alpha > 0.0 {
        m * spec.r * (lt_fill - lt_cycle) / alpha
    } else {
        let fill = dam.mean_fill(x)?;
        if fill.is_infinite() {
            f64::INFINITY
        } else {
            m * spec.r * (dam.mean_cycle_from(x)? - fill)
        }
    };
    let penalty_release_part = if spec.g_star.is_zero() {
        0.0
    } else {
        let mut err = None;
        let mut f = |z: f64| match penalty_release(dam, spec, z) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        };
        let v = match &kernel {
            Some(k) => k.integrate(&mut f),
            None => lt_fill * f(lambda),
        };
        if let Some(e) = err {
            return Err(e);
        }
        v
    };
    Ok(FillCycleCost {
        switching: m * (spec.k2 + spec.k1 * lt_fill),
        reward,
        penalty_fill: penalty_fill(dam, spec, x)?,
        penalty_release: penalty_release_part,
        lt_fill,
        lt_cycle,
    })
}

pub fn cycle_cost_fill(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    Ok(cycle_cost_fill_parts(dam, spec, x)?.total())
}

/// Cycle cost from any state, by phase (`x = λ` counts as fill).
pub fn cycle_cost(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    dam.check_state(x)?;
    if x <= dam.policy.lambda {
        cycle_cost_fill(dam, spec, x)
    } else {
        cycle_cost_release(dam, spec, x)
    }
}

/// Total expected discounted cost from `x` over infinitely many cycles.
pub fn total_discounted_cost(dam: &Dam, spec: &CostSpec, x: f64) -> Result<f64> {
    if !(spec.alpha > 0.0) {
        return Err(Error::config("total discounted cost needs alpha > 0"));
    }
    dam.check_state(x)?;
    let tau = dam.policy.tau;
    let at_tau = cycle_cost_fill_parts(dam, spec, tau)?;
    if at_tau.lt_cycle >= 1.0 {
        return Err(Error::RenewalDivergence(at_tau.lt_cycle));
    }
    let per_cycle = at_tau.total() / (1.0 - at_tau.lt_cycle);
    if x == tau {
        return Ok(per_cycle);
    }
    let first = cycle_cost(dam, spec, x)?;
    Ok(first + dam.lt_cycle(spec.alpha, x)? * per_cycle)
}

/// Long-run average cost `C⁰(τ)/E_τ[T*]`; `+∞` when the mean cycle is infinite.
pub fn longrun_average_cost(dam: &Dam, spec: &CostSpec) -> Result<f64> {
    let spec0 = spec.with_alpha(0.0);
    let mean = dam.mean_cycle()?;
    if mean.is_infinite() {
        log::warn!("mean cycle length is infinite; long-run average cost reported as +inf");
        return Ok(f64::INFINITY);
    }
    let c0 = cycle_cost_fill_parts(dam, &spec0, dam.policy.tau)?.total();
    Ok(c0 / mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_dam() -> Dam {
        let model = LevyModel::brownian(0.0, 2.0, true).unwrap();
        Dam::new(model, Policy::new(1.0, 0.0, 1.0, 2.0).unwrap(), Numerics::default()).unwrap()
    }

    fn spec(k1: f64, k2: f64, r: f64, alpha: f64, g: f64, gs: f64) -> CostSpec {
        CostSpec {
            k1,
            k2,
            r,
            alpha,
            g: PenaltyTable::constant(g).unwrap(),
            g_star: PenaltyTable::constant(gs).unwrap(),
        }
    }

    #[test]
    fn policy_constraints() {
        assert!(Policy::new(1.0, 1.0, 1.0, 2.0).is_err());
        assert!(Policy::new(1.0, -0.1, 1.0, 2.0).is_err());
        assert!(Policy::new(2.0, 0.0, 1.0, 2.0).is_err());
        assert!(Policy::new(1.0, 0.0, 0.0, 2.0).is_err());
        assert!(Policy::new(1.0, 0.0, 1.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn penalty_table_interpolates_and_clamps() {
        let g = PenaltyTable::new(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(g.eval(-1.0), 1.0);
        assert_eq!(g.eval(1.0), 2.0);
        assert_eq!(g.eval(5.0), 3.0);
        assert!(PenaltyTable::new(&[(1.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(PenaltyTable::new(&[(0.0, -1.0)]).is_err());
    }

    #[test]
    fn reference_cycle_means() {
        let d = reference_dam();
        assert_relative_eq!(d.mean_cycle().unwrap(), 1.5 + (-2f64).exp() - (-1f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn reference_longrun() {
        let d = reference_dam();
        let c = longrun_average_cost(&d, &spec(1.0, 1.0, 0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(c, 2.0 / (1.5 + (-2f64).exp() - (-1f64).exp()), max_relative = 1e-12);
    }

    #[test]
    fn release_cost_limit() {
        let d = reference_dam();
        let c = cycle_cost_release(&d, &spec(1.0, 0.0, 1.0, 0.0, 0.0, 0.0), 1.0 + 1e-12).unwrap();
        assert_relative_eq!(c, 1.0 - (1.0 + (-2f64).exp() - (-1f64).exp()), max_relative = 1e-9);
    }

    #[test]
    fn constant_penalty_longrun_is_the_rate() {
        let d = reference_dam();
        let c = longrun_average_cost(&d, &spec(0.0, 0.0, 0.0, 0.0, 0.7, 0.7)).unwrap();
        assert_relative_eq!(c, 0.7, max_relative = 1e-10);
    }

    #[test]
    fn unit_penalty_matches_killing_identity() {
        let d = reference_dam();
        let s = spec(0.0, 0.0, 0.0, 0.4, 1.0, 1.0);
        let got = penalty_fill(&d, &s, 0.3).unwrap();
        assert_relative_eq!(got, (1.0 - d.lt_fill(0.4, 0.3).unwrap()) / 0.4, max_relative = 1e-10);
        let got = penalty_release(&d, &s, 1.5).unwrap();
        assert_relative_eq!(got, (1.0 - d.lt_release(0.4, 1.5).unwrap()) / 0.4, max_relative = 1e-10);
    }

    #[test]
    fn discounted_cost_is_zero_for_zero_spec() {
        let d = reference_dam();
        assert_eq!(total_discounted_cost(&d, &spec(0.0, 0.0, 0.0, 0.1, 0.0, 0.0), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn discounted_cost_needs_positive_alpha() {
        let d = reference_dam();
        assert!(total_discounted_cost(&d, &spec(1.0, 1.0, 0.0, 0.0, 0.0, 0.0), 0.0).is_err());
    }
}
