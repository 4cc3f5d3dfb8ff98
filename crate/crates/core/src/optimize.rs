//! Search over the threshold pair `(λ, τ)` for fixed `M` and `V`.
//!
//! A coarse grid is scanned in parallel, then the best cell is refined by
//! alternating golden-section searches along each axis inside a box that
//! shrinks until its diameter falls below `refine_tol`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::cost::{longrun_average_cost, total_discounted_cost, CostSpec, Dam, Numerics, Policy};
use crate::error::{Error, Result};
use crate::levy::LevyModel;
use crate::scale::ScaleCache;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    LongRun,
    /// Total discounted cost from state `x` at discount rate `alpha`.
    Discounted { x: f64, alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpec {
    pub objective: Objective,
    pub lambda: (f64, f64),
    pub tau: (f64, f64),
    pub grid: (usize, usize),
    pub refine_tol: f64,
}

impl SearchSpec {
    pub fn validate(&self, v: f64) -> Result<()> {
        let (l0, l1) = self.lambda;
        let (t0, t1) = self.tau;
        if ![l0, l1, t0, t1].iter().all(|b| b.is_finite()) {
            return Err(Error::config("search bounds must be finite"));
        }
        if !(0.0 <= t0 && t0 <= t1 && t1 < l0 && l0 <= l1 && l1 < v) {
            return Err(Error::config(format!(
                "search bounds must satisfy 0 <= tau_min <= tau_max < lambda_min <= lambda_max < V, \
                 got tau in [{t0}, {t1}], lambda in [{l0}, {l1}], V = {v}"
            )));
        }
        if self.grid.0 < 4 || self.grid.1 < 4 {
            return Err(Error::config(format!("search grid needs at least 4 points per axis, got {:?}", self.grid)));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::config("refine_tol must be > 0"));
        }
        if let Objective::Discounted { alpha, .. } = self.objective {
            if !(alpha > 0.0) {
                return Err(Error::config("discounted objective needs alpha > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Grid,
    Refine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub lambda: f64,
    pub tau: f64,
    pub cost: f64,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub lambda: f64,
    pub tau: f64,
    pub cost: f64,
    pub trace: Vec<TracePoint>,
}

/// Evaluates the objective for one policy, sharing scale tables through the cache.
pub struct Evaluator {
    model: LevyModel,
    spec: CostSpec,
    m: f64,
    v: f64,
    numerics: Numerics,
    objective: Objective,
    cache: Arc<ScaleCache>,
}

impl Evaluator {
    pub fn new(model: &LevyModel, spec: &CostSpec, m: f64, v: f64, numerics: Numerics, objective: Objective) -> Result<Self> {
        model.validate()?;
        spec.validate()?;
        let spec = match objective {
            Objective::LongRun => spec.with_alpha(0.0),
            Objective::Discounted { alpha, .. } => spec.with_alpha(alpha),
        };
        Ok(Evaluator { model: model.clone(), spec, m, v, numerics, objective, cache: Arc::new(ScaleCache::new()) })
    }

    /// The objective at `(λ, τ)`; policies whose cost diverges give `+∞`.
    pub fn cost(&self, lambda: f64, tau: f64) -> Result<f64> {
        let policy = Policy::new(lambda, tau, self.m, self.v)?;
        let dam = Dam::with_cache(self.model.clone(), policy, self.numerics, self.cache.clone())?.for_spec(&self.spec);
        let r = match self.objective {
            Objective::LongRun => longrun_average_cost(&dam, &self.spec),
            Objective::Discounted { x, .. } => total_discounted_cost(&dam, &self.spec, x),
        };
        match r {
            Ok(c) if c.is_nan() => Err(Error::Numerical(format!("cost is NaN at lambda = {lambda}, tau = {tau}"))),
            Ok(c) => Ok(c),
            Err(Error::RenewalDivergence(_)) | Err(Error::Infeasible(_)) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
}

/// Relative gap below which two costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Strict improvement, with ties going to the lexicographically smaller `(λ, τ)`.
fn better(a: &TracePoint, b: &TracePoint) -> bool {
    let gap = TIE_TOLERANCE * a.cost.abs().max(b.cost.abs()).max(1e-300);
    if a.cost.is_finite() && b.cost.is_finite() && (a.cost - b.cost).abs() <= gap {
        return (a.lambda, a.tau) < (b.lambda, b.tau);
    }
    a.cost < b.cost
}

/// Scans every `(λ, τ)` on the grid in parallel, in row-major order.
pub fn grid_scan(eval: &Evaluator, lambdas: &[f64], taus: &[f64]) -> Result<Vec<TracePoint>> {
    let pts: Vec<(f64, f64)> = lambdas.iter().flat_map(|&l| taus.iter().map(move |&t| (l, t))).collect();
    pts.par_iter()
        .map(|&(lambda, tau)| Ok(TracePoint { lambda, tau, cost: eval.cost(lambda, tau)?, stage: Stage::Grid }))
        .collect()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

struct Refiner<'a> {
    eval: &'a Evaluator,
    trace: Vec<TracePoint>,
    best: TracePoint,
}

impl Refiner<'_> {
    fn at(&mut self, lambda: f64, tau: f64) -> Result<f64> {
        let p = TracePoint { lambda, tau, cost: self.eval.cost(lambda, tau)?, stage: Stage::Refine };
        if better(&p, &self.best) {
            self.best = p;
        }
        self.trace.push(p);
        Ok(p.cost)
    }

    /// Golden-section search of `f` on `[a, b]` down to width `tol`.
    fn golden<F: FnMut(&mut Self, f64) -> Result<f64>>(&mut self, mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<()> {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (f(self, c)?, f(self, d)?);
        while b - a > tol {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(self, c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(self, d)?;
            }
        }
        Ok(())
    }
}

pub fn optimize(model: &LevyModel, spec: &CostSpec, m: f64, v: f64, numerics: Numerics, search: &SearchSpec) -> Result<Optimum> {
    search.validate(v)?;
    let eval = Evaluator::new(model, spec, m, v, numerics, search.objective)?;
    let (l0, l1) = search.lambda;
    let (t0, t1) = search.tau;
    let lambdas = axis(l0, l1, search.grid.0);
    let taus = axis(t0, t1, search.grid.1);
    let trace = grid_scan(&eval, &lambdas, &taus)?;
    let best = trace.iter().copied().reduce(|a, b| if better(&b, &a) { b } else { a }).expect("non-empty grid");
    if best.cost.is_infinite() {
        return Err(Error::InfeasibleSearch);
    }

    let mut r = Refiner { eval: &eval, trace, best };
    let mut half_l = (l1 - l0) / (search.grid.0 - 1) as f64;
    let mut half_t = (t1 - t0) / (search.grid.1 - 1) as f64;
    let tol = search.refine_tol;
    while (2.0 * half_l).hypot(2.0 * half_t) >= tol {
        let centre = r.best;
        let (a, b) = ((centre.lambda - half_l).max(l0), (centre.lambda + half_l).min(l1));
        if b > a {
            let tau = centre.tau;
            r.golden(a, b, tol / 4.0, |r, l| r.at(l, tau))?;
        }
        let lambda = r.best.lambda;
        let (a, b) = ((r.best.tau - half_t).max(t0), (r.best.tau + half_t).min(t1));
        if b > a {
            r.golden(a, b, tol / 4.0, |r, t| r.at(lambda, t))?;
        }
        half_l *= INV_PHI;
        half_t *= INV_PHI;
    }
    let Refiner { trace, best, .. } = r;
    log::debug!("optimizer evaluated {} policies", trace.len());
    Ok(Optimum { lambda: best.lambda, tau: best.tau, cost: best.cost, trace })
}
