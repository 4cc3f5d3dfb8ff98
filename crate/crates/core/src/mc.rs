//! Monte Carlo simulation of the controlled dam.
//!
//! Every path owns a ChaCha8 stream selected by its index, so results do
//! not depend on how paths are spread across threads. Sums are reduced
//! pairwise in path order.
//!
//! Compound Poisson inputs are simulated exactly event by event. Brownian
//! inputs use Euler steps with exact reflection of each step's bridge and a
//! bridge-crossing check for the barriers. Gamma and inverse Gaussian
//! subordinators use exact increments on a time grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, InverseGaussian, StandardNormal};
use rayon::prelude::*;

use crate::cost::{CostSpec, PenaltyTable, Policy};
use crate::error::{Error, Result};
use crate::levy::{JumpDist, JumpMeasure, LevyModel, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Paths still running at this time are stopped and counted as truncated.
    pub horizon_cap: f64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: 100_000, dt: 1e-3, seed: 12345, horizon_cap: 1e4, antithetic: false }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::config("simulation needs at least one path"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config(format!("time step must be finite and > 0, got {}", self.dt)));
        }
        if !(self.horizon_cap > 0.0) {
            return Err(Error::config("horizon cap must be > 0"));
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Number of independent samples (antithetic pairs count once).
    pub n: usize,
    pub truncated_fraction: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64], truncated_fraction: f64) -> Estimate {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Estimate { mean, stderr: (var / n as f64).sqrt(), n, truncated_fraction }
    }

    /// Ratio-of-means estimator `Σa / Σb` with a delta-method standard error.
    pub fn ratio(num: &[f64], den: &[f64], truncated_fraction: f64) -> Estimate {
        let n = num.len();
        let r = pairwise_sum(num) / pairwise_sum(den);
        let resid: Vec<f64> = num.iter().zip(den).map(|(a, b)| a - r * b).collect();
        let e = Estimate::from_samples(&resid, 0.0);
        let mean_den = pairwise_sum(den) / n as f64;
        Estimate { mean: r, stderr: e.stderr / mean_den, n, truncated_fraction }
    }

    /// `(mean - target) / stderr`; zero-variance estimates give 0 on an
    /// exact match and infinity otherwise.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if self.stderr > 0.0 {
            diff / self.stderr
        } else if diff.abs() <= 1e-12 * target.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Two-sided Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    let l = (sn + 0.12 + 0.11 / sn) * d;
    (d, kolmogorov_survival(l))
}

/// `P(K > l)` for the Kolmogorov distribution.
fn kolmogorov_survival(l: f64) -> f64 {
    if l <= 0.0 {
        return 1.0;
    }
    let p = if l < 1.0 {
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * std::f64::consts::PI.powi(2) / (8.0 * l * l)).exp();
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / l * cdf
    } else {
        let mut p = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * l * l).exp();
            p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
            if term < 1e-17 {
                break;
            }
        }
        p
    };
    p.clamp(0.0, 1.0)
}

struct Stream {
    rng: ChaCha8Rng,
    flip: bool,
}

impl Stream {
    fn new(seed: u64, index: u64, flip: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Stream { rng, flip }
    }

    /// Uniform on the open interval (0, 1), symmetric under the antithetic flip.
    fn uniform(&mut self) -> f64 {
        let k = (self.rng.random::<u64>() >> 11) as f64;
        let u = (k + 0.5) / (1u64 << 53) as f64;
        if self.flip {
            1.0 - u
        } else {
            u
        }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        if self.flip {
            -z
        } else {
            z
        }
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        -self.uniform().ln() / rate
    }
}

enum Increment {
    Gamma(Gamma<f64>),
    InverseGaussian(InverseGaussian<f64>),
}

enum Engine {
    Brownian { mu: f64, sigma: f64 },
    CompoundPoisson { drift: f64, rate: f64, dist: JumpDist },
    Subordinator { drift: f64, incr: Increment },
}

/// Penalty integrals accumulated along a path, discounted and plain.
struct Penalty<'a> {
    g: Option<&'a PenaltyTable>,
    alpha: f64,
    disc: f64,
    plain: f64,
}

impl<'a> Penalty<'a> {
    fn new(g: Option<&'a PenaltyTable>, alpha: f64) -> Self {
        let g = g.filter(|g| !g.is_zero());
        Penalty { g, alpha, disc: 0.0, plain: 0.0 }
    }

    fn trapezoid(&mut self, t: f64, dt: f64, c0: f64, c1: f64) {
        if let Some(g) = self.g {
            let (g0, g1) = (g.eval(c0), g.eval(c1));
            self.plain += 0.5 * dt * (g0 + g1);
            self.disc += 0.5 * dt * ((-self.alpha * t).exp() * g0 + (-self.alpha * (t + dt)).exp() * g1);
        }
    }

    /// Content moving linearly from `c0` with `slope` for `dur`, starting at time `t`.
    fn linear(&mut self, t: f64, c0: f64, slope: f64, dur: f64) {
        let Some(g) = self.g else { return };
        if dur <= 0.0 {
            return;
        }
        let mut cuts = vec![0.0, dur];
        if slope != 0.0 {
            for &b in g.breakpoints() {
                let s = (b - c0) / slope;
                if s > 0.0 && s < dur {
                    cuts.push(s);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ga, gb) = (g.eval(c0 + slope * a), g.eval(c0 + slope * b));
            self.plain += 0.5 * (b - a) * (ga + gb);
            self.disc += discounted_linear(t + a, b - a, ga, gb, self.alpha);
        }
    }
}

/// `∫_0^L e^{-α(t0+u)} (ga + (gb-ga)u/L) du`.
fn discounted_linear(t0: f64, len: f64, ga: f64, gb: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.5 * len * (ga + gb);
    }
    let x = alpha * len;
    let i0 = if x > 0.0 { -(-x).exp_m1() / x } else { 1.0 };
    let i1 = if x < 1e-3 {
        0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (x * x)
    };
    (-alpha * t0).exp() * len * (ga * i0 + (gb - ga) * i1)
}

#[derive(Debug, Clone, Copy)]
struct Passage {
    time: f64,
    level: f64,
    truncated: bool,
}

struct Sampler {
    engine: Engine,
    reflected: bool,
    dt: f64,
    cap: f64,
}

impl Sampler {
    fn new(model: &LevyModel, cfg: &SimConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        let dt = cfg.dt;
        let engine = match &model.kind {
            ModelKind::Brownian { mu, sigma2 } => Engine::Brownian { mu: *mu, sigma: sigma2.sqrt() },
            ModelKind::BoundedVariation { drift, jumps } => match jumps {
                JumpMeasure::CompoundPoisson { rate, dist } => {
                    Engine::CompoundPoisson { drift: *drift, rate: *rate, dist: dist.clone() }
                }
                JumpMeasure::Gamma { a, b } => {
                    let g = Gamma::new(a * dt, 1.0 / b).map_err(|e| Error::config(format!("gamma increments: {e}")))?;
                    Engine::Subordinator { drift: *drift, incr: Increment::Gamma(g) }
                }
                JumpMeasure::InverseGaussian { sigma, c } => {
                    let ig = InverseGaussian::new(dt / c, dt * dt / (sigma * sigma))
                        .map_err(|e| Error::config(format!("inverse Gaussian increments: {e}")))?;
                    Engine::Subordinator { drift: *drift, incr: Increment::InverseGaussian(ig) }
                }
            },
        };
        Ok(Sampler { engine, reflected: model.reflected, dt, cap: cfg.horizon_cap })
    }

    fn jump(dist: &JumpDist, s: &mut Stream) -> f64 {
        match dist {
            JumpDist::Exponential { b } => s.exponential(*b),
            JumpDist::Tabulated(t) => t.quantile(s.uniform()),
        }
    }

    fn increment(incr: &Increment, s: &mut Stream) -> f64 {
        match incr {
            Increment::Gamma(g) => g.sample(&mut s.rng),
            Increment::InverseGaussian(ig) => ig.sample(&mut s.rng),
        }
    }

    /// Runs with no release from `x` until content first exceeds `lambda`.
    fn fill(&self, s: &mut Stream, x: f64, lambda: f64, pen: &mut Penalty) -> Passage {
        match &self.engine {
            Engine::Brownian { mu, sigma } => {
                if x >= lambda {
                    return Passage { time: 0.0, level: x, truncated: false };
                }
                let dt = self.dt;
                let var = sigma * sigma * dt;
                let sd = var.sqrt();
                let (mut c, mut t) = (x, 0.0);
                while t < self.cap {
                    let d = mu * dt + sd * s.normal();
                    let mut next = c + d;
                    if self.reflected {
                        let m = 0.5 * (d - (d * d - 2.0 * var * s.uniform().ln()).sqrt());
                        next = next.max(d - m);
                    }
                    if next >= lambda {
                        let f = (lambda - c) / (next - c);
                        pen.trapezoid(t, f * dt, c, lambda);
                        return Passage { time: t + f * dt, level: lambda, truncated: false };
                    }
                    let p = (-2.0 * (lambda - c) * (lambda - next) / var).exp();
                    if s.uniform() < p {
                        pen.trapezoid(t, 0.5 * dt, c, lambda);
                        return Passage { time: t + 0.5 * dt, level: lambda, truncated: false };
                    }
                    pen.trapezoid(t, dt, c, next);
                    c = next;
                    t += dt;
                }
                Passage { time: t, level: c, truncated: true }
            }
            Engine::CompoundPoisson { drift, rate, dist } => {
                let (mut c, mut t) = (x, 0.0);
                loop {
                    let w = s.exponential(*rate);
                    let w_eff = w.min(self.cap - t);
                    self.drain(pen, t, c, *drift, w_eff);
                    c = self.after_drain(c, *drift, w_eff);
                    if t + w >= self.cap {
                        return Passage { time: self.cap, level: c, truncated: true };
                    }
                    t += w;
                    c += Self::jump(dist, s);
                    if c > lambda {
                        return Passage { time: t, level: c, truncated: false };
                    }
                }
            }
            Engine::Subordinator { drift, incr } => {
                let dt = self.dt;
                let (mut c, mut t) = (x, 0.0);
                while t < self.cap {
                    let mut next = c + Self::increment(incr, s) - drift * dt;
                    if self.reflected {
                        next = next.max(0.0);
                    }
                    if next > lambda {
                        pen.trapezoid(t, 0.5 * dt, c, c);
                        return Passage { time: t + 0.5 * dt, level: next, truncated: false };
                    }
                    pen.trapezoid(t, dt, c, next);
                    c = next;
                    t += dt;
                }
                Passage { time: t, level: c, truncated: true }
            }
        }
    }

    /// Penalty along a pure drain of length `w` from content `c`.
    fn drain(&self, pen: &mut Penalty, t: f64, c: f64, drift: f64, w: f64) {
        if self.reflected && c - drift * w < 0.0 {
            let hit = (c / drift).max(0.0);
            pen.linear(t, c, -drift, hit);
            pen.linear(t + hit, 0.0, 0.0, w - hit);
        } else {
            pen.linear(t, c, -drift, w);
        }
    }

    fn after_drain(&self, c: f64, drift: f64, w: f64) -> f64 {
        let next = c - drift * w;
        if self.reflected {
            next.max(0.0)
        } else {
            next
        }
    }

    /// Releases at rate `m` from `x` until content falls to `tau`; content
    /// above `v` spills.
    fn release(&self, s: &mut Stream, x: f64, tau: f64, v: f64, m: f64, pen: &mut Penalty) -> Passage {
        let done = |time| Passage { time, level: tau, truncated: false };
        if x <= tau {
            return done(0.0);
        }
        match &self.engine {
            Engine::Brownian { mu, sigma } => {
                let dt = self.dt;
                let var = sigma * sigma * dt;
                let sd = var.sqrt();
                let (mut c, mut t) = (x, 0.0);
                while t < self.cap {
                    let d = (mu - m) * dt + sd * s.normal();
                    let mut next = c + d;
                    if v.is_finite() {
                        let mx = 0.5 * (d + (d * d - 2.0 * var * s.uniform().ln()).sqrt());
                        next = next.min(v + d - mx);
                    }
                    if next <= tau {
                        let f = (c - tau) / (c - next);
                        pen.trapezoid(t, f * dt, c, tau);
                        return done(t + f * dt);
                    }
                    let p = (-2.0 * (c - tau) * (next - tau) / var).exp();
                    if s.uniform() < p {
                        pen.trapezoid(t, 0.5 * dt, c, tau);
                        return done(t + 0.5 * dt);
                    }
                    pen.trapezoid(t, dt, c, next);
                    c = next;
                    t += dt;
                }
                Passage { time: t, level: c, truncated: true }
            }
            Engine::CompoundPoisson { drift, rate, dist } => {
                let slope = drift + m;
                let (mut c, mut t) = (x, 0.0);
                loop {
                    let w = s.exponential(*rate);
                    let to_tau = (c - tau) / slope;
                    if to_tau <= w && t + to_tau < self.cap {
                        pen.linear(t, c, -slope, to_tau);
                        return done(t + to_tau);
                    }
                    if t + w >= self.cap {
                        pen.linear(t, c, -slope, self.cap - t);
                        return Passage { time: self.cap, level: c - slope * (self.cap - t), truncated: true };
                    }
                    pen.linear(t, c, -slope, w);
                    t += w;
                    c = (c - slope * w + Self::jump(dist, s)).min(v);
                }
            }
            Engine::Subordinator { drift, incr } => {
                let dt = self.dt;
                let (mut c, mut t) = (x, 0.0);
                while t < self.cap {
                    let next = (c + Self::increment(incr, s) - (drift + m) * dt).min(v);
                    if next <= tau {
                        let f = (c - tau) / (c - next);
                        pen.trapezoid(t, f * dt, c, tau);
                        return done(t + f * dt);
                    }
                    pen.trapezoid(t, dt, c, next);
                    c = next;
                    t += dt;
                }
                Passage { time: t, level: c, truncated: true }
            }
        }
    }
}

/// Runs one or two (antithetic) paths per unit, in parallel, in unit order.
fn run_units<T: Send, F>(cfg: &SimConfig, start: u64, count: usize, f: F) -> Vec<Vec<T>>
where
    F: Fn(&mut Stream) -> T + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| {
            let idx = start + i as u64;
            let mut out = vec![f(&mut Stream::new(cfg.seed, idx, false))];
            if cfg.antithetic {
                out.push(f(&mut Stream::new(cfg.seed, idx, true)));
            }
            out
        })
        .collect()
}

fn unit_means<T, G: Fn(&T) -> f64>(units: &[Vec<T>], g: G) -> Vec<f64> {
    units.iter().map(|u| u.iter().map(&g).sum::<f64>() / u.len() as f64).collect()
}

fn truncated_share<T, G: Fn(&T) -> bool>(units: &[Vec<T>], g: G) -> f64 {
    let total: usize = units.iter().map(|u| u.len()).sum();
    let cut: usize = units.iter().map(|u| u.iter().filter(|p| g(p)).count()).sum();
    let share = cut as f64 / total.max(1) as f64;
    if share > 0.01 {
        log::warn!("{:.2}% of simulated paths hit the horizon cap", 100.0 * share);
    }
    share
}

/// Estimates from a fill-phase simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FillSim {
    pub alphas: Vec<f64>,
    /// `E_x e^{-αT̂}` for each requested `α`.
    pub lt: Vec<Estimate>,
    pub mean_time: Estimate,
    /// Overshoot `Z_T̂ - λ` of every simulated path, in path order.
    pub overshoots: Vec<f64>,
    /// Discounted penalty `E_x ∫_0^T̂ e^{-αt} g(Z_t) dt` when a table was given.
    pub penalty: Option<Estimate>,
}

pub fn simulate_fill(
    model: &LevyModel,
    lambda: f64,
    x: f64,
    alphas: &[f64],
    penalty: Option<(&PenaltyTable, f64)>,
    cfg: &SimConfig,
) -> Result<FillSim> {
    let sampler = Sampler::new(model, cfg)?;
    if !(x <= lambda) || (model.reflected && x < 0.0) {
        return Err(Error::config(format!("fill simulation needs a start below lambda, got x = {x}")));
    }
    let (g, pen_alpha) = match penalty {
        Some((g, a)) => (Some(g), a),
        None => (None, 0.0),
    };
    let units = run_units(cfg, 0, cfg.units(), |s| {
        let mut pen = Penalty::new(g, pen_alpha);
        let p = sampler.fill(s, x, lambda, &mut pen);
        (p, pen.disc)
    });
    let trunc = truncated_share(&units, |p| p.0.truncated);
    let lt = alphas
        .iter()
        .map(|&a| Estimate::from_samples(&unit_means(&units, |p| (-a * p.0.time).exp()), trunc))
        .collect();
    Ok(FillSim {
        alphas: alphas.to_vec(),
        lt,
        mean_time: Estimate::from_samples(&unit_means(&units, |p| p.0.time), trunc),
        overshoots: units.iter().flatten().map(|p| (p.0.level - lambda).max(0.0)).collect(),
        penalty: g.map(|_| Estimate::from_samples(&unit_means(&units, |p| p.1), trunc)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CycleOutcome {
    fill_time: f64,
    cycle_time: f64,
    overshoot: f64,
    cost: f64,
    cost_undiscounted: f64,
    truncated: bool,
}

fn check_cycle_inputs(model: &LevyModel, policy: &Policy, spec: &CostSpec, x: f64) -> Result<()> {
    policy.validate()?;
    spec.validate()?;
    if !(x <= policy.lambda) || (model.reflected && x < 0.0) {
        return Err(Error::config(format!("cycle simulation needs a fill-phase start, got x = {x}")));
    }
    Ok(())
}

fn cycle(sampler: &Sampler, s: &mut Stream, policy: &Policy, spec: &CostSpec, x: f64) -> CycleOutcome {
    let Policy { lambda, tau, m, v } = *policy;
    let alpha = spec.alpha;
    let mut pen_fill = Penalty::new(Some(&spec.g), alpha);
    let fill = sampler.fill(s, x, lambda, &mut pen_fill);
    let mut pen_rel = Penalty::new(Some(&spec.g_star), alpha);
    let (rel_time, rel_trunc) = if fill.truncated {
        (0.0, false)
    } else {
        let r = sampler.release(s, fill.level.min(v), tau, v, m, &mut pen_rel);
        (r.time, r.truncated)
    };
    let (t_fill, t_cycle) = (fill.time, fill.time + rel_time);
    let lt_fill = (-alpha * t_fill).exp();
    let reward = if alpha > 0.0 {
        m * spec.r * (lt_fill - (-alpha * t_cycle).exp()) / alpha
    } else {
        m * spec.r * rel_time
    };
    let cost = m * (spec.k2 + spec.k1 * lt_fill) - reward + pen_fill.disc + lt_fill * pen_rel.disc;
    let cost_undiscounted = m * (spec.k2 + spec.k1) - m * spec.r * rel_time + pen_fill.plain + pen_rel.plain;
    CycleOutcome {
        fill_time: t_fill,
        cycle_time: t_cycle,
        overshoot: (fill.level - lambda).max(0.0),
        cost,
        cost_undiscounted,
        truncated: fill.truncated || rel_trunc,
    }
}

/// Estimates from simulated cycles started at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSim {
    pub lt_fill: Estimate,
    pub lt_cycle: Estimate,
    pub mean_fill: Estimate,
    pub mean_cycle: Estimate,
    /// Discounted cycle cost at the spec's `α`.
    pub cost: Estimate,
    pub cost_undiscounted: Estimate,
    /// Regenerative ratio estimate of the long-run average cost.
    pub longrun: Estimate,
    pub overshoots: Vec<f64>,
}

pub fn simulate_cycle(model: &LevyModel, policy: &Policy, spec: &CostSpec, x: f64, cfg: &SimConfig) -> Result<CycleSim> {
    check_cycle_inputs(model, policy, spec, x)?;
    let sampler = Sampler::new(model, cfg)?;
    let units = run_units(cfg, 0, cfg.units(), |s| cycle(&sampler, s, policy, spec, x));
    let trunc = truncated_share(&units, |c| c.truncated);
    let est = |g: &dyn Fn(&CycleOutcome) -> f64| Estimate::from_samples(&unit_means(&units, g), trunc);
    let alpha = spec.alpha;
    let cost0 = unit_means(&units, |c| c.cost_undiscounted);
    let times = unit_means(&units, |c| c.cycle_time);
    Ok(CycleSim {
        lt_fill: est(&|c| (-alpha * c.fill_time).exp()),
        lt_cycle: est(&|c| (-alpha * c.cycle_time).exp()),
        mean_fill: est(&|c| c.fill_time),
        mean_cycle: est(&|c| c.cycle_time),
        cost: est(&|c| c.cost),
        cost_undiscounted: Estimate::from_samples(&cost0, trunc),
        longrun: Estimate::ratio(&cost0, &times, trunc),
        overshoots: units.iter().flatten().map(|c| c.overshoot).collect(),
    })
}

/// Long-run average cost: regeneration cycles from `τ` are generated in
/// index order until their total length reaches `horizon`, then the
/// ratio estimator is applied.
pub fn simulate_longrun(model: &LevyModel, policy: &Policy, spec: &CostSpec, horizon: f64, cfg: &SimConfig) -> Result<Estimate> {
    let spec0 = spec.with_alpha(0.0);
    check_cycle_inputs(model, policy, &spec0, policy.tau)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::config("long-run horizon must be finite and > 0"));
    }
    let sampler = Sampler::new(model, cfg)?;
    let batch = 4096;
    let (mut costs, mut times) = (Vec::new(), Vec::new());
    let (mut elapsed, mut next, mut cut, mut total) = (0.0, 0u64, 0usize, 0usize);
    while elapsed < horizon {
        let units = run_units(cfg, next, batch, |s| cycle(&sampler, s, policy, &spec0, policy.tau));
        next += batch as u64;
        for u in units {
            if elapsed >= horizon {
                break;
            }
            total += u.len();
            cut += u.iter().filter(|c| c.truncated).count();
            let t = u.iter().map(|c| c.cycle_time).sum::<f64>() / u.len() as f64;
            costs.push(u.iter().map(|c| c.cost_undiscounted).sum::<f64>() / u.len() as f64);
            times.push(t);
            elapsed += t;
        }
    }
    if costs.len() < 30 {
        return Err(Error::InsufficientData(format!(
            "only {} regeneration cycles completed within the horizon; at least 30 are needed",
            costs.len()
        )));
    }
    Ok(Estimate::ratio(&costs, &times, cut as f64 / total as f64))
}

/// Total discounted cost of the policy from `x`, simulating successive
/// cycles until `horizon`.
pub fn simulate_discounted(
    model: &LevyModel,
    policy: &Policy,
    spec: &CostSpec,
    x: f64,
    horizon: f64,
    cfg: &SimConfig,
) -> Result<Estimate> {
    check_cycle_inputs(model, policy, spec, x)?;
    if !(spec.alpha > 0.0) {
        return Err(Error::config("discounted simulation needs alpha > 0"));
    }
    let sampler = Sampler::new(model, cfg)?;
    let units = run_units(cfg, 0, cfg.units(), |s| {
        let (mut t, mut total, mut start, mut truncated) = (0.0, 0.0, x, false);
        while t < horizon {
            let c = cycle(&sampler, s, policy, spec, start);
            total += (-spec.alpha * t).exp() * c.cost;
            truncated |= c.truncated;
            t += c.cycle_time;
            start = policy.tau;
            if c.cycle_time <= 0.0 {
                break;
            }
        }
        (total, truncated)
    });
    let trunc = truncated_share(&units, |p| p.1);
    Ok(Estimate::from_samples(&unit_means(&units, |p| p.0), trunc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, dt: f64) -> SimConfig {
        SimConfig { n_paths: n, dt, seed: 7, horizon_cap: 1e4, antithetic: false }
    }

    #[test]
    fn discounted_linear_matches_quadrature() {
        let exact = crate::quad::gauss_legendre(|u| (-0.3 * (2.0 + u)).exp() * (1.0 + 0.5 * u), 0.0, 1.5);
        assert!((discounted_linear(2.0, 1.5, 1.0, 1.75, 0.3) - exact).abs() < 1e-14);
        let tiny = discounted_linear(0.0, 1e-4, 2.0, 3.0, 0.5);
        let exact = crate::quad::gauss_legendre(|u| (-0.5 * u).exp() * (2.0 + 1e4 * u), 0.0, 1e-4);
        assert!((tiny - exact).abs() < 1e-17);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| k as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&xs), 249750.0);
    }

    #[test]
    fn ks_detects_wrong_distribution() {
        let xs: Vec<f64> = (0..2000).map(|k| (k as f64 + 0.5) / 2000.0).collect();
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.99);
        let (_, p) = ks_test(&xs, |x| (x * x).clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        // P(K > 1) = 0.26999967167735456
        assert!((kolmogorov_survival(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_survival(1.0 - 1e-12) - kolmogorov_survival(1.0)).abs() < 1e-10);
    }

    #[test]
    fn cp_exponential_overshoot_is_exponential() {
        let model = LevyModel::bounded_variation(
            1.0,
            JumpMeasure::CompoundPoisson { rate: 2.0, dist: JumpDist::Exponential { b: 1.0 } },
            false,
        )
        .unwrap();
        let sim = simulate_fill(&model, 1.0, 0.0, &[], None, &cfg(20_000, 1e-3)).unwrap();
        let (_, p) = ks_test(&sim.overshoots, |z| 1.0 - (-z).exp());
        assert!(p > 1e-3, "p = {p}");
    }

    #[test]
    fn reflected_brownian_mean_fill() {
        // E_0 T̂ = λ²/σ² for driftless reflected Brownian motion.
        let model = LevyModel::brownian(0.0, 1.0, true).unwrap();
        let sim = simulate_fill(&model, 1.0, 0.0, &[0.5], None, &cfg(20_000, 1e-3)).unwrap();
        assert!(sim.mean_time.z_score(1.0).abs() < 3.5, "{:?}", sim.mean_time);
        let lt = 1.0 / 1f64.cosh();
        assert!(sim.lt[0].z_score(lt).abs() < 3.5, "{:?}", sim.lt[0]);
    }

    #[test]
    fn antithetic_pairs_count_once() {
        let model = LevyModel::brownian(0.5, 1.0, false).unwrap();
        let c = SimConfig { antithetic: true, ..cfg(101, 1e-2) };
        let sim = simulate_fill(&model, 1.0, 0.0, &[], None, &c).unwrap();
        assert_eq!(sim.mean_time.n, 51);
        assert_eq!(sim.overshoots.len(), 102);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let model = LevyModel::brownian(0.2, 1.0, true).unwrap();
        let policy = Policy::new(1.0, 0.2, 1.0, 2.0).unwrap();
        let spec = CostSpec {
            k1: 1.0,
            k2: 1.0,
            r: 0.3,
            alpha: 0.1,
            g: PenaltyTable::constant(0.1).unwrap(),
            g_star: PenaltyTable::new(&[(0.0, 0.0), (2.0, 1.0)]).unwrap(),
        };
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| simulate_cycle(&model, &policy, &spec, 0.2, &cfg(500, 1e-2)).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.cost.mean.to_bits(), b.cost.mean.to_bits());
        assert_eq!(a.mean_cycle.mean.to_bits(), b.mean_cycle.mean.to_bits());
    }
}
