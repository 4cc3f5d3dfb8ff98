//! q-scale functions `W^(α)`, `Z^(α)` and their companions.
//!
//! Brownian inputs use closed forms. Bounded-variation inputs are tabulated
//! on a uniform grid from the ladder-height series
//! `W = (1/ς) Σ ρⁿ F^{*n}` and, for `α > 0`, the convolution series
//! `W^(α) = Σ α^k W^{*(k+1)}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::levy::{LevyModel, ModelKind};
use crate::quad;
use crate::special::{expm1_over, sinhc};

/// Smallest grid the series representation accepts.
pub const MIN_NODES: usize = 64;
/// Default number of cells across `x_max`.
pub const DEFAULT_CELLS: usize = 2048;

const SERIES_TOL: f64 = 1e-10;

/// Closed-form scale functions of `μt + σB_t` at discount `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianScale {
    pub mu: f64,
    pub sigma2: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl BrownianScale {
    pub fn new(mu: f64, sigma2: f64, alpha: f64) -> Self {
        let delta = (2.0 * alpha * sigma2 + mu * mu).sqrt();
        BrownianScale { mu, sigma2, alpha, delta }
    }

    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let s2 = self.sigma2;
        2.0 * x / s2 * (self.mu * x / s2).exp() * sinhc(self.delta * x / s2)
    }

    pub fn wprime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let s2 = self.sigma2;
        self.mu / s2 * self.w(x) + 2.0 / s2 * (self.mu * x / s2).exp() * (self.delta * x / s2).cosh()
    }

    pub fn wbar(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let s2 = self.sigma2;
        if self.delta == 0.0 {
            return x * x / s2;
        }
        let a = (self.mu + self.delta) / s2;
        let b = (self.mu - self.delta) / s2;
        (expm1_over(a, x) - expm1_over(b, x)) / self.delta
    }

    pub fn z(&self, x: f64) -> f64 {
        1.0 + self.alpha * self.wbar(x)
    }

    /// `Z` from the hyperbolic form `e^{μx/σ²}(cosh - (μ/δ) sinh)`.
    pub fn z_hyperbolic(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let s2 = self.sigma2;
        let y = self.delta * x / s2;
        let sinh_term = self.mu * x / s2 * sinhc(y);
        (self.mu * x / s2).exp() * (y.cosh() - sinh_term)
    }

    /// `∫_X^∞ e^{-βx} W(x) dx` for `β > η`.
    fn laplace_tail(&self, beta: f64, x0: f64) -> f64 {
        let s2 = self.sigma2;
        if self.delta == 0.0 {
            return 2.0 / s2 * (-beta * x0).exp() * (x0 / beta + 1.0 / (beta * beta));
        }
        let a = (self.mu + self.delta) / s2;
        let b = (self.mu - self.delta) / s2;
        (((a - beta) * x0).exp() / (beta - a) - ((b - beta) * x0).exp() / (beta - b)) / self.delta
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Brownian(BrownianScale),
    Grid { w: Vec<f64>, wbar: Vec<f64>, wprime: Vec<f64> },
}

/// Scale functions of one model at one discount rate.
#[derive(Debug, Clone)]
pub struct ScaleTable {
    alpha: f64,
    eta: f64,
    x_max: f64,
    step: f64,
    mean_rate: f64,
    w_at_zero: f64,
    factor: f64,
    repr: Repr,
}

/// Builds the scale table for `model` at discount `alpha`, valid on `[0, x_max]`.
///
/// `step` defaults to `x_max / 2048`. Brownian tables are exact everywhere
/// and ignore the grid except when listing nodes.
pub fn build_scale_table(model: &LevyModel, alpha: f64, x_max: f64, step: Option<f64>) -> Result<ScaleTable> {
    model.validate()?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("discount rate must be finite and >= 0, got {alpha}")));
    }
    if !(x_max > 0.0) || !x_max.is_finite() {
        return Err(Error::config(format!("x_max must be finite and > 0, got {x_max}")));
    }
    let step = step.unwrap_or(x_max / DEFAULT_CELLS as f64);
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::config(format!("grid step must be finite and > 0, got {step}")));
    }
    let eta = model.eta_root(alpha)?;
    let mean_rate = model.mean_rate();
    let (repr, w_at_zero) = match &model.kind {
        ModelKind::Brownian { mu, sigma2 } => (Repr::Brownian(BrownianScale::new(*mu, *sigma2, alpha)), 0.0),
        ModelKind::BoundedVariation { drift, jumps } => {
            let n = (x_max / step).ceil() as usize + 2;
            if n < MIN_NODES {
                return Err(Error::config(format!(
                    "scale grid has {n} nodes; at least {MIN_NODES} are required (reduce the grid step)"
                )));
            }
            let rho = jumps.mean() / drift;
            if rho >= 1.0 {
                return Err(Error::Infeasible(format!(
                    "load rho = {rho} >= 1; the ladder series for W does not converge"
                )));
            }
            let cdf: Vec<f64> = (0..=n).map(|k| jumps.ladder_cdf(k as f64 * step)).collect();
            let w = bv_scale_grid(&cdf, rho, *drift, alpha, eta, step, n)?;
            let wbar = cumulative_trapezoid(&w, step);
            let wprime = forward_derivative(&w, step);
            (Repr::Grid { w, wbar, wprime }, 1.0 / drift)
        }
    };
    Ok(ScaleTable { alpha, eta, x_max, step, mean_rate, w_at_zero, factor: 1.0, repr })
}

struct Convolver {
    len: usize,
    kernel: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    fn new(kernel: &[f64], n: usize) -> Self {
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for (b, k) in buf.iter_mut().zip(kernel.iter().take(n)) {
            b.re = *k;
        }
        forward.process(&mut buf);
        Convolver { len, kernel: buf, forward, inverse }
    }

    /// `(kernel * a)_i = Σ_{j<=i} kernel_j a_{i-j}` for `i < a.len()`.
    fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for (b, v) in buf.iter_mut().zip(a) {
            b.re = *v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= *k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf[..a.len()].iter().map(|c| c.re * scale).collect()
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn bv_scale_grid(cdf: &[f64], rho: f64, drift: f64, alpha: f64, eta: f64, h: f64, n: usize) -> Result<Vec<f64>> {
    let increments: Vec<f64> = cdf.windows(2).map(|p| p[1] - p[0]).collect();
    let conv = Convolver::new(&increments, n);

    let mut term = vec![1.0; n];
    let mut sum = term.clone();
    let mut weight = 1.0;
    let mut k = 0usize;
    while weight * rho / ((1.0 - rho) * drift) >= SERIES_TOL {
        let full = conv.apply(&term);
        let mut next = vec![0.0; n];
        for i in 1..n {
            next[i] = 0.5 * (full[i] - increments[i] * term[0] + full[i - 1]);
        }
        term = next;
        weight *= rho;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += weight * t;
        }
        k += 1;
        if k > 1_000_000 {
            return Err(Error::Numerical("ladder series did not reach tolerance".into()));
        }
    }
    let w0: Vec<f64> = sum.iter().map(|s| s / drift).collect();
    if alpha == 0.0 {
        return Ok(w0);
    }

    // Work with e^{-eta x} W so every term stays of order one.
    let tilt: Vec<f64> = (0..n).map(|i| (-eta * i as f64 * h).exp()).collect();
    let w0: Vec<f64> = w0.iter().zip(&tilt).map(|(w, t)| w * t).collect();
    let conv = Convolver::new(&w0, n);
    let mut term = w0.clone();
    let mut total = w0.clone();
    for _ in 0..100_000 {
        let full = conv.apply(&term);
        let next: Vec<f64> = (0..n)
            .map(|i| alpha * h * (full[i] - 0.5 * (w0[i] * term[0] + w0[0] * term[i])))
            .collect();
        let size = sup_norm(&next);
        for (t, v) in total.iter_mut().zip(&next) {
            *t += v;
        }
        term = next;
        if !sup_norm(&total).is_finite() {
            return Err(Error::Numerical("discounted scale series overflowed; reduce x_max or alpha".into()));
        }
        if size < SERIES_TOL * sup_norm(&total) {
            let w: Vec<f64> = total.iter().zip(&tilt).map(|(w, t)| w / t).collect();
            if !sup_norm(&w).is_finite() {
                return Err(Error::Numerical("discounted scale function overflowed; reduce x_max or alpha".into()));
            }
            return Ok(w);
        }
    }
    Err(Error::Numerical("discounted scale series did not reach tolerance".into()))
}

fn cumulative_trapezoid(w: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for i in 1..w.len() {
        out[i] = out[i - 1] + 0.5 * h * (w[i - 1] + w[i]);
    }
    out
}

fn forward_derivative(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            if i + 2 < n {
                (-3.0 * w[i] + 4.0 * w[i + 1] - w[i + 2]) / (2.0 * h)
            } else {
                (3.0 * w[i] - 4.0 * w[i - 1] + w[i - 2]) / (2.0 * h)
            }
        })
        .collect()
}

impl ScaleTable {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `E I_1` of the model the table was built for.
    pub fn mean_rate(&self) -> f64 {
        self.mean_rate
    }

    /// `W^(α)(0)`: zero for Brownian inputs, `1/ς` otherwise.
    pub fn w_at_zero(&self) -> f64 {
        self.w_at_zero * self.factor
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Brownian(_))
    }

    /// `α/η(α)`, extended to `α = η = 0` by its limit `max(-E I_1, 0)`.
    pub fn kill_ratio(&self) -> f64 {
        if self.alpha > 0.0 {
            self.alpha / self.eta
        } else if self.eta > 0.0 {
            0.0
        } else {
            (-self.mean_rate).max(0.0)
        }
    }

    /// A copy with `W`, `W'` and `W̄` scaled by `1 + eps`. Used to check
    /// that validation detects a corrupted table.
    pub fn perturbed(&self, eps: f64) -> ScaleTable {
        let mut t = self.clone();
        t.factor *= 1.0 + eps;
        t
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if x.is_nan() {
            return Err(Error::domain("scale function argument is NaN"));
        }
        if !self.is_exact() && x > self.x_max * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { x, max: self.x_max });
        }
        Ok(())
    }

    fn locate(&self, x: f64, len: usize) -> (usize, f64) {
        let pos = x / self.step;
        let k = (pos.floor() as usize).min(len - 2);
        (k, pos - k as f64)
    }

    pub fn eval_w(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        if x < 0.0 {
            return Ok(0.0);
        }
        Ok(self.factor
            * match &self.repr {
                Repr::Brownian(b) => b.w(x),
                Repr::Grid { w, .. } => {
                    let (k, t) = self.locate(x, w.len());
                    w[k] + t * (w[k + 1] - w[k])
                }
            })
    }

    pub fn eval_wbar(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.factor
            * match &self.repr {
                Repr::Brownian(b) => b.wbar(x),
                Repr::Grid { w, wbar, .. } => {
                    let (k, t) = self.locate(x, w.len());
                    let wx = w[k] + t * (w[k + 1] - w[k]);
                    wbar[k] + 0.5 * t * self.step * (w[k] + wx)
                }
            })
    }

    pub fn eval_z(&self, x: f64) -> Result<f64> {
        Ok(1.0 + self.alpha * self.eval_wbar(x)?)
    }

    /// Right derivative of `W^(α)` at `x >= 0`.
    pub fn eval_wprime(&self, x: f64) -> Result<f64> {
        self.check_range(x)?;
        if x < 0.0 {
            return Err(Error::domain(format!("W' is evaluated at x >= 0 only, got {x}")));
        }
        Ok(self.factor
            * match &self.repr {
                Repr::Brownian(b) => b.wprime(x),
                Repr::Grid { wprime, .. } => {
                    let (k, t) = self.locate(x, wprime.len());
                    wprime[k] + t * (wprime[k + 1] - wprime[k])
                }
            })
    }

    /// Grid nodes `0, h, 2h, …` covering `[0, x_max]`.
    pub fn nodes(&self) -> Vec<f64> {
        let n = match &self.repr {
            Repr::Grid { w, .. } => w.len(),
            Repr::Brownian(_) => (self.x_max / self.step).ceil() as usize + 1,
        };
        (0..n).map(|k| k as f64 * self.step).filter(|x| *x <= self.x_max * (1.0 + 1e-12)).collect()
    }

    /// Relative residual of `∫_0^∞ e^{-βx} W(x) dx = 1/(φ(β) - α)` for `β > η`.
    pub fn laplace_identity_residual(&self, model: &LevyModel, beta: f64) -> Result<f64> {
        if !(beta > self.eta) {
            return Err(Error::domain(format!("beta = {beta} must exceed eta = {}", self.eta)));
        }
        let target = model.laplace_exponent(beta)? - self.alpha;
        let integral = match &self.repr {
            Repr::Brownian(b) => {
                let panels = (self.x_max / 0.25).ceil().max(1.0) as usize;
                let body = quad::composite(|x| (-beta * x).exp() * b.w(x), 0.0, self.x_max, panels);
                self.factor * (body + b.laplace_tail(beta, self.x_max))
            }
            Repr::Grid { w, .. } => {
                let last = ((self.x_max / self.step).floor() as usize).min(w.len() - 1);
                let mut body = 0.0;
                for k in 0..last {
                    let (x0, x1) = (k as f64 * self.step, (k + 1) as f64 * self.step);
                    body += 0.5 * self.step * ((-beta * x0).exp() * w[k] + (-beta * x1).exp() * w[k + 1]);
                }
                let x_end = last as f64 * self.step;
                let tail = w[last] * (-beta * x_end).exp() / (beta - self.eta);
                self.factor * (body + tail)
            }
        };
        Ok((integral * target - 1.0).abs())
    }
}

type CacheKey = (String, u64, u64, u64);

/// Memoises scale tables by model, discount, range and step.
#[derive(Default)]
pub struct ScaleCache {
    tables: Mutex<HashMap<CacheKey, Arc<ScaleTable>>>,
}

impl ScaleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, model: &LevyModel, alpha: f64, x_max: f64, step: Option<f64>) -> Result<Arc<ScaleTable>> {
        let step = step.unwrap_or(x_max / DEFAULT_CELLS as f64);
        let key = (format!("{model:?}"), alpha.to_bits(), x_max.to_bits(), step.to_bits());
        if let Some(t) = self.tables.lock().expect("scale cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = Arc::new(build_scale_table(model, alpha, x_max, Some(step))?);
        self.tables
            .lock()
            .expect("scale cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&table));
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.tables.lock().expect("scale cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
