//! Potentials, first-passage transforms and overshoot laws.
//!
//! Every function works on prebuilt [`ScaleTable`]s. Fill-phase quantities
//! take the table of the input itself; release-phase quantities take the
//! table of the input shifted down by the release rate `M`.
//!
//! Potential measures are stored as cell masses rather than sampled
//! densities. Each cell mass is an exact difference of `W`, `W̄` or an
//! exponential, so the killing identity `α·mass + LT = 1` holds up to
//! rounding whatever the grid.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::levy::{JumpMeasure, LevyModel};
use crate::quad;
use crate::scale::ScaleTable;

/// Number of cells in the z-grid of an overshoot kernel.
pub const KERNEL_CELLS: usize = 1024;

/// Exponential lower tail `coef·e^{-η(λ-y)}` for `y < lo` of a free potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerTail {
    pub coef: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl LowerTail {
    fn mass_below(&self, lo: f64) -> f64 {
        if self.coef == 0.0 {
            0.0
        } else if self.eta == 0.0 {
            f64::INFINITY
        } else {
            self.coef * (-self.eta * (self.lambda - lo)).exp() / self.eta
        }
    }
}

/// An α-potential on `[lo, hi]` given by an optional atom and cell masses,
/// plus an optional exponential tail below `lo`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMeasure {
    pub lo: f64,
    pub hi: f64,
    pub atom: Option<(f64, f64)>,
    pub edges: Vec<f64>,
    pub cell_mass: Vec<f64>,
    /// Cell midpoints and the pointwise density there.
    pub nodes: Vec<f64>,
    pub density: Vec<f64>,
    pub lower_tail: Option<LowerTail>,
}

impl PotentialMeasure {
    pub fn total_mass(&self) -> f64 {
        let atom = self.atom.map_or(0.0, |(_, m)| m);
        let tail = self.lower_tail.map_or(0.0, |t| t.mass_below(self.lo));
        atom + self.cell_mass.iter().sum::<f64>() + tail
    }

    /// `∫ g dU`, with `g` taken at cell midpoints.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let mut acc = self.atom.map_or(0.0, |(y, m)| m * g(y));
        for (m, y) in self.cell_mass.iter().zip(&self.nodes) {
            acc += m * g(*y);
        }
        if let Some(t) = self.lower_tail {
            if t.coef != 0.0 {
                if t.eta == 0.0 {
                    if g(self.lo) != 0.0 || g(self.lo - 1e6) != 0.0 {
                        return f64::INFINITY;
                    }
                } else {
                    let w = t.coef * (-t.eta * (t.lambda - self.lo)).exp();
                    let lo = self.lo;
                    acc += w * quad::to_infinity(|s| g(lo - s) * (-t.eta * s).exp(), 0.0, 1.0 / t.eta);
                }
            }
        }
        acc
    }
}

fn cell_edges(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = (((hi - lo) / step).ceil() as usize).max(1);
    let width = (hi - lo) / n as f64;
    let mut e: Vec<f64> = (0..n).map(|k| lo + k as f64 * width).collect();
    e.push(hi);
    e
}

fn midpoints(edges: &[f64]) -> Vec<f64> {
    edges.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

fn wbar_diff(t: &ScaleTable, a: f64, b: f64, shift: f64) -> Result<f64> {
    Ok(t.eval_wbar(b - shift)? - t.eval_wbar(a - shift)?)
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::domain(msg()))
    }
}

/// Rejects a transform whose defining difference cancelled below zero.
fn resolved(lt: f64) -> Result<f64> {
    if lt < 0.0 {
        return Err(Error::Numerical(format!(
            "fill transform {lt:e} lost to cancellation; refine the grid or lower alpha"
        )));
    }
    Ok(lt)
}

// ---------------------------------------------------------------- fill phase

/// `E_x[e^{-αT}]` for the first exit of the free input from `[a, λ]`.
pub fn lt_two_sided(t: &ScaleTable, a: f64, lambda: f64, x: f64) -> Result<f64> {
    require(a <= x && x <= lambda, || format!("need a <= x <= lambda, got a={a}, x={x}, lambda={lambda}"))?;
    let wa = t.eval_w(lambda - a)?;
    require(wa > 0.0, || "degenerate window: W(lambda - a) = 0".into())?;
    let za = t.eval_z(lambda - a)?;
    Ok(t.eval_z(lambda - x)? - (za - 1.0) * t.eval_w(lambda - x)? / wa)
}

/// Potential of the free input killed on leaving `[a, λ]`.
pub fn potential_two_sided(t: &ScaleTable, a: f64, lambda: f64, x: f64) -> Result<PotentialMeasure> {
    require(a <= x && x <= lambda, || format!("need a <= x <= lambda, got a={a}, x={x}, lambda={lambda}"))?;
    let wa = t.eval_w(lambda - a)?;
    require(wa > 0.0, || "degenerate window: W(lambda - a) = 0".into())?;
    let ratio = t.eval_w(lambda - x)? / wa;
    let edges = cell_edges(a, lambda, t.step());
    let mut cell_mass = Vec::with_capacity(edges.len() - 1);
    for p in edges.windows(2) {
        cell_mass.push(ratio * wbar_diff(t, p[0], p[1], a)? - wbar_diff(t, p[0], p[1], x)?);
    }
    let nodes = midpoints(&edges);
    let density = nodes
        .iter()
        .map(|&y| Ok(ratio * t.eval_w(y - a)? - t.eval_w(y - x)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialMeasure { lo: a, hi: lambda, atom: None, edges, cell_mass, nodes, density, lower_tail: None })
}

/// Density `u^α(x, y)` of the free input killed on first passage above `λ`.
pub fn potential_free(t: &ScaleTable, lambda: f64, x: f64, y: f64) -> Result<f64> {
    require(x <= lambda && y <= lambda, || format!("need x, y <= lambda = {lambda}"))?;
    Ok(t.eval_w(lambda - x)? * (-t.eta() * (lambda - y)).exp() - t.eval_w(y - x)?)
}

/// The free fill-phase potential as a measure, with cells on `[lo, λ]` and
/// an exponential tail below `lo`. `lo` is lowered to `x` if needed.
pub fn potential_free_measure(t: &ScaleTable, lambda: f64, x: f64, lo: f64) -> Result<PotentialMeasure> {
    require(x <= lambda, || format!("need x <= lambda, got x={x}, lambda={lambda}"))?;
    let lo = lo.min(x);
    let eta = t.eta();
    let coef = t.eval_w(lambda - x)?;
    let edges = cell_edges(lo, lambda, t.step());
    let mut cell_mass = Vec::with_capacity(edges.len() - 1);
    for p in edges.windows(2) {
        let (a, b) = (p[0], p[1]);
        let exp_part = if eta == 0.0 {
            b - a
        } else {
            (-eta * (lambda - b)).exp() * -(-eta * (b - a)).exp_m1() / eta
        };
        cell_mass.push(coef * exp_part - wbar_diff(t, a, b, x)?);
    }
    let nodes = midpoints(&edges);
    let density = nodes.iter().map(|&y| potential_free(t, lambda, x, y)).collect::<Result<Vec<_>>>()?;
    Ok(PotentialMeasure {
        lo,
        hi: lambda,
        atom: None,
        edges,
        cell_mass,
        nodes,
        density,
        lower_tail: Some(LowerTail { coef, eta, lambda }),
    })
}

/// Potential of the input reflected at its infimum, killed on first passage
/// above `λ`. Carries an atom at 0 for bounded-variation inputs.
pub fn potential_reflected(t: &ScaleTable, lambda: f64, x: f64) -> Result<PotentialMeasure> {
    require((0.0..=lambda).contains(&x), || format!("need 0 <= x <= lambda, got x={x}, lambda={lambda}"))?;
    let wp = t.eval_wprime(lambda)?;
    if !(wp > 0.0) {
        return Err(Error::Numerical(format!("W'(lambda) = {wp} is not positive")));
    }
    let ratio = t.eval_w(lambda - x)? / wp;
    let edges = cell_edges(0.0, lambda, t.step());
    let mut cell_mass = Vec::with_capacity(edges.len() - 1);
    for p in edges.windows(2) {
        let dw = t.eval_w(p[1])? - t.eval_w(p[0])?;
        cell_mass.push(ratio * dw - wbar_diff(t, p[0], p[1], x)?);
    }
    let nodes = midpoints(&edges);
    let density = nodes
        .iter()
        .map(|&y| Ok(ratio * t.eval_wprime(y)? - t.eval_w(y - x)?))
        .collect::<Result<Vec<_>>>()?;
    let atom_mass = ratio * t.w_at_zero();
    Ok(PotentialMeasure {
        lo: 0.0,
        hi: lambda,
        atom: (atom_mass > 0.0).then_some((0.0, atom_mass)),
        edges,
        cell_mass,
        nodes,
        density,
        lower_tail: None,
    })
}

/// `E_x[e^{-αT̂}]` for the free input, `T̂` the first passage above `λ`.
///
/// At `α = 0` this is the crossing probability, which is below one when the
/// input drifts downward.
pub fn lt_fill_free(t: &ScaleTable, lambda: f64, x: f64) -> Result<f64> {
    require(x <= lambda, || format!("need x <= lambda, got x={x}, lambda={lambda}"))?;
    resolved(t.eval_z(lambda - x)? - t.kill_ratio() * t.eval_w(lambda - x)?)
}

/// `E_x[T̂]` for the free input; `+∞` when `η(0) = 0`.
pub fn mean_fill_free(t0: &ScaleTable, lambda: f64, x: f64) -> Result<f64> {
    require(x <= lambda, || format!("need x <= lambda, got x={x}, lambda={lambda}"))?;
    if t0.eta() == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t0.eval_w(lambda - x)? / t0.eta() - t0.eval_wbar(lambda - x)?)
}

pub fn lt_fill_reflected(t: &ScaleTable, lambda: f64, x: f64) -> Result<f64> {
    require((0.0..=lambda).contains(&x), || format!("need 0 <= x <= lambda, got x={x}, lambda={lambda}"))?;
    let wp = t.eval_wprime(lambda)?;
    resolved(t.eval_z(lambda - x)? - t.eval_w(lambda - x)? * t.alpha() * t.eval_w(lambda)? / wp)
}

pub fn mean_fill_reflected(t0: &ScaleTable, lambda: f64, x: f64) -> Result<f64> {
    require((0.0..=lambda).contains(&x), || format!("need 0 <= x <= lambda, got x={x}, lambda={lambda}"))?;
    let wp = t0.eval_wprime(lambda)?;
    Ok(t0.eval_w(lambda - x)? * t0.eval_w(lambda)? / wp - t0.eval_wbar(lambda - x)?)
}

// ------------------------------------------------------------- release phase

fn check_release(v: f64, tau: f64, x: f64) -> Result<()> {
    require(tau <= x && x <= v, || format!("need tau <= x <= V, got tau={tau}, x={x}, V={v}"))
}

/// Density `u*^α(x, y)` of the release-phase content killed below `τ`.
pub fn potential_release(ts: &ScaleTable, v: f64, tau: f64, x: f64, y: f64) -> Result<f64> {
    check_release(v, tau, x)?;
    require(v.is_finite(), || "release potential needs a finite capacity V".into())?;
    if y <= tau || y > v {
        return Ok(0.0);
    }
    let r = ts.eval_z(v - x)? / ts.eval_z(v - tau)?;
    Ok(r * ts.eval_w(y - tau)? - ts.eval_w(y - x)?)
}

pub fn potential_release_measure(ts: &ScaleTable, v: f64, tau: f64, x: f64) -> Result<PotentialMeasure> {
    check_release(v, tau, x)?;
    require(v.is_finite(), || "release potential needs a finite capacity V".into())?;
    let r = ts.eval_z(v - x)? / ts.eval_z(v - tau)?;
    let edges = cell_edges(tau, v, ts.step());
    let mut cell_mass = Vec::with_capacity(edges.len() - 1);
    for p in edges.windows(2) {
        cell_mass.push(r * wbar_diff(ts, p[0], p[1], tau)? - wbar_diff(ts, p[0], p[1], x)?);
    }
    let nodes = midpoints(&edges);
    let density = nodes
        .iter()
        .map(|&y| potential_release(ts, v, tau, x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(PotentialMeasure { lo: tau, hi: v, atom: None, edges, cell_mass, nodes, density, lower_tail: None })
}

/// `E_x[e^{-αT*}]` for the release phase started at `x`.
pub fn lt_release(ts: &ScaleTable, v: f64, tau: f64, x: f64) -> Result<f64> {
    check_release(v, tau, x)?;
    if v.is_infinite() {
        return Ok((-ts.eta() * (x - tau)).exp());
    }
    Ok(ts.eval_z(v - x)? / ts.eval_z(v - tau)?)
}

/// `E_x[T*]` for the release phase started at `x`.
///
/// For `V = ∞` this is `(x - τ)/(M - E I_1)`, or `+∞` when `M <= E I_1`.
pub fn mean_release(ts0: &ScaleTable, v: f64, tau: f64, x: f64) -> Result<f64> {
    check_release(v, tau, x)?;
    if v.is_infinite() {
        let net = -ts0.mean_rate();
        return Ok(if net > 0.0 { (x - tau) / net } else { f64::INFINITY });
    }
    Ok(ts0.eval_wbar(v - tau)? - ts0.eval_wbar(v - x)?)
}

// ----------------------------------------------------------------- overshoot

type TailFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Joint law of `(e^{-αT̂}, I_{T̂})`: an atom at `λ` and the tail mass
/// `T(z) = E_x[e^{-αT̂}; I_{T̂} > z]` for `z >= λ`.
#[derive(Clone)]
pub struct OvershootKernel {
    pub x: f64,
    pub lambda: f64,
    pub atom_at_lambda: f64,
    /// The fill-phase transform the kernel decomposes.
    pub lt: f64,
    pub z: Vec<f64>,
    pub tail: Vec<f64>,
    tail_fn: Option<TailFn>,
}

impl fmt::Debug for OvershootKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OvershootKernel")
            .field("x", &self.x)
            .field("lambda", &self.lambda)
            .field("atom_at_lambda", &self.atom_at_lambda)
            .field("lt", &self.lt)
            .field("z_nodes", &self.z.len())
            .finish()
    }
}

impl OvershootKernel {
    /// Mass of `(z, ∞)`, excluding the atom.
    pub fn tail_beyond(&self, z: f64) -> f64 {
        match &self.tail_fn {
            None => 0.0,
            Some(f) => {
                if z < self.lambda {
                    f(self.lambda)
                } else {
                    f(z)
                }
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_at_lambda + self.tail_beyond(self.lambda)
    }

    /// Cell densities `(T_j - T_{j+1})/Δz` at cell midpoints of the z-grid.
    pub fn density(&self) -> (Vec<f64>, Vec<f64>) {
        let mids = midpoints(&self.z);
        let dens = self
            .z
            .windows(2)
            .zip(self.tail.windows(2))
            .map(|(z, t)| (t[0] - t[1]) / (z[1] - z[0]))
            .collect();
        (mids, dens)
    }

    /// `∫ G dk` over `[λ, ∞)`. Mass above the last node is assigned to it.
    pub fn integrate<G: FnMut(f64) -> f64>(&self, mut g: G) -> f64 {
        let mut acc = if self.atom_at_lambda != 0.0 { self.atom_at_lambda * g(self.lambda) } else { 0.0 };
        if self.z.len() < 2 {
            return acc;
        }
        let gz: Vec<f64> = self.z.iter().map(|&z| g(z)).collect();
        for j in 0..self.z.len() - 1 {
            let dm = self.tail[j] - self.tail[j + 1];
            if dm != 0.0 {
                acc += 0.5 * (gz[j] + gz[j + 1]) * dm;
            }
        }
        let last = *self.tail.last().unwrap();
        if last != 0.0 {
            acc += gz[gz.len() - 1] * last;
        }
        acc
    }
}

/// Cell data for `Σ_j c_j · avg_{y∈cell j} ν̄(z - y)`.
#[derive(Clone)]
struct CellSum {
    edges: Vec<f64>,
    coef: Vec<f64>,
}

impl CellSum {
    fn eval(&self, jumps: &JumpMeasure, z: f64) -> f64 {
        let mu = jumps.mean();
        let mut acc = 0.0;
        let mut f_prev = jumps.ladder_cdf(z - self.edges[0]);
        for (j, c) in self.coef.iter().enumerate() {
            let (a, b) = (self.edges[j], self.edges[j + 1]);
            let f_next = jumps.ladder_cdf(z - b);
            if *c != 0.0 {
                acc += c * mu * (f_prev - f_next) / (b - a);
            }
            f_prev = f_next;
        }
        acc
    }
}

/// Upper end of the z-grid: `V` when finite, else where the tail is negligible.
fn kernel_extent(lambda: f64, v: f64, tail: &dyn Fn(f64) -> f64) -> f64 {
    if v.is_finite() {
        return v.max(lambda);
    }
    let base = tail(lambda).abs().max(1e-300);
    let mut d = 1.0;
    for _ in 0..60 {
        if tail(lambda + d) <= 1e-12 * base {
            break;
        }
        d *= 2.0;
    }
    lambda + d
}

fn build_kernel(x: f64, lambda: f64, v: f64, lt: f64, atom: f64, tail_fn: Option<TailFn>) -> OvershootKernel {
    let (z, tail) = match &tail_fn {
        None => (vec![lambda], vec![0.0]),
        Some(f) => {
            let z_max = kernel_extent(lambda, v, f.as_ref());
            if z_max <= lambda {
                (vec![lambda], vec![f(lambda)])
            } else {
                let z = cell_edges(lambda, z_max, (z_max - lambda) / KERNEL_CELLS as f64);
                let tail = z.iter().map(|&s| f(s)).collect();
                (z, tail)
            }
        }
    };
    OvershootKernel { x, lambda, atom_at_lambda: atom, lt, z, tail, tail_fn }
}

/// Overshoot kernel of the free input over `λ`, on a z-grid up to `V`.
pub fn overshoot_free(model: &LevyModel, t: &ScaleTable, lambda: f64, x: f64, v: f64) -> Result<OvershootKernel> {
    let lt = lt_fill_free(t, lambda, x)?;
    let jumps = match model.jumps() {
        None => return Ok(build_kernel(x, lambda, v, lt, lt, None)),
        Some(j) => j.clone(),
    };
    let coef_free = t.eval_w(lambda - x)?;
    let eta = t.eta();
    let edges = cell_edges(x, lambda, t.step());
    let coef = edges
        .windows(2)
        .map(|p| wbar_diff(t, p[0], p[1], x))
        .collect::<Result<Vec<_>>>()?;
    let cells = CellSum { edges, coef };
    let f: TailFn = Arc::new(move |z: f64| {
        let free = coef_free * jumps.discounted_tail_integral(eta, z - lambda);
        (free - cells.eval(&jumps, z)).max(0.0)
    });
    let kernel = build_kernel(x, lambda, v, lt, 0.0, Some(f));
    let gap = (lt - kernel.total_mass()).abs();
    if gap > 1e-5 * lt.max(1e-300) {
        log::warn!("free overshoot kernel mass differs from the crossing transform by {gap:e}");
    }
    Ok(kernel)
}

/// Overshoot kernel of the reflected input over `λ`, on a z-grid up to `V`.
///
/// The atom at `λ` is the part of the crossing transform not carried by
/// jumps; it is zero in exact arithmetic for jump inputs and is reported
/// as a consistency failure if it comes out materially negative.
pub fn overshoot_reflected(
    model: &LevyModel,
    t: &ScaleTable,
    lambda: f64,
    x: f64,
    v: f64,
) -> Result<OvershootKernel> {
    let lt = lt_fill_reflected(t, lambda, x)?;
    let jumps = match model.jumps() {
        None => return Ok(build_kernel(x, lambda, v, lt, lt, None)),
        Some(j) => j.clone(),
    };
    let scale = t.eval_w(lambda - x)? / t.eval_wprime(lambda)?;
    let w0 = t.w_at_zero();
    let edges = cell_edges(0.0, lambda, t.step());
    let coef = edges
        .windows(2)
        .map(|p| Ok(scale * (t.eval_w(p[1])? - t.eval_w(p[0])?) - wbar_diff(t, p[0], p[1], x)?))
        .collect::<Result<Vec<_>>>()?;
    let cells = CellSum { edges, coef };
    let f: TailFn = Arc::new(move |z: f64| (scale * w0 * jumps.tail(z) + cells.eval(&jumps, z)).max(0.0));
    let mut kernel = build_kernel(x, lambda, v, lt, 0.0, Some(f));
    let residual = lt - kernel.tail_beyond(lambda);
    if residual < -ATOM_TOLERANCE * lt.max(1e-300) {
        return Err(Error::Numerical(format!(
            "reflected overshoot atom is negative ({residual:e}); refine the grid"
        )));
    }
    kernel.atom_at_lambda = residual.max(0.0);
    Ok(kernel)
}

/// Relative slack allowed for a negative reflected atom.
pub const ATOM_TOLERANCE: f64 = 1e-5;

// --------------------------------------------------------------------- cycle

/// `E_x[e^{-αT*}]` for a start in the fill phase, from the overshoot kernel
/// at the same `α` and the shifted table at that `α`.
pub fn lt_cycle(kernel: &OvershootKernel, ts: &ScaleTable, v: f64, tau: f64) -> Result<f64> {
    let mut err = None;
    let value = kernel.integrate(|z| match lt_release(ts, v, tau, z.min(v)) {
        Ok(r) => r,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// `E_τ[T*] = E_τ[T̂] + ∫ E_{z∧V}[T*] k_0(dz)`.
pub fn mean_cycle(mean_fill_tau: f64, kernel0: &OvershootKernel, ts0: &ScaleTable, v: f64, tau: f64) -> Result<f64> {
    if mean_fill_tau.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut err = None;
    let release = kernel0.integrate(|z| match mean_release(ts0, v, tau, z.min(v)) {
        Ok(r) => r,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(mean_fill_tau + release),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpDist;
    use crate::scale::build_scale_table;
    use approx::assert_relative_eq;

    fn brownian(mu: f64, s2: f64, reflected: bool) -> LevyModel {
        LevyModel::brownian(mu, s2, reflected).unwrap()
    }

    fn cp_exp(reflected: bool) -> LevyModel {
        LevyModel::bounded_variation(
            2.0,
            JumpMeasure::CompoundPoisson { rate: 1.0, dist: JumpDist::Exponential { b: 1.0 } },
            reflected,
        )
        .unwrap()
    }

    #[test]
    fn two_sided_reference() {
        let t = build_scale_table(&brownian(0.0, 1.0, false), 0.0, 2.0, None).unwrap();
        let u = potential_two_sided(&t, 0.0, 1.0, 0.5).unwrap();
        let k = u.nodes.iter().position(|y| (y - 0.5).abs() < 1e-3).unwrap();
        assert!((u.density[k] - 0.5).abs() < 2e-3);
    }

    #[test]
    fn free_potential_reference() {
        let t = build_scale_table(&brownian(1.0, 1.0, false), 0.0, 3.0, None).unwrap();
        let got = potential_free(&t, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(got, 1.0 - (-2f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn fill_transforms_reference() {
        let t = build_scale_table(&brownian(1.0, 1.0, false), 1.5, 3.0, None).unwrap();
        assert_relative_eq!(lt_fill_free(&t, 2.0, 1.0).unwrap(), (-1f64).exp(), max_relative = 1e-13);
        let t0 = build_scale_table(&brownian(1.0, 1.0, false), 0.0, 3.0, None).unwrap();
        assert_relative_eq!(mean_fill_free(&t0, 2.0, 0.0).unwrap(), 2.0, max_relative = 1e-13);
        let t = build_scale_table(&brownian(0.0, 1.0, true), 1.0, 2.0, None).unwrap();
        assert_relative_eq!(lt_fill_reflected(&t, 1.0, 0.0).unwrap(), 1.0 / 2f64.sqrt().cosh(), max_relative = 1e-13);
        let t0 = build_scale_table(&brownian(1.0, 2.0, true), 0.0, 2.0, None).unwrap();
        assert_relative_eq!(mean_fill_reflected(&t0, 1.0, 0.0).unwrap(), (-1f64).exp(), max_relative = 1e-13);
        let t0 = build_scale_table(&brownian(0.0, 1.0, false), 0.0, 2.0, None).unwrap();
        assert!(mean_fill_free(&t0, 1.0, 0.0).unwrap().is_infinite());
    }

    #[test]
    fn downward_drift_crossing_probability() {
        let t = build_scale_table(&brownian(-0.5, 1.0, false), 0.0, 3.0, None).unwrap();
        assert_relative_eq!(lt_fill_free(&t, 2.0, 0.0).unwrap(), (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn release_reference() {
        let m = brownian(0.0, 2.0, true).shifted(1.0);
        let ts0 = build_scale_table(&m, 0.0, 2.0, None).unwrap();
        let want = 1.0 + (-2f64).exp() - (-1f64).exp();
        assert_relative_eq!(mean_release(&ts0, 2.0, 0.0, 1.0).unwrap(), want, max_relative = 1e-13);
        let ts = build_scale_table(&m, 0.5, 2.0, None).unwrap();
        let d = 3f64.sqrt();
        let z = |x: f64| (-x / 2.0).exp() * ((d * x / 2.0).cosh() + (d * x / 2.0).sinh() / d);
        assert_relative_eq!(lt_release(&ts, 2.0, 0.0, 1.0).unwrap(), z(1.0) / z(2.0), max_relative = 1e-13);
        assert_relative_eq!(potential_release(&ts0, 2.0, 0.0, 2.0, 1.0).unwrap(), 1.0 - (-1f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn infinite_capacity_release_mean() {
        let base = cp_exp(false);
        let m = base.shifted(2.0);
        let ts0 = build_scale_table(&m, 0.0, 5.0, None).unwrap();
        let net = 2.0 - base.mean_rate();
        assert_relative_eq!(mean_release(&ts0, f64::INFINITY, 0.0, 3.0).unwrap(), 3.0 / net, max_relative = 1e-14);
    }

    #[test]
    fn killing_identity_reflected_bv() {
        let m = cp_exp(true);
        let t = build_scale_table(&m, 0.7, 3.0, None).unwrap();
        for x in [0.0, 0.4, 1.0] {
            let u = potential_reflected(&t, 1.0, x).unwrap();
            let lt = lt_fill_reflected(&t, 1.0, x).unwrap();
            assert!((0.7 * u.total_mass() + lt - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn brownian_kernel_is_atomic() {
        let m = brownian(0.5, 1.0, false);
        let t = build_scale_table(&m, 0.3, 4.0, None).unwrap();
        let k = overshoot_free(&m, &t, 1.0, 0.2, 3.0).unwrap();
        assert_relative_eq!(k.atom_at_lambda, lt_fill_free(&t, 1.0, 0.2).unwrap());
        assert_eq!(k.tail_beyond(1.5), 0.0);
    }

    #[test]
    fn cp_kernel_tail_is_exponential() {
        let m = cp_exp(true);
        let t = build_scale_table(&m, 0.2, 3.0, None).unwrap();
        let k = overshoot_reflected(&m, &t, 1.0, 0.0, f64::INFINITY).unwrap();
        let t0 = k.tail_beyond(1.0);
        for u in [0.5, 1.0, 3.0] {
            assert!((k.tail_beyond(1.0 + u) / t0 - (-u as f64).exp()).abs() < 1e-3);
        }
        assert!((k.total_mass() - k.lt).abs() < 1e-5);
        assert!(k.atom_at_lambda < 1e-5);
    }

    #[test]
    fn cp_free_kernel_mass() {
        let m = cp_exp(false);
        let t = build_scale_table(&m, 0.5, 3.0, None).unwrap();
        let k = overshoot_free(&m, &t, 1.0, 0.3, 2.0).unwrap();
        assert!((k.total_mass() - k.lt).abs() < 1e-5 * k.lt, "{} vs {}", k.total_mass(), k.lt);
    }
}
