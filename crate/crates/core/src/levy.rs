//! Spectrally positive Lévy inputs: exponents, roots and ladder quantities.
//!
//! Two model shapes are supported. A Brownian motion with drift
//! `I_t = μt + σB_t`, and a bounded-variation process `I_t = S_t - ςt`
//! where `S` is a driftless subordinator and `ς > 0` is the linear drain.

use crate::error::{Error, Result};
use crate::quad;
use crate::special::{erf, erfc, exp_integral_e1};

/// Jump-size distribution for a compound Poisson subordinator.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpDist {
    Exponential { b: f64 },
    Tabulated(TabulatedDensity),
}

/// Lévy measure of the subordinator part of a bounded-variation input.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMeasure {
    CompoundPoisson { rate: f64, dist: JumpDist },
    Gamma { a: f64, b: f64 },
    InverseGaussian { sigma: f64, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Brownian { mu: f64, sigma2: f64 },
    BoundedVariation { drift: f64, jumps: JumpMeasure },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    pub kind: ModelKind,
    pub reflected: bool,
}

/// A jump density given by values on a uniform grid `0, s, 2s, …`,
/// linearly interpolated and zero past the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    step: f64,
    values: Vec<f64>,
    // cumulative distribution at the nodes
    cdf: Vec<f64>,
    // ∫_0^{x_k} (1 - G)
    head: Vec<f64>,
    // ∫_{x_k}^{∞} (1 - G)
    tail: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl TabulatedDensity {
    /// Builds the table. Mass must be 1 within 1e-8 unless `normalize` is set.
    pub fn new(step: f64, values: Vec<f64>, normalize: bool) -> Result<Self> {
        positive("tabulated step", step)?;
        if values.len() < 2 {
            return Err(Error::config("tabulated density needs at least two values"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::config("tabulated density values must be finite and >= 0"));
        }
        let n = values.len();
        let mass = step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]));
        if !(mass > 0.0) {
            return Err(Error::config("tabulated density has zero mass"));
        }
        if !normalize && (mass - 1.0).abs() > 1e-8 {
            return Err(Error::config(format!(
                "tabulated density integrates to {mass}, not 1 (set normalize to rescale)"
            )));
        }
        let values: Vec<f64> = values.iter().map(|v| v / mass).collect();
        let mut cdf = vec![0.0; n];
        let mut head = vec![0.0; n];
        for k in 0..n - 1 {
            let (g0, g1) = (values[k], values[k + 1]);
            cdf[k + 1] = cdf[k] + 0.5 * step * (g0 + g1);
            let s0 = 1.0 - cdf[k];
            head[k + 1] = head[k] + s0 * step - g0 * step * step / 2.0 - (g1 - g0) * step * step / 6.0;
        }
        let mut tail = vec![0.0; n];
        for k in (0..n - 1).rev() {
            tail[k] = tail[k + 1] + (head[k + 1] - head[k]);
        }
        Ok(TabulatedDensity { step, values, cdf, head, tail })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn support_end(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if x >= self.support_end() {
            return None;
        }
        let k = ((x / self.step).floor() as usize).min(self.values.len() - 2);
        Some((k, x - k as f64 * self.step))
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self.locate(x) {
            None => 0.0,
            Some((k, t)) => {
                let d = self.values[k + 1] - self.values[k];
                self.values[k] + d * t / self.step
            }
        }
    }

    /// Survival function `1 - G(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.locate(x) {
            None => 0.0,
            Some((k, t)) => {
                let (g0, d) = (self.values[k], self.values[k + 1] - self.values[k]);
                let s = 1.0 - self.cdf[k] - g0 * t - d * t * t / (2.0 * self.step);
                s.max(0.0)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.head[self.values.len() - 1]
    }

    /// Inverse of the jump distribution function.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.values.len();
        if u <= 0.0 {
            return 0.0;
        }
        if u >= self.cdf[n - 1] {
            return self.support_end();
        }
        let k = (self.cdf.partition_point(|&c| c <= u) - 1).min(n - 2);
        let (g0, d) = (self.values[k], self.values[k + 1] - self.values[k]);
        let r = u - self.cdf[k];
        let disc = (g0 * g0 + 2.0 * d * r / self.step).max(0.0);
        let denom = g0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        k as f64 * self.step + t.clamp(0.0, self.step)
    }

    /// `∫_x^∞ (1 - G)`.
    fn survival_integral_from(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.mean();
        }
        match self.locate(x) {
            None => 0.0,
            Some((k, t)) => {
                let s = self.step;
                let (g0, d) = (self.values[k], self.values[k + 1] - self.values[k]);
                let s0 = 1.0 - self.cdf[k];
                let upto = s0 * t - g0 * t * t / 2.0 - d * t * t * t / (6.0 * s);
                let cell = self.head[k + 1] - self.head[k];
                (self.tail[k + 1] + cell - upto).max(0.0)
            }
        }
    }

    /// `∫(1 - e^{-θx}) g(x) dx`.
    fn laplace_complement(&self, theta: f64) -> f64 {
        let s = self.step;
        let n = self.values.len();
        if theta * s <= 1.0 {
            let mut acc = 0.0;
            for k in 0..n - 1 {
                let lo = k as f64 * s;
                acc += quad::gauss_legendre(|x| -(-theta * x).exp_m1() * self.density(x), lo, lo + s);
            }
            acc
        } else {
            let ts = theta * s;
            let e0 = -(-ts).exp_m1() / theta;
            let e1 = (1.0 - (-ts).exp() * (1.0 + ts)) / (theta * theta);
            let mut acc = 0.0;
            for k in 0..n - 1 {
                let w = (-theta * k as f64 * s).exp();
                if w < 1e-300 {
                    break;
                }
                let d = self.values[k + 1] - self.values[k];
                acc += w * (self.values[k] * e0 + d / s * e1);
            }
            1.0 - acc
        }
    }

    /// `∫ x e^{-θx} g(x) dx`.
    fn laplace_moment(&self, theta: f64) -> f64 {
        let s = self.step;
        (0..self.values.len() - 1)
            .map(|k| {
                let lo = k as f64 * s;
                quad::gauss_legendre(|x| x * (-theta * x).exp() * self.density(x), lo, lo + s)
            })
            .sum()
    }
}

impl JumpMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpMeasure::CompoundPoisson { rate, dist } => {
                positive("jump rate", *rate)?;
                if let JumpDist::Exponential { b } = dist {
                    positive("exponential jump parameter b", *b)?;
                }
                Ok(())
            }
            JumpMeasure::Gamma { a, b } => {
                positive("gamma parameter a", *a)?;
                positive("gamma parameter b", *b)
            }
            JumpMeasure::InverseGaussian { sigma, c } => {
                positive("inverse Gaussian sigma", *sigma)?;
                positive("inverse Gaussian c", *c)
            }
        }
    }

    /// `∫ x ν(dx)`, the mean input rate of the subordinator.
    pub fn mean(&self) -> f64 {
        match self {
            JumpMeasure::CompoundPoisson { rate, dist } => match dist {
                JumpDist::Exponential { b } => rate / b,
                JumpDist::Tabulated(t) => rate * t.mean(),
            },
            JumpMeasure::Gamma { a, b } => a / b,
            JumpMeasure::InverseGaussian { c, .. } => 1.0 / c,
        }
    }

    fn ig_k(sigma: f64, c: f64) -> f64 {
        c * c / (2.0 * sigma * sigma)
    }

    /// Lévy tail `ν̄(x) = ν((x, ∞))`. Infinite at `x <= 0` for the
    /// infinite-activity families.
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            JumpMeasure::CompoundPoisson { rate, dist } => {
                if x <= 0.0 {
                    return *rate;
                }
                match dist {
                    JumpDist::Exponential { b } => rate * (-b * x).exp(),
                    JumpDist::Tabulated(t) => rate * t.survival(x),
                }
            }
            JumpMeasure::Gamma { a, b } => {
                if x <= 0.0 {
                    f64::INFINITY
                } else {
                    a * exp_integral_e1(b * x)
                }
            }
            JumpMeasure::InverseGaussian { sigma, c } => {
                if x <= 0.0 {
                    return f64::INFINITY;
                }
                let k = Self::ig_k(*sigma, *c);
                let pre = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
                let v = 2.0 * (-k * x).exp() / x.sqrt()
                    - 2.0 * (std::f64::consts::PI * k).sqrt() * erfc((k * x).sqrt());
                (pre * v).max(0.0)
            }
        }
    }

    /// `ψ(θ) = ∫(1 - e^{-θx}) ν(dx)`.
    pub fn laplace_complement(&self, theta: f64) -> f64 {
        match self {
            JumpMeasure::CompoundPoisson { rate, dist } => match dist {
                JumpDist::Exponential { b } => rate * theta / (b + theta),
                JumpDist::Tabulated(t) => rate * t.laplace_complement(theta),
            },
            JumpMeasure::Gamma { a, b } => a * (theta / b).ln_1p(),
            JumpMeasure::InverseGaussian { sigma, c } => {
                let g = c / sigma;
                // √(2θ+γ²) - γ written without cancellation
                let root = (2.0 * theta + g * g).sqrt();
                (2.0 * theta / (root + g)) / sigma
            }
        }
    }

    /// `ψ'(θ) = ∫ x e^{-θx} ν(dx)`.
    pub fn laplace_complement_slope(&self, theta: f64) -> f64 {
        match self {
            JumpMeasure::CompoundPoisson { rate, dist } => match dist {
                JumpDist::Exponential { b } => rate * b / ((b + theta) * (b + theta)),
                JumpDist::Tabulated(t) => rate * t.laplace_moment(theta),
            },
            JumpMeasure::Gamma { a, b } => a / (b + theta),
            JumpMeasure::InverseGaussian { sigma, c } => {
                let g = c / sigma;
                1.0 / (sigma * (2.0 * theta + g * g).sqrt())
            }
        }
    }

    /// Ladder-height density `f(x) = ν̄(x)/μ`.
    pub fn ladder_density(&self, x: f64) -> f64 {
        self.tail(x) / self.mean()
    }

    /// Ladder-height distribution `F(x) = ∫_0^x ν̄ / μ`.
    pub fn ladder_cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            JumpMeasure::CompoundPoisson { dist: JumpDist::Exponential { b }, .. } => -(-b * x).exp_m1(),
            JumpMeasure::CompoundPoisson { dist: JumpDist::Tabulated(t), .. } => {
                1.0 - t.survival_integral_from(x) / t.mean()
            }
            JumpMeasure::Gamma { b, .. } => {
                let z = b * x;
                (-(-z).exp_m1() + z * exp_integral_e1(z)).min(1.0)
            }
            JumpMeasure::InverseGaussian { sigma, c } => {
                let k = Self::ig_k(*sigma, *c);
                (erf((k * x).sqrt()) + x * self.ladder_density(x)).min(1.0)
            }
        }
    }

    /// `1 - F(x)`, computed without cancellation where a direct form exists.
    pub fn ladder_survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            JumpMeasure::CompoundPoisson { dist: JumpDist::Exponential { b }, .. } => (-b * x).exp(),
            JumpMeasure::CompoundPoisson { dist: JumpDist::Tabulated(t), .. } => {
                t.survival_integral_from(x) / t.mean()
            }
            JumpMeasure::Gamma { b, .. } => {
                let z = b * x;
                ((-z).exp() - z * exp_integral_e1(z)).max(0.0)
            }
            JumpMeasure::InverseGaussian { sigma, c } => {
                let k = Self::ig_k(*sigma, *c);
                (erfc((k * x).sqrt()) - x * self.ladder_density(x)).max(0.0)
            }
        }
    }

    /// `Ψ_η(c) = ∫_0^∞ e^{-ηt} ν̄(c + t) dt` for `c >= 0`.
    pub fn discounted_tail_integral(&self, eta: f64, c: f64) -> f64 {
        let mu = self.mean();
        if let JumpMeasure::CompoundPoisson { rate, dist: JumpDist::Exponential { b } } = self {
            return rate * (-b * c).exp() / (eta + b);
        }
        let head = mu * self.ladder_survival(c);
        if eta == 0.0 {
            return head;
        }
        let scale = match self {
            JumpMeasure::Gamma { b, .. } => 1.0 / (b + eta),
            JumpMeasure::InverseGaussian { sigma, c: cc } => 1.0 / (Self::ig_k(*sigma, *cc) + eta),
            JumpMeasure::CompoundPoisson { dist: JumpDist::Tabulated(t), .. } => {
                t.step().max(1.0 / eta).min(t.support_end().max(t.step()))
            }
            JumpMeasure::CompoundPoisson { .. } => 1.0 / eta,
        };
        let rest = quad::to_infinity(|t| (-eta * t).exp() * self.ladder_survival(c + t), 0.0, scale);
        (head - eta * mu * rest).max(0.0)
    }
}

impl LevyModel {
    pub fn brownian(mu: f64, sigma2: f64, reflected: bool) -> Result<Self> {
        let m = LevyModel { kind: ModelKind::Brownian { mu, sigma2 }, reflected };
        m.validate()?;
        Ok(m)
    }

    pub fn bounded_variation(drift: f64, jumps: JumpMeasure, reflected: bool) -> Result<Self> {
        let m = LevyModel { kind: ModelKind::BoundedVariation { drift, jumps }, reflected };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKind::Brownian { mu, sigma2 } => {
                if !mu.is_finite() {
                    return Err(Error::config(format!("mu must be finite, got {mu}")));
                }
                positive("sigma2", *sigma2)
            }
            ModelKind::BoundedVariation { drift, jumps } => {
                positive("sigma_drift", *drift)?;
                jumps.validate()
            }
        }
    }

    pub fn is_brownian(&self) -> bool {
        matches!(self.kind, ModelKind::Brownian { .. })
    }

    pub fn jumps(&self) -> Option<&JumpMeasure> {
        match &self.kind {
            ModelKind::Brownian { .. } => None,
            ModelKind::BoundedVariation { jumps, .. } => Some(jumps),
        }
    }

    /// The same input with an extra deterministic outflow at rate `m`.
    pub fn shifted(&self, m: f64) -> LevyModel {
        let kind = match &self.kind {
            ModelKind::Brownian { mu, sigma2 } => ModelKind::Brownian { mu: mu - m, sigma2: *sigma2 },
            ModelKind::BoundedVariation { drift, jumps } => {
                ModelKind::BoundedVariation { drift: drift + m, jumps: jumps.clone() }
            }
        };
        LevyModel { kind, reflected: self.reflected }
    }

    /// `φ(θ) = log E e^{-θ I_1}` for `θ >= 0`.
    pub fn laplace_exponent(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::domain(format!("Laplace exponent needs finite theta >= 0, got {theta}")));
        }
        Ok(match &self.kind {
            ModelKind::Brownian { mu, sigma2 } => -mu * theta + 0.5 * sigma2 * theta * theta,
            ModelKind::BoundedVariation { drift, jumps } => drift * theta - jumps.laplace_complement(theta),
        })
    }

    /// `φ'(θ)`.
    pub fn exponent_slope(&self, theta: f64) -> f64 {
        match &self.kind {
            ModelKind::Brownian { mu, sigma2 } => -mu + sigma2 * theta,
            ModelKind::BoundedVariation { drift, jumps } => drift - jumps.laplace_complement_slope(theta),
        }
    }

    /// `E I_1`.
    pub fn mean_rate(&self) -> f64 {
        match &self.kind {
            ModelKind::Brownian { mu, .. } => *mu,
            ModelKind::BoundedVariation { drift, jumps } => jumps.mean() - drift,
        }
    }

    /// `ρ = μ/ς`, the load of a bounded-variation input.
    pub fn load(&self) -> Option<f64> {
        match &self.kind {
            ModelKind::Brownian { .. } => None,
            ModelKind::BoundedVariation { drift, jumps } => Some(jumps.mean() / drift),
        }
    }

    /// Largest root `η(α)` of `φ(θ) = α`.
    pub fn eta_root(&self, alpha: f64) -> Result<f64> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("discount rate must be finite and >= 0, got {alpha}")));
        }
        match &self.kind {
            ModelKind::Brownian { mu, sigma2 } => {
                let disc = (mu * mu + 2.0 * alpha * sigma2).sqrt();
                if *mu >= 0.0 {
                    Ok((mu + disc) / sigma2)
                } else {
                    // μ + disc written as 2ασ²/(disc - μ)
                    Ok(2.0 * alpha / (disc - mu))
                }
            }
            ModelKind::BoundedVariation { .. } => {
                if alpha == 0.0 && self.mean_rate() <= 0.0 {
                    return Ok(0.0);
                }
                let f = |t: f64| self.laplace_exponent(t).map(|v| v - alpha);
                let mut hi = 1.0;
                let mut guard = 0;
                while f(hi)? <= 0.0 {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 1100 {
                        return Err(Error::Numerical("could not bracket the root of phi = alpha".into()));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..400 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid)? > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                let mut theta = 0.5 * (lo + hi);
                for _ in 0..3 {
                    let slope = self.exponent_slope(theta);
                    if slope <= 0.0 {
                        break;
                    }
                    let next = theta - f(theta)? / slope;
                    if !(next >= lo && next <= hi) {
                        break;
                    }
                    theta = next;
                }
                Ok(theta)
            }
        }
    }

    /// Ladder-height density and distribution `(f(x), F(x))` of a
    /// bounded-variation input.
    pub fn ladder_pair(&self, x: f64) -> Result<(f64, f64)> {
        match self.jumps() {
            None => Err(Error::domain("ladder pair is defined for bounded-variation inputs only")),
            Some(j) => {
                if x < 0.0 {
                    return Err(Error::domain(format!("ladder pair needs x >= 0, got {x}")));
                }
                Ok((j.ladder_density(x), j.ladder_cdf(x)))
            }
        }
    }

    /// Lévy tail `ν̄(x)`, zero for the Brownian model.
    pub fn levy_tail(&self, x: f64) -> f64 {
        self.jumps().map_or(0.0, |j| j.tail(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cp_exp(r: f64, b: f64, drift: f64) -> LevyModel {
        LevyModel::bounded_variation(
            drift,
            JumpMeasure::CompoundPoisson { rate: r, dist: JumpDist::Exponential { b } },
            false,
        )
        .unwrap()
    }

    #[test]
    fn brownian_eta() {
        let m = LevyModel::brownian(1.0, 2.0, false).unwrap();
        assert_relative_eq!(m.eta_root(1.0).unwrap(), (1.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-14);
        let m = LevyModel::brownian(-1.0, 2.0, false).unwrap();
        assert_eq!(m.eta_root(0.0).unwrap(), 0.0);
        let m = LevyModel::brownian(0.5, 1.0, false).unwrap();
        assert_relative_eq!(m.eta_root(0.0).unwrap(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn cp_exp_eta_matches_quadratic() {
        // ςθ - rθ/(b+θ) = α  ⇔  ςθ² + (ςb - r - α)θ - αb = 0
        let (r, b, s) = (1.0, 1.0, 2.0);
        let m = cp_exp(r, b, s);
        for alpha in [0.0, 0.1, 1.0, 7.5] {
            let bq = s * b - r - alpha;
            let want = (-bq + (bq * bq + 4.0 * s * alpha * b).sqrt()) / (2.0 * s);
            assert_relative_eq!(m.eta_root(alpha).unwrap(), want, max_relative = 1e-12, epsilon = 1e-14);
        }
        // upward mean: positive root at α = 0
        let m = cp_exp(3.0, 1.0, 2.0);
        assert_relative_eq!(m.eta_root(0.0).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn exponent_rejects_negative_theta() {
        let m = LevyModel::brownian(1.0, 1.0, false).unwrap();
        assert!(m.laplace_exponent(-1.0).is_err());
        assert!(m.eta_root(-0.1).is_err());
    }

    #[test]
    fn validation() {
        assert!(LevyModel::brownian(0.0, 0.0, false).is_err());
        assert!(LevyModel::bounded_variation(0.0, JumpMeasure::Gamma { a: 1.0, b: 1.0 }, false).is_err());
        assert!(LevyModel::bounded_variation(1.0, JumpMeasure::Gamma { a: -1.0, b: 1.0 }, false).is_err());
    }

    // Reference values below come from 30-digit adaptive quadrature of the
    // Lévy densities.

    #[test]
    fn gamma_tail_and_ladder() {
        let (a, b) = (1.5, 2.0);
        let j = JumpMeasure::Gamma { a, b };
        let inner = quad::composite(|x| a * (-b * x).exp() / x, 0.5, 30.0, 200);
        assert_relative_eq!(j.tail(0.5) - j.tail(30.0), inner, max_relative = 1e-12);
        let cdf = [
            (0.01, 0.0868954823594388898),
            (0.3, 0.723816065819614822),
            (1.0, 0.962465738179509547),
            (4.0, 0.999965862354848887),
        ];
        for (x, want) in cdf {
            assert_relative_eq!(j.ladder_cdf(x), want, max_relative = 1e-13);
            assert_relative_eq!(j.ladder_cdf(x) + j.ladder_survival(x), 1.0, max_relative = 1e-13);
        }
        assert_relative_eq!(j.laplace_complement_slope(0.0), j.mean(), max_relative = 1e-14);
    }

    #[test]
    fn inverse_gaussian_tail_and_exponent() {
        let j = JumpMeasure::InverseGaussian { sigma: 0.8, c: 1.3 };
        let tails = [(0.1, 1.53015414912351152), (0.7, 0.11969500068355927), (3.0, 0.00104595166744169363)];
        for (x, want) in tails {
            assert_relative_eq!(j.tail(x), want, max_relative = 1e-12);
        }
        let psi = [(0.2, 0.148423499058976044), (1.0, 0.661513740564700933), (5.0, 2.41295707916496611)];
        for (theta, want) in psi {
            assert_relative_eq!(j.laplace_complement(theta), want, max_relative = 1e-13);
        }
        assert_relative_eq!(j.ladder_cdf(2.0) + j.ladder_survival(2.0), 1.0, max_relative = 1e-13);
        assert_relative_eq!(j.ladder_cdf(40.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_uniform_jump() {
        // Uniform(0, 2) jumps
        let t = TabulatedDensity::new(0.5, vec![0.5; 5], false).unwrap();
        assert_relative_eq!(t.mean(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(t.survival(0.5), 0.75, max_relative = 1e-14);
        let j = JumpMeasure::CompoundPoisson { rate: 2.0, dist: JumpDist::Tabulated(t) };
        // ladder cdf: ∫_0^x (1 - u/2) du = x - x²/4
        for x in [0.1, 0.9, 1.7] {
            assert_relative_eq!(j.ladder_cdf(x), x - x * x / 4.0, max_relative = 1e-12);
        }
        assert_eq!(j.ladder_survival(2.5), 0.0);
        for theta in [0.3_f64, 1.0, 10.0] {
            let want = 2.0 * (1.0 - (1.0 - (-2.0 * theta).exp()) / (2.0 * theta));
            assert_relative_eq!(j.laplace_complement(theta), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn tabulated_quantile_inverts_cdf() {
        let t = TabulatedDensity::new(0.25, vec![0.0, 1.0, 2.0, 1.0, 0.5, 0.0], true).unwrap();
        for x in [0.1, 0.3, 0.6, 1.1] {
            let u = 1.0 - t.survival(x);
            assert!((t.quantile(u) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_mass_check() {
        assert!(TabulatedDensity::new(0.5, vec![1.0; 5], false).is_err());
        let t = TabulatedDensity::new(0.5, vec![1.0; 5], true).unwrap();
        assert_relative_eq!(t.density(1.0), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn discounted_tail_integral_generic() {
        let j = JumpMeasure::Gamma { a: 1.0, b: 1.5 };
        let cases = [(0.5, 0.0, 0.575364144903561855), (2.0, 0.4, 0.0978643331902929735), (0.0, 1.0, 0.0487338576923205674)];
        for (eta, c, want) in cases {
            assert_relative_eq!(j.discounted_tail_integral(eta, c), want, max_relative = 1e-6);
        }
        let cp = JumpMeasure::CompoundPoisson { rate: 2.0, dist: JumpDist::Exponential { b: 3.0 } };
        assert_relative_eq!(cp.discounted_tail_integral(1.0, 0.5), 2.0 * (-1.5f64).exp() / 4.0, max_relative = 1e-15);
    }
}
