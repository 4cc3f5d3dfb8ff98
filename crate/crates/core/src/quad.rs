//! Fixed-order Gauss–Legendre quadrature.

use std::sync::OnceLock;

const ORDER: usize = 16;

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_nodes(ORDER))
}

/// 16-point Gauss–Legendre on a single interval.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(mid + half * xi);
    }
    s * half
}

/// Composite Gauss–Legendre with `panels` equal panels.
pub fn composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * width;
            gauss_legendre(&mut f, lo, lo + width)
        })
        .sum()
}

/// Integral over `[a, ∞)` using panels that double in width from `scale`.
///
/// Stops once a panel contributes less than `1e-16` of the running total
/// (after at least a handful of panels), or the integrand has decayed to
/// zero.
pub fn to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, scale: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = scale;
    let mut small_run = 0;
    for k in 0..200 {
        let part = composite(&mut f, lo, lo + width, 4);
        total += part;
        if part.abs() <= 1e-16 * total.abs() || part == 0.0 {
            small_run += 1;
            if small_run >= 2 && k >= 4 {
                break;
            }
        } else {
            small_run = 0;
        }
        lo += width;
        width *= 2.0;
    }
    total
}
