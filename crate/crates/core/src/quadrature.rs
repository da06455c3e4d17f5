//! Gauss-Legendre rules and adaptive Gauss-Kronrod (7/15) integration.

use crate::error::{Error, Result};
use crate::linalg::CMat2;
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [0, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton on P_n starting from the Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(0.5 * (1.0 - x));
            weights.push(1.0 / ((1.0 - x * x) * dp * dp));
        }
        GaussRule { nodes, weights }
    }

    /// Shared instance for n points.
    pub fn cached(n: usize) -> &'static GaussRule {
        static RULES: OnceLock<Vec<GaussRule>> = OnceLock::new();
        let rules = RULES.get_or_init(|| (0..=16).map(|k| GaussRule::new(k.max(1))).collect());
        &rules[n]
    }

    pub fn integrate<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let h = b - a;
        let mut s = C64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += f(a + h * x) * *w;
        }
        s * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values that adaptive quadrature can accumulate.
pub trait QValue: Copy + Send {
    fn zero() -> Self;
    fn add(self, o: Self) -> Self;
    fn scale(self, s: f64) -> Self;
    fn size(&self) -> f64;
}

impl QValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn size(&self) -> f64 {
        self.abs()
    }
}

impl QValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn size(&self) -> f64 {
        self.norm()
    }
}

impl QValue for CMat2 {
    fn zero() -> Self {
        CMat2::zeros()
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn scale(self, s: f64) -> Self {
        self * C64::new(s, 0.0)
    }
    fn size(&self) -> f64 {
        self.max_abs()
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod<T: QValue, F: FnMut(f64) -> T>(a: f64, b: f64, f: &mut F) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc.scale(WG[3]);
    let mut kr = fc.scale(WGK[7]);
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x).add(f(c + x));
        kr = kr.add(s.scale(WGK[j]));
        if j % 2 == 1 {
            gauss = gauss.add(s.scale(WG[j / 2]));
        }
    }
    let kr = kr.scale(h);
    let gauss = gauss.scale(h);
    let err = kr.add(gauss.scale(-1.0)).size();
    (kr, err)
}

/// Adaptive G7/K15 integration of f over [a, b] split at `breaks`. The
/// integrand is never evaluated at a break point or at the end points.
pub fn integrate<T: QValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<T> {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut panels: Vec<(f64, f64, T, f64)> = Vec::new();
    for w in pts.windows(2) {
        let (v, e) = kronrod(w[0], w[1], &mut f);
        panels.push((w[0], w[1], v, e));
    }
    for _ in 0..4000 {
        let total: f64 = panels.iter().map(|p| p.3).sum();
        if total <= abs_tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!("panel [{lo}, {hi}] cannot be split further")));
        }
        let (v1, e1) = kronrod(lo, mid, &mut f);
        let (v2, e2) = kronrod(mid, hi, &mut f);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let total: f64 = panels.iter().map(|p| p.3).sum();
    if !(total <= abs_tol * 10.0) {
        return Err(Error::Quadrature(format!(
            "adaptive quadrature stalled with error estimate {total:.3e} (requested {abs_tol:.3e})"
        )));
    }
    panels.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(panels.iter().fold(T::zero(), |s, p| s.add(p.2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        for n in 1..=10 {
            let g = GaussRule::new(n);
            for k in 0..2 * n {
                let v = g.integrate(0.0, 1.0, |x| C64::new(x.powi(k as i32), 0.0));
                assert!((v.re - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // int_0^1 ln x dx = -1
        let v: f64 = integrate(|x: f64| x.ln(), 0.0, 1.0, &[], 1e-12).unwrap();
        assert!((v + 1.0).abs() < 1e-11);
        // int_0^1 ln|x - 0.3| dx with a break at the center
        let exact = 0.7 * 0.7f64.ln() - 0.7 + 0.3 * 0.3f64.ln() - 0.3;
        let v: f64 = integrate(|x: f64| (x - 0.3).abs().ln(), 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn adaptive_oscillatory() {
        let v: C64 = integrate(|x: f64| C64::new(0.0, 40.0 * x).exp(), 0.0, 1.0, &[], 1e-12).unwrap();
        let exact = (C64::new(0.0, 40.0).exp() - 1.0) / C64::new(0.0, 40.0);
        assert!((v - exact).norm() < 1e-12);
    }
}
