//! Transformation operator: successive approximations U_n, the kernels K1
//! and K2, tail bounds and checks of the representation
//! U(x, lambda) = e^{a(x) J} + int_0^x e^{-lambda (x - 2s) J} K(x, s) ds,
//! a(x) = P(x) - lambda x.
//!
//! With Q = P - p I the system reads U' = a' J U + J Q U. Writing
//! U = e^{aJ} V gives V' = Qt(x) e^{-2 lambda x J} V where
//! Qt(t) = e^{-2 P(t) J} J Q(t) anticommutes with J.

use crate::dirac::{self, DiracPotential};
use crate::error::{Error, Result};
use crate::linalg::{CMat2, Mat2};
use crate::quadrature::{self, GaussRule};
use num_complex::Complex64 as C64;
use std::sync::OnceLock;

const S: usize = 8;
const MAX_LEVEL: usize = 10;

fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Q(x) = P(x) - p(x) I = [[-p, -v], [-v, p]].
pub fn q_matrix(dp: &DiracPotential, x: f64) -> Result<CMat2> {
    let p = dp.p().evaluate(x)?;
    let v = dp.v(x)?;
    Ok(Mat2::new(-p, -v, -v, p))
}

pub fn q_tilde(dp: &DiracPotential, t: f64) -> Result<CMat2> {
    Ok(CMat2::exp_j(dp.p_integral(t) * -2.0) * CMat2::j() * q_matrix(dp, t)?)
}

fn l2_of<F: Fn(f64) -> Result<f64>>(dp: &DiracPotential, a: f64, b: f64, extra: &[f64], f: F) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> = dp.singular_set().into_iter().chain(extra.iter().copied()).filter(|&x| x > a && x < b).collect();
    breaks.sort_by(f64::total_cmp);
    let v = quadrature::integrate(|t| c64(f(t).unwrap_or(0.0).powi(2)), a, b, &breaks, 1e-10)?;
    Ok(v.re.max(0.0).sqrt())
}

/// (int_a^b |Qt(t)|^2 dt)^(1/2) with the operator norm pointwise.
pub fn q_tilde_norm_on(dp: &DiracPotential, a: f64, b: f64) -> Result<f64> {
    l2_of(dp, a, b, &[], |t| Ok(q_tilde(dp, t)?.op_norm()))
}

/// e^{|Im lambda|} e^{||p||_1} sum_{n > N} ||Qt||^n / (n - 1)!
pub fn tail(q_norm: f64, p_l1: f64, lambda: C64, n: usize) -> f64 {
    let pre = (lambda.im.abs() + p_l1).exp();
    let mut sum = 0.0;
    // term_k = q^k / (k-1)!
    let mut term = q_norm;
    for k in 1..400 {
        if k > 1 {
            term *= q_norm / (k - 1) as f64;
        }
        if k > n {
            sum += term;
            if term < 1e-18 * sum && k > n + 5 {
                break;
            }
        }
    }
    pre * sum
}

#[derive(Clone, Debug)]
pub struct KernelSeries {
    pub lambda: C64,
    /// U_n(1), n = 0..=N
    pub terms: Vec<CMat2>,
    /// S_n(1) = U_0(1) + ... + U_n(1)
    pub partial_sums: Vec<CMat2>,
    pub q_tilde_norm: f64,
    pub p_l1: f64,
    pub error_estimate: f64,
}

impl KernelSeries {
    pub fn tail(&self, n: usize) -> f64 {
        tail(self.q_tilde_norm, self.p_l1, self.lambda, n)
    }
}

/// Integration matrix of S-point Gauss collocation on [0, 1]:
/// a[i][j] = int_0^{c_i} l_j, b[j] = int_0^1 l_j.
struct Panel {
    c: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn panel() -> &'static Panel {
    static P: OnceLock<Panel> = OnceLock::new();
    P.get_or_init(|| {
        let g = GaussRule::new(S);
        let c = g.nodes.clone();
        let lag = |j: usize, t: f64| -> f64 {
            (0..S).filter(|&m| m != j).map(|m| (t - c[m]) / (c[j] - c[m])).product()
        };
        let a = (0..S)
            .map(|i| (0..S).map(|j| g.integrate(0.0, c[i], |t| c64(lag(j, t))).re).collect())
            .collect();
        Panel { b: g.weights.clone(), a, c }
    })
}

fn neumann_level(dp: &DiracPotential, lambda: C64, n_max: usize, level: usize) -> Result<Vec<CMat2>> {
    // Cell-local frame: on [x_k, x_k+1] write U_n = e^{(a(s) - a(x_k)) J} W_n,
    // so W_n' = e^{-2 (a(s) - a(x_k)) J} J Q(s) W_{n-1} and no factor grows
    // beyond e^{2 |Im lambda| h}.
    let pr = panel();
    let cells = dp.cells(level);
    let a = |x: f64| dp.p_integral(x) - lambda * x;
    let mut kern = Vec::with_capacity(cells.len() * S);
    let mut hop = Vec::with_capacity(cells.len());
    for c in cells.iter() {
        let a0 = a(c.x0);
        for &t in &pr.c {
            let s = c.x0 + c.h * t;
            kern.push(CMat2::exp_j((a(s) - a0) * -2.0) * CMat2::j() * q_matrix(dp, s)?);
        }
        hop.push(CMat2::exp_j(a(c.x0 + c.h) - a0));
    }
    // W_0 is constant on each cell and equals U_0(x_k)
    let mut prev: Vec<CMat2> =
        cells.iter().flat_map(|c| std::iter::repeat(CMat2::exp_j(a(c.x0))).take(S)).collect();
    let mut ends = vec![CMat2::exp_j(a(1.0))];
    for _ in 1..=n_max {
        let mut cur = Vec::with_capacity(kern.len());
        let mut u = CMat2::zeros();
        for (ci, c) in cells.iter().enumerate() {
            let f: Vec<CMat2> = (0..S).map(|j| kern[ci * S + j] * prev[ci * S + j]).collect();
            let h = c64(c.h);
            for i in 0..S {
                let mut acc = u;
                for j in 0..S {
                    acc += f[j] * (h * pr.a[i][j]);
                }
                cur.push(acc);
            }
            let mut w = u;
            for j in 0..S {
                w += f[j] * (h * pr.b[j]);
            }
            u = hop[ci] * w;
        }
        ends.push(u);
        prev = cur;
    }
    Ok(ends)
}

/// U_0(1), ..., U_N(1) by successive approximation on collocation panels,
/// refined until two levels agree to `tol` (relative to max(1, |S_N|)).
pub fn neumann_terms(dp: &DiracPotential, lambda: C64, n: usize, tol: f64) -> Result<KernelSeries> {
    if n < 1 {
        return Err(Error::Domain("at least one Neumann term is required".into()));
    }
    let widest = dp.cells(0).iter().map(|c| c.h).fold(0.0, f64::max);
    let mut level = 0;
    while level < MAX_LEVEL && widest * 0.5f64.powi(level as i32) * (2.0 * lambda.norm() + 1.0) > 1.0 {
        level += 1;
    }
    let mut prev = neumann_level(dp, lambda, n, level)?;
    let mut est = f64::INFINITY;
    for lv in level + 1..=MAX_LEVEL {
        let cur = neumann_level(dp, lambda, n, lv)?;
        let scale = cur.iter().map(|m| m.max_abs()).fold(1.0, f64::max);
        est = prev.iter().zip(&cur).map(|(a, b)| (*a - *b).max_abs()).fold(0.0, f64::max) / scale;
        prev = cur;
        if est <= tol {
            break;
        }
    }
    if est > tol {
        return Err(Error::ToleranceNotReached { achieved: est, requested: tol });
    }
    let mut partial_sums = Vec::with_capacity(prev.len());
    let mut acc = CMat2::zeros();
    for t in &prev {
        acc += *t;
        partial_sums.push(acc);
    }
    Ok(KernelSeries {
        lambda,
        terms: prev,
        partial_sums,
        q_tilde_norm: q_tilde_norm_on(dp, 0.0, 1.0)?,
        p_l1: dp.p().l1_norm()?,
        error_estimate: est,
    })
}

fn shifted_breaks(dp: &DiracPotential, s: f64, len: f64) -> Vec<f64> {
    let mut b = Vec::new();
    for x in dp.singular_set() {
        for t in [x, x - s] {
            if t > 0.0 && t < len {
                b.push(t);
            }
        }
    }
    b
}

/// int_0^{x-s} Qt(s + t) Qt(t) dt
fn k2_integral(dp: &DiracPotential, x: f64, s: f64, tol: f64) -> Result<CMat2> {
    let len = x - s;
    quadrature::integrate(
        |t| match (q_tilde(dp, s + t), q_tilde(dp, t)) {
            (Ok(a), Ok(b)) => a * b,
            _ => CMat2::zeros(),
        },
        0.0,
        len,
        &shifted_breaks(dp, s, len),
        tol,
    )
}

/// (K1(x, s), K2(x, s)) for 0 <= s < x <= 1.
pub fn kernel_k1k2(dp: &DiracPotential, x: f64, s: f64, tol: f64) -> Result<(CMat2, CMat2)> {
    if !(0.0 <= s && s < x && x <= 1.0) {
        return Err(Error::Domain(format!("kernel needs 0 <= s < x <= 1, got x = {x}, s = {s}")));
    }
    let e = CMat2::exp_j(dp.p_integral(x));
    Ok((e * q_tilde(dp, s)?, e * k2_integral(dp, x, s, tol)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// partial sums of U_n
    Neumann,
    /// e^{aJ} + int e^{-lambda(x-2s)J} (K1 + ... + KN) ds, N <= 2
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Defect {
    pub n: usize,
    pub defect: f64,
    pub tail: f64,
}

/// int_0^x e^{-lambda(x-2s)J} K(x,s) ds for K = K1 (n = 1) or K1 + K2.
fn kernel_integral(dp: &DiracPotential, lambda: C64, x: f64, n: usize, tol: f64) -> Result<CMat2> {
    let breaks: Vec<f64> = dp.singular_set().into_iter().filter(|&t| t > 0.0 && t < x).collect();
    let e = CMat2::exp_j(dp.p_integral(x));
    let failure: OnceLock<Error> = OnceLock::new();
    let out = quadrature::integrate(
        |s| {
            let mut k = match q_tilde(dp, s) {
                Ok(q) => q,
                Err(err) => {
                    let _ = failure.set(err);
                    return CMat2::zeros();
                }
            };
            if n >= 2 && s < x {
                match k2_integral(dp, x, s, 0.1 * tol) {
                    Ok(m) => k += m,
                    Err(err) => {
                        let _ = failure.set(err);
                    }
                }
            }
            CMat2::exp_j(lambda * -(x - 2.0 * s)) * e * k
        },
        0.0,
        x,
        &breaks,
        tol,
    )?;
    match failure.into_inner() {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

/// ||U_ODE(1, lambda) - truncated representation|| (operator norm).
pub fn verify_representation(dp: &DiracPotential, lambda: C64, n: usize, tol: f64, route: Route) -> Result<Defect> {
    let ode = dirac::solve_u(dp, lambda, tol, false, false)?.end;
    let q = q_tilde_norm_on(dp, 0.0, 1.0)?;
    let t = tail(q, dp.p().l1_norm()?, lambda, n);
    let approx = match route {
        Route::Neumann => neumann_terms(dp, lambda, n, tol)?.partial_sums[n],
        Route::Kernel => {
            if !(1..=2).contains(&n) {
                return Err(Error::Domain("kernel route supports N = 1 or 2".into()));
            }
            CMat2::exp_j(dp.p_integral(1.0) - lambda) + kernel_integral(dp, lambda, 1.0, n, tol)?
        }
    };
    Ok(Defect { n, defect: (ode - approx).op_norm(), tail: t })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Continuity {
    /// ||K(x2, .) - K(x1, .)|| in L2(0, 1) with K = K1 + K2 (zero for s >= x)
    pub measured: f64,
    /// e^{||p||_1} (1 + ||Qt||)^3 (int_{x1}^{x2} |Qt|^2)^(1/2)
    pub bound: f64,
}

pub fn continuity_modulus(dp: &DiracPotential, x1: f64, x2: f64, tol: f64) -> Result<Continuity> {
    if !(0.0 <= x1 && x1 <= x2 && x2 <= 1.0) {
        return Err(Error::Domain("continuity modulus needs 0 <= x1 <= x2 <= 1".into()));
    }
    let q = q_tilde_norm_on(dp, 0.0, 1.0)?;
    let local = q_tilde_norm_on(dp, x1, x2)?;
    let bound = dp.p().l1_norm()?.exp() * (1.0 + q).powi(3) * local;
    if x1 == x2 {
        return Ok(Continuity { measured: 0.0, bound });
    }
    let k = |x: f64, s: f64| -> Result<CMat2> {
        if s >= x {
            return Ok(CMat2::zeros());
        }
        let (a, b) = kernel_k1k2(dp, x, s, 0.1 * tol)?;
        Ok(a + b)
    };
    let measured = l2_of(dp, 0.0, x2, &[x1], |s| Ok((k(x2, s)? - k(x1, s)?).op_norm()))?;
    Ok(Continuity { measured, bound })
}

/// (R + K) applied to u0(s) = e^{-lambda s J} (1, 0)^t at x, with K
/// truncated to K1 + K2; compare with U(x, lambda) (1, 0)^t.
pub fn apply_transform(dp: &DiracPotential, lambda: C64, x: f64, tol: f64) -> Result<[C64; 2]> {
    let r = CMat2::exp_j(dp.p_integral(x)) * CMat2::exp_j(-lambda * x);
    let m = if x > 0.0 { r + kernel_integral(dp, lambda, x, 2, tol)? } else { r };
    Ok([m.0[0][0], m.0[1][0]])
}
