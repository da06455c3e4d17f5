//! Non-vanishing solution of l(y) = 0 through the complex Prufer angle, and
//! the Miura potential v with q = v' + v^2.
//!
//! The angle obeys theta' = (cos theta + r sin theta)^2 and w = v - r equals
//! cot theta. The integrator also carries W(x) = int_0^x w so that cell
//! averages of v are available without further quadrature.

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::quadrature::{self, GaussRule};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_PI_2;

const S: usize = 6;
const H_MAX: f64 = 1.0 / 16.0;
const H_MIN: f64 = 1e-15;

/// s-stage Gauss collocation tableau with dense-output polynomials.
struct Collocation {
    c: [f64; S],
    a: [[f64; S]; S],
    b: [f64; S],
    /// beta_j(t) = sum_m dense[j][m] t^(m+1)
    dense: [[f64; S]; S],
}

impl Collocation {
    fn new() -> Self {
        let g = GaussRule::new(S);
        let mut c = [0.0; S];
        c.copy_from_slice(&g.nodes);
        let mut dense = [[0.0; S]; S];
        for j in 0..S {
            // Lagrange basis polynomial l_j in monomial form.
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for m in 0..S {
                if m == j {
                    continue;
                }
                let mut next = vec![0.0; poly.len() + 1];
                for (k, coef) in poly.iter().enumerate() {
                    next[k + 1] += coef;
                    next[k] -= coef * c[m];
                }
                poly = next;
                denom *= c[j] - c[m];
            }
            for m in 0..S {
                dense[j][m] = poly[m] / denom / (m + 1) as f64;
            }
        }
        let beta = |j: usize, t: f64| -> f64 {
            let mut s = 0.0;
            for m in (0..S).rev() {
                s = s * t + dense[j][m];
            }
            s * t
        };
        let mut a = [[0.0; S]; S];
        let mut b = [0.0; S];
        for j in 0..S {
            for i in 0..S {
                a[i][j] = beta(j, c[i]);
            }
            b[j] = beta(j, 1.0);
        }
        Collocation { c, a, b, dense }
    }

    fn weights_at(&self, t: f64) -> [f64; S] {
        let mut out = [0.0; S];
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for m in (0..S).rev() {
                s = s * t + self.dense[j][m];
            }
            *o = s * t;
        }
        out
    }
}

fn rule() -> &'static Collocation {
    static R: std::sync::OnceLock<Collocation> = std::sync::OnceLock::new();
    R.get_or_init(Collocation::new)
}

#[derive(Clone, Debug)]
struct Step {
    x0: f64,
    h: f64,
    theta0: C64,
    w_int0: C64,
    k: [C64; S],
    wk: [C64; S],
}

impl Step {
    fn eval(&self, x: f64) -> (C64, C64) {
        let t = ((x - self.x0) / self.h).clamp(0.0, 1.0);
        let wts = rule().weights_at(t);
        let mut th = self.theta0;
        let mut wi = self.w_int0;
        for j in 0..S {
            th += self.k[j] * (self.h * wts[j]);
            wi += self.wk[j] * (self.h * wts[j]);
        }
        (th, wi)
    }

    fn end(&self) -> (C64, C64) {
        let r = rule();
        let mut th = self.theta0;
        let mut wi = self.w_int0;
        for j in 0..S {
            th += self.k[j] * (self.h * r.b[j]);
            wi += self.wk[j] * (self.h * r.b[j]);
        }
        (th, wi)
    }
}

#[derive(Clone, Debug)]
pub struct PrueferSolution {
    pub theta0: C64,
    /// min |sin theta| over collocation points and step ends.
    pub margin: f64,
    steps: Vec<Step>,
    theta1: C64,
    w_int1: C64,
}

impl PrueferSolution {
    fn locate(&self, x: f64) -> Option<&Step> {
        if self.steps.is_empty() {
            return None;
        }
        let i = self.steps.partition_point(|s| s.x0 <= x);
        Some(&self.steps[i.max(1) - 1])
    }

    pub fn theta(&self, x: f64) -> C64 {
        if x >= 1.0 {
            return self.theta1;
        }
        match self.locate(x) {
            Some(s) => s.eval(x).0,
            None => self.theta0,
        }
    }

    /// int_0^x cot theta
    pub fn cot_integral(&self, x: f64) -> C64 {
        if x >= 1.0 {
            return self.w_int1;
        }
        match self.locate(x) {
            Some(s) => s.eval(x).1,
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Step end points (the dense-output grid).
    pub fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.steps.iter().map(|s| s.x0).collect();
        g.push(1.0);
        g
    }
}

fn pole_floor() -> f64 {
    10.0 * f64::EPSILON.sqrt()
}

/// One collocation step; None if the stage iteration fails to converge.
fn collocation_step(
    r: &Potential,
    x0: f64,
    h: f64,
    theta0: C64,
    w_int0: C64,
    margin: &mut f64,
) -> Result<Option<Step>> {
    let rl = rule();
    let mut rv = [C64::new(0.0, 0.0); S];
    for i in 0..S {
        rv[i] = r.evaluate(x0 + rl.c[i] * h)?;
    }
    let rhs = |th: C64, r: C64| {
        let u = th.cos() + r * th.sin();
        u * u
    };
    let f0 = rhs(theta0, rv[0]);
    let mut k = [f0; S];
    let mut converged = false;
    for _ in 0..80 {
        let mut next = [C64::new(0.0, 0.0); S];
        let mut delta: f64 = 0.0;
        for i in 0..S {
            let mut th = theta0;
            for j in 0..S {
                th += k[j] * (h * rl.a[i][j]);
            }
            next[i] = rhs(th, rv[i]);
            if !next[i].is_finite() {
                return Ok(None);
            }
            delta = delta.max((next[i] - k[i]).norm() * h);
        }
        k = next;
        if delta <= 1e-16 * (1.0 + theta0.norm()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(None);
    }
    let mut wk = [C64::new(0.0, 0.0); S];
    for i in 0..S {
        let mut th = theta0;
        for j in 0..S {
            th += k[j] * (h * rl.a[i][j]);
        }
        let s = th.sin();
        if s.norm() < pole_floor() {
            return Err(Error::PoleProximity { x: x0 + rl.c[i] * h, value: s.norm() });
        }
        *margin = margin.min(s.norm());
        wk[i] = th.cos() / s;
    }
    Ok(Some(Step { x0, h, theta0, w_int0, k, wk }))
}

/// Integrate theta' = (cos theta + r sin theta)^2, theta(0) = theta0.
pub fn solve_pruefer(r: &Potential, theta0: C64, tol: f64) -> Result<PrueferSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut knots = vec![0.0];
    knots.extend(r.singular_set().into_iter().filter(|&x| x > 0.0 && x < 1.0));
    knots.push(1.0);
    let mut margin = theta0.sin().norm();
    if margin < pole_floor() {
        return Err(Error::PoleProximity { x: 0.0, value: margin });
    }
    let mut steps = Vec::new();
    let mut theta = theta0;
    let mut w_int = C64::new(0.0, 0.0);
    let mut h = H_MAX / 4.0;
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mut x = a;
        while x < b {
            let mut hh = h.min(b - x);
            let last = hh >= b - x;
            if last {
                hh = b - x;
            }
            let mut trial_margin = margin;
            let full = collocation_step(r, x, hh, theta, w_int, &mut trial_margin)?;
            let half1 = collocation_step(r, x, hh / 2.0, theta, w_int, &mut trial_margin)?;
            let half2 = match &half1 {
                Some(s1) => {
                    let (t1, w1) = s1.end();
                    collocation_step(r, x + hh / 2.0, hh / 2.0, t1, w1, &mut trial_margin)?
                }
                None => None,
            };
            let err = match (&full, &half1, &half2) {
                (Some(f), Some(s1), Some(s2)) => {
                    let (tf, wf) = f.end();
                    let (t2, w2) = s2.end();
                    let (tm, wm) = f.eval(x + hh / 2.0);
                    let (t1, w1) = s1.end();
                    [(tf - t2).norm(), (wf - w2).norm(), (tm - t1).norm(), (wm - w1).norm()]
                        .into_iter()
                        .fold(0.0, f64::max)
                }
                _ => f64::INFINITY,
            };
            let scale = 1.0 + theta.norm() + w_int.norm();
            if err <= tol.max(64.0 * f64::EPSILON * scale) {
                let s1 = half1.unwrap();
                let s2 = half2.unwrap();
                let (t2, w2) = s2.end();
                steps.push(s1);
                steps.push(s2);
                theta = t2;
                w_int = w2;
                x = if last { b } else { x + hh };
                margin = trial_margin;
                let fac = if err == 0.0 { 4.0 } else { (0.8 * (tol / err).powf(1.0 / 7.0)).clamp(0.2, 4.0) };
                if !last || fac < 1.0 {
                    h = (hh * fac).min(H_MAX);
                }
            } else {
                h = hh * if err.is_finite() { (0.8 * (tol / err).powf(1.0 / 7.0)).clamp(0.1, 0.5) } else { 0.25 };
                if h < H_MIN {
                    return Err(Error::ToleranceNotReached { achieved: err, requested: tol });
                }
            }
        }
    }
    margin = margin.min(theta.sin().norm());
    Ok(PrueferSolution { theta0, margin, steps, theta1: theta, w_int1: w_int })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedPolicy {
    /// Minimal accepted margin.
    pub accept: f64,
    /// Smallest margin accepted as a fallback.
    pub floor: f64,
    pub tau_max: f64,
    pub tol: f64,
}

impl Default for SeedPolicy {
    fn default() -> Self {
        SeedPolicy { accept: 0.1, floor: 1e-3, tau_max: 64.0, tol: 1e-13 }
    }
}

/// First admissible seed on the ray pi/2 + i tau, tau = 0, 1, 2, 4, ...
/// When no seed reaches `policy.accept`, the seed with the largest margin is
/// returned provided that margin is at least `policy.floor`.
pub fn choose_theta0(r: &Potential, policy: &SeedPolicy) -> Result<PrueferSolution> {
    let mut tau = 0.0;
    let mut best: Option<PrueferSolution> = None;
    loop {
        let theta0 = C64::new(FRAC_PI_2, tau);
        match solve_pruefer(r, theta0, policy.tol) {
            Ok(ps) if ps.margin >= policy.accept => return Ok(ps),
            Ok(ps) => {
                if best.as_ref().map_or(true, |b| ps.margin > b.margin) {
                    best = Some(ps);
                }
            }
            Err(Error::PoleProximity { .. }) | Err(Error::ToleranceNotReached { .. }) => {}
            Err(e) => return Err(e),
        }
        tau = if tau == 0.0 { 1.0 } else { 2.0 * tau };
        if tau > policy.tau_max {
            return match best {
                Some(ps) if ps.margin >= policy.floor => Ok(ps),
                _ => Err(Error::NoAdmissibleSeed(policy.tau_max)),
            };
        }
    }
}

#[derive(Clone, Debug)]
enum WSource {
    Pruefer(PrueferSolution),
    Explicit(Potential),
}

/// v = r + w with w continuous.
#[derive(Clone, Debug)]
pub struct MiuraPotential {
    r: Potential,
    w: WSource,
}

impl MiuraPotential {
    pub fn from_pruefer(ps: PrueferSolution, r: &Potential) -> Self {
        MiuraPotential { r: r.clone(), w: WSource::Pruefer(ps) }
    }

    /// v given directly as r + w (w must be continuous).
    pub fn explicit(r: &Potential, w: Potential) -> Self {
        MiuraPotential { r: r.clone(), w: WSource::Explicit(w) }
    }

    pub fn r(&self) -> &Potential {
        &self.r
    }

    pub fn pruefer(&self) -> Option<&PrueferSolution> {
        match &self.w {
            WSource::Pruefer(ps) => Some(ps),
            WSource::Explicit(_) => None,
        }
    }

    pub fn w(&self, x: f64) -> C64 {
        match &self.w {
            WSource::Pruefer(ps) => {
                let t = ps.theta(x);
                t.cos() / t.sin()
            }
            WSource::Explicit(p) => p.evaluate(x).unwrap_or(C64::new(f64::NAN, 0.0)),
        }
    }

    pub fn w_integral(&self, x: f64) -> C64 {
        match &self.w {
            WSource::Pruefer(ps) => ps.cot_integral(x),
            WSource::Explicit(p) => p.integral(x),
        }
    }

    pub fn v(&self, x: f64) -> Result<C64> {
        Ok(self.r.evaluate(x)? + self.w(x))
    }

    pub fn v_integral(&self, x: f64) -> C64 {
        self.r.integral(x) + self.w_integral(x)
    }

    /// c = w(0)
    pub fn c(&self) -> C64 {
        self.w(0.0)
    }

    /// h1 = w(1)
    pub fn h1(&self) -> C64 {
        self.w(1.0)
    }

    /// Break points of w itself (none: w is continuous) plus those of r.
    pub fn singular_set(&self) -> Vec<f64> {
        let mut s = self.r.singular_set();
        if let WSource::Explicit(p) = &self.w {
            s.extend(p.singular_set());
        }
        crate::potentials::sorted_unique(s)
    }
}

pub fn miura_v(ps: PrueferSolution, r: &Potential) -> Result<MiuraPotential> {
    if !(ps.margin > 0.0) {
        return Err(Error::PoleProximity { x: 0.0, value: ps.margin });
    }
    Ok(MiuraPotential::from_pruefer(ps, r))
}

/// Sup over a test grid of the integrated residual of
/// y0' = y0^[1] + r y0, (y0^[1])' = -r y0^[1] - r^2 y0 with y0 = exp(int v).
pub fn verify_y0(mp: &MiuraPotential, r: &Potential) -> Result<f64> {
    let y0 = |x: f64| (r.integral(x) + mp.w_integral(x)).exp();
    let integrand = |x: f64| -> [C64; 2] {
        let rv = r.evaluate(x).unwrap_or(C64::new(0.0, 0.0));
        let y = y0(x);
        let y1 = mp.w(x) * y;
        [y1 + rv * y, -rv * y1 - rv * rv * y]
    };
    let mut grid: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
    grid.extend(mp.singular_set());
    let grid = crate::potentials::sorted_unique(grid);
    let breaks = mp.singular_set();
    let mut acc = [C64::new(0.0, 0.0); 2];
    let mut worst: f64 = 0.0;
    let start = [y0(0.0), mp.w(0.0) * y0(0.0)];
    for seg in grid.windows(2) {
        let i0: C64 = quadrature::integrate(|x| integrand(x)[0], seg[0], seg[1], &breaks, 1e-14)?;
        let i1: C64 = quadrature::integrate(|x| integrand(x)[1], seg[0], seg[1], &breaks, 1e-14)?;
        acc[0] += i0;
        acc[1] += i1;
        let x = seg[1];
        let y = y0(x);
        let res0 = (y - start[0] - acc[0]).norm();
        let res1 = (mp.w(x) * y - start[1] - acc[1]).norm();
        worst = worst.max(res0).max(res1);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialTerm;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_r_at_half_pi_is_constant() {
        let ps = solve_pruefer(&Potential::zero(), c(FRAC_PI_2, 0.0), 1e-13).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            assert!((ps.theta(x) - c(FRAC_PI_2, 0.0)).norm() < 1e-14);
        }
        assert!((ps.margin - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tan_theta_grows_linearly() {
        for &t0 in &[c(std::f64::consts::FRAC_PI_4, 0.0), c(FRAC_PI_2, 1.0), c(0.3, -0.8)] {
            let ps = solve_pruefer(&Potential::zero(), t0, 1e-13).unwrap();
            for &x in &[0.17, 0.5, 0.93, 1.0] {
                let expect = t0.tan() + x;
                assert!((ps.theta(x).tan() - expect).norm() < 1e-11, "{t0} {x}");
                // int_0^x cot theta = ln(tan theta0 + x) - ln(tan theta0)
                let wi = (t0.tan() + x).ln() - t0.tan().ln();
                assert!((ps.cot_integral(x) - wi).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn constant_r_closed_form() {
        let cc = 0.7;
        let r = Potential::new(vec![PotentialTerm::constant(c(cc, 0.0))]);
        let t0 = c(FRAC_PI_2, 1.0);
        let mp = miura_v(solve_pruefer(&r, t0, 1e-13).unwrap(), &r).unwrap();
        let big_c = (c(cc, 0.0) + t0.cos() / t0.sin()).inv();
        for &x in &[0.0, 0.25, 0.6, 1.0] {
            let v = (x + big_c).inv();
            assert!((mp.v(x).unwrap() - v).norm() < 1e-11);
        }
    }

    #[test]
    fn choose_theta0_examples() {
        let ps = choose_theta0(&Potential::zero(), &SeedPolicy::default()).unwrap();
        assert_eq!(ps.theta0, c(FRAC_PI_2, 0.0));
        let r = Potential::constant(c(1.0, 0.0));
        let ps = choose_theta0(&r, &SeedPolicy::default()).unwrap();
        assert!(ps.theta0.im <= 4.0 && ps.margin >= 0.1);
    }

    #[test]
    fn step_r_gives_continuous_w_and_small_residual() {
        let r = Potential::new(vec![PotentialTerm::step(0.5, c(2.0, 0.0)).unwrap()]);
        let ps = choose_theta0(&r, &SeedPolicy::default()).unwrap();
        let mp = miura_v(ps, &r).unwrap();
        let jump = (mp.w(0.5 + 1e-9) - mp.w(0.5 - 1e-9)).norm();
        assert!(jump < 1e-7, "{jump}");
        let res = verify_y0(&mp, &r).unwrap();
        assert!(res < 1e-11, "{res}");
    }

    #[test]
    fn real_r_with_vanishing_solution_escalates() {
        // y'' = -9 y type: q = -9 has y0 = cos 3x vanishing at pi/6.
        let r = Potential::new(vec![PotentialTerm::poly(vec![c(0.0, 0.0), c(-9.0, 0.0)])]);
        let ps = choose_theta0(&r, &SeedPolicy::default()).unwrap();
        assert!(ps.theta0.im > 0.0);
        let mp = miura_v(ps, &r).unwrap();
        assert!(verify_y0(&mp, &r).unwrap() < 1e-10);
    }

    #[test]
    fn log_term_is_integrable() {
        let r = Potential::new(vec![PotentialTerm::log(0.4, c(0.5, 0.0)).unwrap()]);
        let ps = choose_theta0(&r, &SeedPolicy::default()).unwrap();
        let mp = miura_v(ps, &r).unwrap();
        assert!(verify_y0(&mp, &r).unwrap() < 1e-9);
        assert!((mp.w(0.4 + 1e-10) - mp.w(0.4 - 1e-10)).norm() < 1e-6);
    }

    #[test]
    fn explicit_w_verification() {
        // r = 0, v = 1/(1+x): y0 = 1 + x
        let w = Potential::new(vec![PotentialTerm::poly(vec![c(1.0, 0.0)])]);
        let _ = w;
        let r = Potential::zero();
        let ps = solve_pruefer(&r, c(std::f64::consts::FRAC_PI_4, 0.0), 1e-13).unwrap();
        let mp = miura_v(ps, &r).unwrap();
        for &x in &[0.2, 0.9] {
            assert!((mp.v(x).unwrap() - c(1.0 / (1.0 + x), 0.0)).norm() < 1e-12);
        }
        assert!(verify_y0(&mp, &r).unwrap() < 1e-12);
        let mz = MiuraPotential::explicit(&r, Potential::zero());
        assert_eq!(verify_y0(&mz, &r).unwrap(), 0.0);
    }
}
