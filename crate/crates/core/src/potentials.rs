//! Potentials p and r (with q = r' in the distributional sense), their
//! antiderivatives, and the spectral-parameter shift.

use crate::error::{Error, Result};
use crate::quadrature;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

fn c0() -> C64 {
    C64::new(0.0, 0.0)
}

/// Piecewise linear interpolant on a grid covering [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GridTerm {
    nodes: Vec<f64>,
    values: Vec<C64>,
    cum1: Vec<C64>,
    cum2: Vec<C64>,
}

impl GridTerm {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&t| t <= x);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    fn slope(&self, i: usize) -> C64 {
        (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i])
    }

    fn value(&self, x: f64) -> C64 {
        let i = self.segment(x);
        self.values[i] + self.slope(i) * (x - self.nodes[i])
    }

    fn integral(&self, x: f64) -> C64 {
        let i = self.segment(x);
        let d = x - self.nodes[i];
        self.cum1[i] + self.values[i] * d + self.slope(i) * (0.5 * d * d)
    }

    fn integral2(&self, x: f64) -> C64 {
        let i = self.segment(x);
        let d = x - self.nodes[i];
        self.cum2[i] + self.cum1[i] * d + self.values[i] * (0.5 * d * d) + self.slope(i) * (d * d * d / 6.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialTerm {
    Grid(GridTerm),
    /// sum_k c[k] x^k
    Poly(Vec<C64>),
    /// 0 for x < x0, jump for x >= x0.
    Step { x0: f64, jump: C64 },
    /// strength * ln|x - x0|
    Log { x0: f64, strength: C64 },
    /// sum_k cos[k-1] cos(2 pi k x) + sin[k-1] sin(2 pi k x)
    Trig { cos: Vec<C64>, sin: Vec<C64> },
    /// x -> int_0^x of the inner term.
    Integral(Box<PotentialTerm>),
}

impl PotentialTerm {
    pub fn grid(nodes: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidPotential(
                "grid needs at least two nodes and one value per node".into(),
            ));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::InvalidPotential("grid nodes must start at 0 and end at 1".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPotential("grid nodes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential("grid values must be finite".into()));
        }
        let n = nodes.len();
        let mut cum1 = vec![c0(); n];
        let mut cum2 = vec![c0(); n];
        for i in 0..n - 1 {
            let d = nodes[i + 1] - nodes[i];
            let s = (values[i + 1] - values[i]) / d;
            cum1[i + 1] = cum1[i] + (values[i] + values[i + 1]) * (0.5 * d);
            cum2[i + 1] = cum2[i] + cum1[i] * d + values[i] * (0.5 * d * d) + s * (d * d * d / 6.0);
        }
        Ok(PotentialTerm::Grid(GridTerm { nodes, values, cum1, cum2 }))
    }

    pub fn poly(coeffs: Vec<C64>) -> Self {
        PotentialTerm::Poly(coeffs)
    }

    pub fn constant(c: C64) -> Self {
        PotentialTerm::Poly(vec![c])
    }

    pub fn step(x0: f64, jump: C64) -> Result<Self> {
        if !(x0 > 0.0 && x0 < 1.0) {
            return Err(Error::InvalidPotential(format!(
                "step abscissa {x0} must lie strictly inside (0, 1)"
            )));
        }
        Ok(PotentialTerm::Step { x0, jump })
    }

    pub fn log(x0: f64, strength: C64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x0) {
            return Err(Error::InvalidPotential(format!("log center {x0} must lie in [0, 1]")));
        }
        Ok(PotentialTerm::Log { x0, strength })
    }

    pub fn trig(cos: Vec<C64>, sin: Vec<C64>) -> Self {
        PotentialTerm::Trig { cos, sin }
    }

    /// Antiderivative from 0 as a new term.
    pub fn antiderivative(&self) -> Self {
        match self {
            PotentialTerm::Poly(c) => {
                let mut out = vec![c0()];
                out.extend(c.iter().enumerate().map(|(k, a)| a / (k + 1) as f64));
                PotentialTerm::Poly(out)
            }
            other => PotentialTerm::Integral(Box::new(other.clone())),
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        match self {
            PotentialTerm::Grid(g) => {
                PotentialTerm::grid(g.nodes.clone(), g.values.iter().map(|v| v * s).collect())
                    .expect("scaling keeps a valid grid")
            }
            PotentialTerm::Poly(c) => PotentialTerm::Poly(c.iter().map(|a| a * s).collect()),
            PotentialTerm::Step { x0, jump } => PotentialTerm::Step { x0: *x0, jump: jump * s },
            PotentialTerm::Log { x0, strength } => PotentialTerm::Log { x0: *x0, strength: strength * s },
            PotentialTerm::Trig { cos, sin } => PotentialTerm::Trig {
                cos: cos.iter().map(|a| a * s).collect(),
                sin: sin.iter().map(|a| a * s).collect(),
            },
            PotentialTerm::Integral(t) => PotentialTerm::Integral(Box::new(t.scaled(s))),
        }
    }

    pub fn value(&self, x: f64) -> Result<C64> {
        Ok(match self {
            PotentialTerm::Grid(g) => g.value(x),
            PotentialTerm::Poly(c) => c.iter().rev().fold(c0(), |acc, a| acc * x + a),
            PotentialTerm::Step { x0, jump } => {
                if x >= *x0 {
                    *jump
                } else {
                    c0()
                }
            }
            PotentialTerm::Log { x0, strength } => {
                if x == *x0 {
                    return Err(Error::SingularPoint(x));
                }
                strength * (x - x0).abs().ln()
            }
            PotentialTerm::Trig { cos, sin } => {
                let mut s = c0();
                for (k, a) in cos.iter().enumerate() {
                    s += a * (2.0 * PI * (k + 1) as f64 * x).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    s += b * (2.0 * PI * (k + 1) as f64 * x).sin();
                }
                s
            }
            PotentialTerm::Integral(t) => t.integral(x),
        })
    }

    /// int_0^x of the term.
    pub fn integral(&self, x: f64) -> C64 {
        match self {
            PotentialTerm::Grid(g) => g.integral(x),
            PotentialTerm::Poly(c) => {
                c.iter().enumerate().rev().fold(c0(), |acc, (k, a)| acc * x + a / (k + 1) as f64) * x
            }
            PotentialTerm::Step { x0, jump } => jump * (x - x0).max(0.0),
            PotentialTerm::Log { x0, strength } => strength * (log_g(x - x0) - log_g(-x0)),
            PotentialTerm::Trig { cos, sin } => {
                let mut s = c0();
                for (k, a) in cos.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s += a * ((w * x).sin() / w);
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s += b * ((1.0 - (w * x).cos()) / w);
                }
                s
            }
            PotentialTerm::Integral(t) => t.integral2(x),
        }
    }

    /// int_0^x int_0^t of the term.
    pub fn integral2(&self, x: f64) -> C64 {
        match self {
            PotentialTerm::Grid(g) => g.integral2(x),
            PotentialTerm::Poly(c) => {
                c.iter()
                    .enumerate()
                    .rev()
                    .fold(c0(), |acc, (k, a)| acc * x + a / ((k + 1) * (k + 2)) as f64)
                    * (x * x)
            }
            PotentialTerm::Step { x0, jump } => jump * (0.5 * (x - x0).max(0.0).powi(2)),
            PotentialTerm::Log { x0, strength } => {
                strength * (log_h(x - x0) - log_h(-x0) - log_g(-x0) * x)
            }
            PotentialTerm::Trig { cos, sin } => {
                let mut s = c0();
                for (k, a) in cos.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s += a * ((1.0 - (w * x).cos()) / (w * w));
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s += b * (x / w - (w * x).sin() / (w * w));
                }
                s
            }
            PotentialTerm::Integral(t) => {
                let mut breaks = t.breakpoints();
                breaks.extend(t.log_centers());
                quadrature::integrate(|s| t.integral2(s), 0.0, x, &breaks, 1e-15)
                    .unwrap_or_else(|_| {
                        quadrature::GaussRule::cached(16).integrate(0.0, x, |s| t.integral2(s))
                    })
            }
        }
    }

    /// Derivative away from jumps and singular points (used by the finite
    /// difference oracle for the regular part of q).
    pub fn derivative(&self, x: f64) -> Result<C64> {
        Ok(match self {
            PotentialTerm::Grid(g) => g.slope(g.segment(x)),
            PotentialTerm::Poly(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(c0(), |acc, (k, a)| acc * x + a * k as f64),
            PotentialTerm::Step { .. } => c0(),
            PotentialTerm::Log { x0, .. } => {
                return Err(Error::UnsupportedTerm(format!("log term centered at {x0}")))
            }
            PotentialTerm::Trig { cos, sin } => {
                let mut s = c0();
                for (k, a) in cos.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s -= a * (w * (w * x).sin());
                }
                for (k, b) in sin.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    s += b * (w * (w * x).cos());
                }
                s
            }
            PotentialTerm::Integral(t) => t.value(x)?,
        })
    }

    /// Jumps of the term; each contributes jump * delta(x - x0) to the derivative.
    pub fn jumps(&self) -> Vec<(f64, C64)> {
        match self {
            PotentialTerm::Step { x0, jump } => vec![(*x0, *jump)],
            _ => Vec::new(),
        }
    }

    /// Points where the term or its derivative is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PotentialTerm::Grid(g) if g.nodes.len() <= 66 => {
                g.nodes[1..g.nodes.len() - 1].to_vec()
            }
            PotentialTerm::Step { x0, .. } => vec![*x0],
            PotentialTerm::Integral(t) => {
                let mut b = t.breakpoints();
                b.extend(t.log_centers());
                b
            }
            _ => Vec::new(),
        }
    }

    pub fn log_centers(&self) -> Vec<f64> {
        match self {
            PotentialTerm::Log { x0, .. } => vec![*x0],
            _ => Vec::new(),
        }
    }

    fn coefficients_real(&self) -> bool {
        let real = |v: &[C64]| v.iter().all(|z| z.im == 0.0);
        match self {
            PotentialTerm::Grid(g) => real(&g.values),
            PotentialTerm::Poly(c) => real(c),
            PotentialTerm::Step { jump, .. } => jump.im == 0.0,
            PotentialTerm::Log { strength, .. } => strength.im == 0.0,
            PotentialTerm::Trig { cos, sin } => real(cos) && real(sin),
            PotentialTerm::Integral(t) => t.coefficients_real(),
        }
    }
}

/// u ln|u| - u, continuous at 0.
fn log_g(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.abs().ln() - u
    }
}

/// Antiderivative of log_g vanishing at 0.
fn log_h(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        0.5 * u * u * u.abs().ln() - 0.75 * u * u
    }
}

/// Sum of terms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Potential {
    pub terms: Vec<PotentialTerm>,
}

impl Potential {
    pub fn new(terms: Vec<PotentialTerm>) -> Self {
        Potential { terms }
    }

    pub fn zero() -> Self {
        Potential { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Potential::new(vec![PotentialTerm::constant(c)])
    }

    pub fn evaluate(&self, x: f64) -> Result<C64> {
        self.terms.iter().try_fold(c0(), |s, t| Ok(s + t.value(x)?))
    }

    pub fn integral(&self, x: f64) -> C64 {
        self.terms.iter().map(|t| t.integral(x)).sum()
    }

    pub fn integral2(&self, x: f64) -> C64 {
        self.terms.iter().map(|t| t.integral2(x)).sum()
    }

    pub fn derivative(&self, x: f64) -> Result<C64> {
        self.terms.iter().try_fold(c0(), |s, t| Ok(s + t.derivative(x)?))
    }

    pub fn jumps(&self) -> Vec<(f64, C64)> {
        self.terms.iter().flat_map(|t| t.jumps()).collect()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        sorted_unique(self.terms.iter().flat_map(|t| t.breakpoints()).collect())
    }

    pub fn log_centers(&self) -> Vec<f64> {
        sorted_unique(self.terms.iter().flat_map(|t| t.log_centers()).collect())
    }

    /// Break points and log centers together.
    pub fn singular_set(&self) -> Vec<f64> {
        let mut all = self.breakpoints();
        all.extend(self.log_centers());
        sorted_unique(all)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match t {
            PotentialTerm::Poly(c) => c.iter().all(|z| *z == c0()),
            _ => false,
        })
    }

    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|t| t.coefficients_real())
    }

    pub fn scaled(&self, s: C64) -> Self {
        Potential::new(self.terms.iter().map(|t| t.scaled(s)).collect())
    }

    /// int_0^1 |f|^k for k = 1, 2, by adaptive quadrature.
    fn lk_integral(&self, k: i32) -> Result<f64> {
        let breaks = self.singular_set();
        quadrature::integrate(
            |x| self.evaluate(x).map(|v| v.norm().powi(k)).unwrap_or(0.0),
            0.0,
            1.0,
            &breaks,
            1e-12,
        )
    }

    pub fn l2_norm(&self) -> Result<f64> {
        Ok(self.lk_integral(2)?.sqrt())
    }

    pub fn l1_norm(&self) -> Result<f64> {
        self.lk_integral(1)
    }
}

pub(crate) fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// y(0) = y(1) = 0
    Dirichlet,
    /// y(0) = 0, y^[1](1) + h y(1) = 0
    Mixed { h: C64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub p: Potential,
    pub r: Potential,
    pub bc: BoundaryCondition,
    /// Cumulative spectral shift: eigenvalues of this problem equal those
    /// of the original problem plus `shift`.
    pub shift: C64,
    p0: C64,
}

impl Problem {
    pub fn new(p: Potential, r: Potential, bc: BoundaryCondition) -> Self {
        let p0 = p.integral(1.0);
        Problem { p, r, bc, shift: c0(), p0 }
    }

    pub fn p0(&self) -> C64 {
        self.p0
    }

    pub fn integral_p(&self, x: f64) -> C64 {
        self.p.integral(x)
    }

    pub fn is_real(&self) -> bool {
        let h_real = match self.bc {
            BoundaryCondition::Dirichlet => true,
            BoundaryCondition::Mixed { h } => h.im == 0.0,
        };
        self.p.is_real() && self.r.is_real() && h_real
    }

    /// Replace lambda by lambda - l0: p -> p + l0, q -> q - 2 l0 p - l0^2
    /// (r shifted so that r(1) is unchanged).
    /// Eigenvalues of the result are those of `self` plus l0.
    pub fn shift_parameter(&self, l0: C64) -> Problem {
        if l0 == c0() {
            return self.clone();
        }
        let mut p = self.p.clone();
        p.terms.push(PotentialTerm::constant(l0));
        let mut r = self.r.clone();
        for t in &self.p.terms {
            r.terms.push(t.scaled(-2.0 * l0).antiderivative());
        }
        // the constant keeps r(1), hence the mixed condition, unchanged;
        // y(0) = 0 makes it invisible at the left end
        r.terms.push(PotentialTerm::poly(vec![2.0 * l0 * self.p0 + l0 * l0, -l0 * l0]));
        let mut out = Problem::new(p, r, self.bc);
        out.shift = self.shift + l0;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_terms() -> Vec<PotentialTerm> {
        vec![
            PotentialTerm::grid(vec![0.0, 0.3, 0.5, 1.0], vec![c(1.0, 0.0), c(-1.0, 0.5), c(2.0, 0.0), c(0.0, 1.0)])
                .unwrap(),
            PotentialTerm::poly(vec![c(0.5, 0.0), c(-1.0, 1.0), c(2.0, 0.0)]),
            PotentialTerm::step(0.4, c(1.5, -0.5)).unwrap(),
            PotentialTerm::log(0.6, c(0.7, 0.2)).unwrap(),
            PotentialTerm::log(0.0, c(1.0, 0.0)).unwrap(),
            PotentialTerm::trig(vec![c(0.3, 0.0), c(0.1, 0.1)], vec![c(-0.2, 0.0)]),
            PotentialTerm::Integral(Box::new(PotentialTerm::step(0.7, c(2.0, 0.0)).unwrap())),
            PotentialTerm::Integral(Box::new(PotentialTerm::log(0.25, c(1.0, 0.0)).unwrap())),
        ]
    }

    #[test]
    fn spec_examples() {
        let x = Potential::new(vec![PotentialTerm::poly(vec![c(0.0, 0.0), c(1.0, 0.0)])]);
        assert_eq!(x.evaluate(0.5).unwrap(), c(0.5, 0.0));
        let s = Potential::new(vec![PotentialTerm::step(0.5, c(2.0, 0.0)).unwrap()]);
        assert_eq!(s.evaluate(0.25).unwrap(), c(0.0, 0.0));
        assert_eq!(s.evaluate(0.75).unwrap(), c(2.0, 0.0));
        assert_eq!(s.evaluate(0.5).unwrap(), c(2.0, 0.0));
        let l = Potential::new(vec![PotentialTerm::log(0.0, c(1.0, 0.0)).unwrap()]);
        assert!((l.evaluate((-1.0f64).exp()).unwrap() - c(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(l.evaluate(0.0), Err(Error::SingularPoint(0.0)));
        assert_eq!(Problem::new(Potential::constant(c(1.0, 0.0)), Potential::zero(), BoundaryCondition::Dirichlet).p0(), c(1.0, 0.0));
        assert!((x.integral(1.0) - c(0.5, 0.0)).norm() < 1e-15);
        assert!((s.integral(1.0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn invalid_terms_rejected() {
        assert!(PotentialTerm::step(0.0, c(1.0, 0.0)).is_err());
        assert!(PotentialTerm::step(1.0, c(1.0, 0.0)).is_err());
        assert!(PotentialTerm::log(1.5, c(1.0, 0.0)).is_err());
        assert!(PotentialTerm::grid(vec![0.0, 0.5], vec![c(1.0, 0.0); 2]).is_err());
        assert!(PotentialTerm::grid(vec![0.0, 0.6, 0.5, 1.0], vec![c(1.0, 0.0); 4]).is_err());
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for t in sample_terms() {
            let mut breaks = t.breakpoints();
            breaks.extend(t.log_centers());
            for &x in &[0.13, 0.5, 0.77, 1.0] {
                let q1: C64 = quadrature::integrate(|s| t.value(s).unwrap(), 0.0, x, &breaks, 1e-13).unwrap();
                assert!((q1 - t.integral(x)).norm() < 1e-11, "{t:?} x={x}");
                let q2: C64 = quadrature::integrate(|s| t.integral(s), 0.0, x, &breaks, 1e-13).unwrap();
                assert!((q2 - t.integral2(x)).norm() < 1e-11, "{t:?} x={x}");
            }
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        for t in sample_terms() {
            if !t.log_centers().is_empty() {
                assert!(t.derivative(0.5).is_err());
                continue;
            }
            for &x in &[0.11, 0.62, 0.91] {
                let hs = 1e-6;
                let fd = (t.value(x + hs).unwrap() - t.value(x - hs).unwrap()) / (2.0 * hs);
                assert!((fd - t.derivative(x).unwrap()).norm() < 1e-6, "{t:?}");
            }
        }
    }

    #[test]
    fn shift_zero_is_identity_and_shift_roundtrips() {
        let p = Potential::new(sample_terms());
        let r = Potential::new(vec![PotentialTerm::step(0.5, c(2.0, 0.0)).unwrap()]);
        let pr = Problem::new(p, r, BoundaryCondition::Dirichlet);
        assert_eq!(pr.shift_parameter(c(0.0, 0.0)), pr);
        let l0 = c(0.37, 0.73);
        let back = pr.shift_parameter(l0).shift_parameter(-l0);
        assert_eq!(back.shift, c(0.0, 0.0));
        for &x in &[0.1, 0.45, 0.8, 1.0] {
            assert!((back.p.evaluate(x).unwrap() - pr.p.evaluate(x).unwrap()).norm() < 1e-12);
            assert!((back.r.evaluate(x).unwrap() - pr.r.evaluate(x).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn shift_of_zero_problem() {
        let pr = Problem::new(Potential::zero(), Potential::zero(), BoundaryCondition::Dirichlet);
        let s = pr.shift_parameter(c(1.0, 0.0));
        for &x in &[0.0, 0.3, 1.0] {
            assert_eq!(s.p.evaluate(x).unwrap(), c(1.0, 0.0));
            assert!((s.r.evaluate(x).unwrap() - c(1.0 - x, 0.0)).norm() < 1e-15);
        }
        assert_eq!(s.p0(), c(1.0, 0.0));
    }

    #[test]
    fn norms() {
        let p = Potential::constant(c(0.0, 2.0));
        assert!((p.l2_norm().unwrap() - 2.0).abs() < 1e-12);
        let l = Potential::new(vec![PotentialTerm::log(0.0, c(1.0, 0.0)).unwrap()]);
        // int_0^1 ln^2 x dx = 2
        assert!((l.l2_norm().unwrap() - 2f64.sqrt()).abs() < 1e-9);
    }
}
