//! Eigenvalue location and labeling, multiplicities, norming constants,
//! eigenfunction remainders and associated chains.
//!
//! All eigenvalues are reported for the problem passed in by the caller. When
//! 0 is a zero of its characteristic function the work is done on a shifted
//! copy and mapped back.

use crate::contour::{self, Contour, Piece};
use crate::dirac::{self, Branch, DiracPotential, Settings};
use crate::error::{Error, Result};
use crate::linalg::Jet;
use crate::potentials::{BoundaryCondition, Problem};
use crate::quadrature::GaussRule;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Candidate shifts tried when assumption (A) fails.
pub const SHIFTS: [C64; 3] = [C64::new(0.37, 0.0), C64::new(0.0, 0.73), C64::new(0.37, 0.73)];

const CONTOUR_TOL: f64 = 1e-8;
const SPACING: f64 = 0.25;
const MAX_SUBDIVISION: usize = 12;
const CHAIN_TOL: f64 = 1e-5;

fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn initial_guess(n: i64, p0: C64, bc: BoundaryCondition) -> Result<C64> {
    match bc {
        BoundaryCondition::Dirichlet if n == 0 => {
            Err(Error::Domain("index 0 does not exist for Dirichlet conditions".into()))
        }
        BoundaryCondition::Dirichlet => Ok(c64(PI * n as f64) + p0),
        BoundaryCondition::Mixed { .. } => Ok(c64(PI * (n as f64 + 0.5)) + p0),
    }
}

fn qd_value(problem: &Problem, dp: &DiracPotential, lambda: C64, tol: f64) -> Result<C64> {
    Ok(dirac::charfn_jet::<1>(problem, dp, lambda, tol, Branch::QuasiDerivative)?.0[0])
}

fn satisfies_a(problem: &Problem, tol: f64) -> Result<bool> {
    let dp = dirac::qd_only(problem);
    let f0 = qd_value(problem, &dp, c64(0.0), tol)?;
    let a = qd_value(problem, &dp, c64(0.3), tol)?;
    let b = qd_value(problem, &dp, c64(-0.3), tol)?;
    let eps = 1e-6 * a.norm().max(b.norm()).max(1.0);
    Ok(f0.norm() >= eps)
}

/// Returns the problem itself if its characteristic function does not
/// vanish at 0, otherwise a shifted copy (see `Problem::shift`).
pub fn ensure_assumption_a(problem: &Problem, tol: f64) -> Result<Problem> {
    if satisfies_a(problem, tol)? {
        return Ok(problem.clone());
    }
    for l0 in SHIFTS {
        let cand = problem.shift_parameter(l0);
        if satisfies_a(&cand, tol)? {
            return Ok(cand);
        }
    }
    Err(Error::AssumptionA)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Refined {
    pub lambda: C64,
    pub multiplicity_hint: usize,
    pub iterations: usize,
}

/// Damped Newton (Schroder's variant once linear convergence shows a
/// multiple zero) with an argument-principle fallback on |z - guess| < 1.
pub fn refine<F>(f: &F, guess: C64, tol: f64) -> Result<Refined>
where
    F: Fn(C64) -> Result<Jet<3>> + Sync,
{
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    match newton(f, guess, tol)? {
        Some(r) => Ok(r),
        None => {
            let roots = disc_roots(f, guess, 1.0)?;
            let best = roots
                .into_iter()
                .filter(|(z, _)| (*z - guess).norm() < 1.0)
                .min_by(|a, b| (a.0 - guess).norm().total_cmp(&(b.0 - guess).norm()));
            match best {
                Some((z, m)) => Ok(Refined { lambda: z, multiplicity_hint: m, iterations: 0 }),
                None => Err(Error::NoConvergence(guess)),
            }
        }
    }
}

fn newton<F>(f: &F, guess: C64, tol: f64) -> Result<Option<Refined>>
where
    F: Fn(C64) -> Result<Jet<3>> + Sync,
{
    let mut z = guess;
    let mut jz = f(z)?;
    let scale = jz.0[0].norm().max(1.0);
    let mut prev: Option<f64> = None;
    let mut schroder = false;
    let mut hint = 1;
    let mut stalls = 0;
    for it in 0..80 {
        let (a, b, c) = (jz.0[0], jz.0[1], jz.0[2] * 2.0);
        if a == c64(0.0) {
            return Ok(Some(Refined { lambda: z, multiplicity_hint: hint, iterations: it }));
        }
        let step = if schroder { a * b / (b * b - a * c) } else { a / b };
        if !step.is_finite() {
            return Ok(None);
        }
        let mut t = 1.0;
        let accepted = loop {
            let zn = z - step * t;
            if (zn - guess).norm() <= 1.0 {
                let jn = f(zn)?;
                if jn.0[0].norm() < a.norm() || t < 1.0 / 32.0 {
                    break Some((zn, jn));
                }
            } else if t < 1.0 / 32.0 {
                break None;
            }
            t *= 0.5;
        };
        let Some((zn, jn)) = accepted else { return Ok(None) };
        let s = (zn - z).norm();
        z = zn;
        jz = jn;
        if s <= tol * (1.0 + z.norm()) {
            return Ok(Some(Refined { lambda: z, multiplicity_hint: hint, iterations: it + 1 }));
        }
        if let Some(ps) = prev {
            let ratio = s / ps;
            if !schroder && it >= 2 && t == 1.0 && ratio > 0.3 && ratio < 0.95 {
                schroder = true;
                hint = (1.0 / (1.0 - ratio)).round().max(2.0) as usize;
            } else if schroder && ratio > 0.5 {
                stalls += 1;
            }
        }
        if stalls >= 3 && jz.0[0].norm() <= 1e-8 * scale {
            return Ok(Some(Refined { lambda: z, multiplicity_hint: hint, iterations: it + 1 }));
        }
        prev = Some(s);
    }
    Ok(None)
}

/// Zeros in |z - center| < radius from contour moments, clustered, with
/// multiplicities.
fn disc_roots<F>(f: &F, center: C64, radius: f64) -> Result<Vec<(C64, usize)>>
where
    F: Fn(C64) -> Result<Jet<3>> + Sync,
{
    const M: usize = 128;
    let samples: Vec<C64> = (0..M)
        .into_par_iter()
        .map(|j| {
            let w = C64::from_polar(radius, 2.0 * PI * j as f64 / M as f64);
            let v = f(center + w)?;
            if v.0[0] == c64(0.0) {
                return Err(Error::ZeroOnContour);
            }
            Ok(w * v.0[1] / v.0[0])
        })
        .collect::<Result<_>>()?;
    // moments s_k = sum of w_i^k over the zeros, w = z - center
    let moment = |k: i32| samples.iter().enumerate().fold(c64(0.0), |acc, (j, &g)| {
        let w = C64::from_polar(radius, 2.0 * PI * j as f64 / M as f64);
        acc + g * w.powi(k)
    }) / M as f64;
    let n = moment(0).re.round();
    if n < 0.5 {
        return Ok(Vec::new());
    }
    let n = n as usize;
    if n > 8 {
        return Err(Error::Domain(format!("{n} zeros in refinement disc")));
    }
    let s: Vec<C64> = (0..=n as i32).map(moment).collect();
    // Newton identities: elementary symmetric functions e_k
    let mut e = vec![c64(1.0)];
    for k in 1..=n {
        let mut acc = c64(0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * s[i] * sign;
        }
        e.push(acc / k as f64);
    }
    // monic polynomial coefficients, highest first
    let coeffs: Vec<C64> = (0..=n).map(|k| if k % 2 == 0 { e[k] } else { -e[k] }).collect();
    let roots = poly_roots(&coeffs);
    // cluster, then polish simple ones
    let mut out: Vec<(C64, usize)> = Vec::new();
    for w in roots {
        let z = center + w;
        match out.iter_mut().find(|(c, _)| (*c - z).norm() < 1e-3 * radius.max(1e-3)) {
            Some((c, m)) => {
                *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((z, 1)),
        }
    }
    for (z, m) in out.iter_mut() {
        for _ in 0..20 {
            let v = f(*z)?;
            let (a, b, c) = (v.0[0], v.0[1], v.0[2] * 2.0);
            let step = if *m == 1 { a / b } else { a * b / (b * b - a * c) };
            if !step.is_finite() || step.norm() > 0.1 * radius {
                break;
            }
            *z -= step;
            if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                break;
            }
        }
    }
    Ok(out)
}

/// Roots of a monic polynomial (coefficients highest first) by
/// Durand-Kerner iteration.
fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    let eval = |z: C64| coeffs.iter().fold(c64(0.0), |acc, &c| acc * z + c);
    let bound = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut r: Vec<C64> = (0..n).map(|k| C64::from_polar(0.5 * bound, 0.4 + 2.0 * PI * k as f64 / n as f64)).collect();
    for _ in 0..500 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut den = c64(1.0);
            for j in 0..n {
                if i != j {
                    den *= r[i] - r[j];
                }
            }
            if den == c64(0.0) {
                continue;
            }
            let d = eval(r[i]) / den;
            r[i] -= d;
            delta = delta.max(d.norm());
        }
        if delta < 1e-15 * bound {
            break;
        }
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledEigenvalue {
    pub n: i64,
    pub lambda: C64,
    pub remainder: C64,
    pub multiplicity: usize,
    pub norming: Option<f64>,
    /// Norming constant computed without real data or a real simple
    /// eigenvalue.
    pub outside_theorem: bool,
}

/// Sum of |remainder|^2 over lo < |n| <= hi.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSum {
    pub lo: i64,
    pub hi: i64,
    pub sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<LabeledEigenvalue>,
    pub window_sums: Vec<WindowSum>,
    /// Shift applied to enforce assumption (A); eigenvalues are reported
    /// for the unshifted problem.
    pub shift: C64,
    pub p0: C64,
    /// (center label, winding count) per strip; empty if not verified.
    pub strip_counts: Vec<(i64, i64)>,
}

impl SpectrumReport {
    pub fn get(&self, n: i64) -> Option<&LabeledEigenvalue> {
        self.eigenvalues.iter().find(|e| e.n == n)
    }
}

/// Dyadic window sums of |a_n|^2 for lo = 1, 2, 4, ... with hi = 2 lo
/// fully covered by the listed indices.
pub fn dyadic_sums(values: &[(i64, f64)]) -> Vec<WindowSum> {
    let kmax = values.iter().map(|v| v.0.abs()).max().unwrap_or(0);
    let mut out = Vec::new();
    let mut lo = 1;
    while 2 * lo <= kmax {
        let sum = values.iter().filter(|v| v.0.abs() > lo && v.0.abs() <= 2 * lo).map(|v| v.1 * v.1).sum();
        out.push(WindowSum { lo, hi: 2 * lo, sum });
        lo *= 2;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumOptions {
    /// Reconcile Newton roots against per-strip winding counts.
    pub verify_strips: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { verify_strips: true }
    }
}

pub struct SpectralSolver {
    original: Problem,
    working: Problem,
    dp: DiracPotential,
    dp_original: OnceLock<Result<DiracPotential>>,
    settings: Settings,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver").field("shift", &self.shift()).field("dirac", &self.dp).finish()
    }
}

struct Strips {
    /// real parts of the vertical lines, increasing
    lines: Vec<f64>,
    im: (f64, f64),
    counts: Vec<i64>,
}

impl SpectralSolver {
    pub fn new(problem: &Problem, settings: Settings) -> Result<Self> {
        let working = ensure_assumption_a(problem, settings.tol)?;
        let dp = dirac::build_dirac(&working, &settings.seed)?;
        Ok(SpectralSolver { original: problem.clone(), working, dp, dp_original: OnceLock::new(), settings })
    }

    pub fn problem(&self) -> &Problem {
        &self.original
    }

    pub fn working_problem(&self) -> &Problem {
        &self.working
    }

    pub fn working_dirac(&self) -> &DiracPotential {
        &self.dp
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Shift between the working and the original problem.
    pub fn shift(&self) -> C64 {
        self.working.shift - self.original.shift
    }

    /// Dirac potential of the unshifted problem.
    pub fn original_dirac(&self) -> Result<&DiracPotential> {
        if self.shift() == c64(0.0) {
            return Ok(&self.dp);
        }
        match self.dp_original.get_or_init(|| dirac::build_dirac(&self.original, &self.settings.seed)) {
            Ok(d) => Ok(d),
            Err(e) => Err(e.clone()),
        }
    }

    /// Characteristic function of the working problem at lambda + shift;
    /// its zeros are the eigenvalues of the original problem.
    pub fn charfn<const N: usize>(&self, lambda: C64, tol: f64) -> Result<Jet<N>> {
        let st = Settings { tol, ..self.settings };
        dirac::charfn::<N>(&self.working, &self.dp, lambda + self.shift(), &st)
    }

    /// phi or psi of the unshifted problem.
    pub fn reference_charfn(&self, lambda: C64) -> Result<C64> {
        let dp = self.original_dirac()?;
        Ok(dirac::charfn::<1>(&self.original, dp, lambda, &self.settings)?.0[0])
    }

    fn newton_tol(&self) -> f64 {
        (0.1 * self.settings.tol).max(1e-13)
    }

    pub fn refine(&self, guess: C64) -> Result<Refined> {
        let tol = self.newton_tol();
        refine(&|z| self.charfn::<3>(z, tol), guess, self.settings.tol)
    }

    pub fn count_zeros(&self, contour: Contour) -> Result<i64> {
        contour::count_zeros(&|z| Ok(self.charfn::<1>(z, CONTOUR_TOL)?.0[0]), contour)
    }

    fn value(&self, z: C64) -> Result<C64> {
        Ok(self.charfn::<1>(z, CONTOUR_TOL)?.0[0])
    }

    fn label_window(&self, k: i64) -> (Vec<i64>, Vec<f64>) {
        // labels in the symmetric window and strip boundaries in Re(lambda - p0)
        match self.original.bc {
            BoundaryCondition::Dirichlet => {
                let labels = (-k..=k).filter(|&n| n != 0).collect();
                let bounds = (-k - 1..=k).map(|j| PI * (j as f64 + 0.5)).collect();
                (labels, bounds)
            }
            BoundaryCondition::Mixed { .. } => {
                let labels = (-k - 1..=k).collect();
                let bounds = (-k - 1..=k + 1).map(|j| PI * j as f64).collect();
                (labels, bounds)
            }
        }
    }

    fn strips(&self, bounds: &[f64], half_height: f64) -> Result<Strips> {
        let p0 = self.original.p0();
        let f = |z: C64| self.value(z);
        let mut h = half_height;
        for _ in 0..4 {
            let (lo, hi) = (p0.im - h, p0.im + h);
            let verticals: Vec<(f64, f64)> = bounds
                .par_iter()
                .map(|&b| {
                    for off in [0.0, 0.021, -0.034, 0.055] {
                        let x = p0.re + b + off;
                        let piece = Piece::Line(C64::new(x, lo), C64::new(x, hi));
                        match contour::phase_change(&f, piece, SPACING) {
                            Ok(ph) => return Ok((x, ph)),
                            Err(Error::ZeroOnContour) => continue,
                            Err(e) => return Err(e),
                        }
                    }
                    Err(Error::ZeroOnContour)
                })
                .collect::<Result<_>>()?;
            let horizontals: Result<Vec<f64>> = (0..verticals.len() - 1)
                .into_par_iter()
                .map(|k| {
                    let (a, b) = (verticals[k].0, verticals[k + 1].0);
                    let bottom = contour::phase_change(&f, Piece::Line(C64::new(a, lo), C64::new(b, lo)), SPACING)?;
                    let top = contour::phase_change(&f, Piece::Line(C64::new(a, hi), C64::new(b, hi)), SPACING)?;
                    Ok(bottom - top)
                })
                .collect();
            match horizontals {
                Ok(hz) => {
                    let counts = hz
                        .iter()
                        .enumerate()
                        .map(|(k, &b)| contour::to_count(b + verticals[k + 1].1 - verticals[k].1))
                        .collect();
                    return Ok(Strips { lines: verticals.iter().map(|v| v.0).collect(), im: (lo, hi), counts });
                }
                Err(Error::ZeroOnContour) => h *= 1.037,
                Err(e) => return Err(e),
            }
        }
        Err(Error::ZeroOnContour)
    }

    /// Multiplicity of an isolated zero from winding counts on shrinking
    /// circles.
    pub fn multiplicity(&self, z: C64, others: &[C64]) -> Result<usize> {
        let d = others.iter().filter(|o| (**o - z).norm() > 0.0).map(|o| (*o - z).norm()).fold(f64::INFINITY, f64::min);
        let mut rho = 0.1f64.min(0.45 * d);
        let mut last: Option<i64> = None;
        for _ in 0..4 {
            let c = self.count_zeros(Contour::Circle { center: z, radius: rho })?;
            if last == Some(c) {
                break;
            }
            last = Some(c);
            rho *= 0.25;
        }
        Ok(last.unwrap_or(1).max(1) as usize)
    }

    fn search_rect(
        &self,
        re: (f64, f64),
        im: (f64, f64),
        zeros: &mut Vec<(C64, usize)>,
        depth: usize,
    ) -> Result<()> {
        let rect = Contour::Rectangle { re, im };
        let n = self.count_zeros(rect)?;
        let known = |zs: &[(C64, usize)]| zs.iter().filter(|(z, _)| rect.contains(*z)).map(|(_, m)| *m as i64).sum::<i64>();
        if n <= known(zeros) {
            return Ok(());
        }
        let center = C64::new(0.5 * (re.0 + re.1), 0.5 * (im.0 + im.1));
        let radius = 0.5 * ((re.1 - re.0).hypot(im.1 - im.0)) * 1.02;
        if radius < 1.0 {
            let tol = self.newton_tol();
            let f = |z: C64| self.charfn::<3>(z, tol);
            if let Ok(roots) = disc_roots(&f, center, radius) {
                for (z, m) in roots {
                    if rect.contains(z) && !zeros.iter().any(|(k, _)| (*k - z).norm() < 1e-6 * (1.0 + z.norm())) {
                        zeros.push((z, m));
                    }
                }
                if n <= known(zeros) {
                    return Ok(());
                }
            }
        }
        if depth >= MAX_SUBDIVISION {
            return Err(Error::StripMismatch(format!(
                "subdivision depth exhausted near {center}: {n} zeros counted, {} located",
                known(zeros)
            )));
        }
        // off-center split keeps symmetric zeros (e.g. on the real axis)
        // away from the new edges
        let rm = re.0 + 0.5183 * (re.1 - re.0);
        let im_m = im.0 + 0.4871 * (im.1 - im.0);
        for (a, b) in [((re.0, rm), (im.0, im_m)), ((rm, re.1), (im.0, im_m)), ((re.0, rm), (im_m, im.1)), ((rm, re.1), (im_m, im.1))] {
            self.search_rect(a, b, zeros, depth + 1)?;
        }
        Ok(())
    }

    /// Eigenvalues with labels n_min..=n_max (index 0 skipped for Dirichlet).
    pub fn compute_spectrum(&self, n_min: i64, n_max: i64, opts: SpectrumOptions) -> Result<SpectrumReport> {
        if n_min > n_max {
            return Err(Error::Domain("empty index range".into()));
        }
        let bc = self.original.bc;
        let p0 = self.original.p0();
        let k = n_min.abs().max(n_max.abs()).max(1);
        let (labels, bounds) = self.label_window(k);
        let expected = labels.len();

        let guesses: Vec<C64> = labels.iter().map(|&n| initial_guess(n, p0, bc)).collect::<Result<_>>()?;
        let refined: Vec<Result<Refined>> = guesses.par_iter().map(|&g| self.refine(g)).collect();
        let mut zeros: Vec<(C64, usize)> = Vec::new();
        for r in refined {
            match r {
                Ok(r) => {
                    if !zeros.iter().any(|(z, _)| (*z - r.lambda).norm() < 1e-6 * (1.0 + z.norm())) {
                        zeros.push((r.lambda, r.multiplicity_hint));
                    }
                }
                Err(Error::NoConvergence(_)) | Err(Error::ToleranceNotReached { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let (re_lo, re_hi) = (p0.re + bounds[0], p0.re + bounds[bounds.len() - 1]);
        zeros.retain(|(z, _)| z.re > re_lo && z.re < re_hi);

        let mut strip_counts = Vec::new();
        if opts.verify_strips {
            let max_rem = zeros
                .iter()
                .map(|(z, _)| {
                    let t = (*z - p0).re / PI;
                    let nearest = guesses.iter().map(|g| (*z - g).norm()).fold(f64::INFINITY, f64::min);
                    nearest.min(t.abs() + 1.0)
                })
                .fold(0.0, f64::max);
            let max_im = zeros.iter().map(|(z, _)| (z.im - p0.im).abs()).fold(0.0, f64::max);
            let mut h = (1.0 + p0.norm() + max_rem).max(max_im + 0.5).max(2.0);
            let mut strips = self.strips(&bounds, h)?;
            for _ in 0..3 {
                let total: i64 = strips.counts.iter().sum();
                if total >= expected as i64 {
                    break;
                }
                h *= 2.0;
                strips = self.strips(&bounds, h)?;
            }
            let total: i64 = strips.counts.iter().sum();
            if total != expected as i64 {
                return Err(Error::StripMismatch(format!("window holds {total} zeros, expected {expected}")));
            }
            // reconcile each strip
            for (j, &w) in strips.counts.iter().enumerate() {
                let (a, b) = (strips.lines[j], strips.lines[j + 1]);
                let inside = |z: &C64| z.re > a && z.re < b && z.im > strips.im.0 && z.im < strips.im.1;
                let mut have: i64 = zeros.iter().filter(|(z, _)| inside(z)).map(|(_, m)| *m as i64).sum();
                if have != w {
                    let all: Vec<C64> = zeros.iter().map(|z| z.0).collect();
                    for zm in zeros.iter_mut().filter(|(z, _)| inside(z)) {
                        zm.1 = self.multiplicity(zm.0, &all)?;
                    }
                    have = zeros.iter().filter(|(z, _)| inside(z)).map(|(_, m)| *m as i64).sum();
                }
                if have < w {
                    self.search_rect((a, b), strips.im, &mut zeros, 0)?;
                    have = zeros.iter().filter(|(z, _)| inside(z)).map(|(_, m)| *m as i64).sum();
                }
                if have != w {
                    return Err(Error::StripMismatch(format!(
                        "strip {j}: winding count {w}, located {have} with multiplicity"
                    )));
                }
            }
            zeros.retain(|(z, _)| z.im > strips.im.0 && z.im < strips.im.1);
            let centers: Vec<i64> = match bc {
                BoundaryCondition::Dirichlet => (-k..=k).collect(),
                BoundaryCondition::Mixed { .. } => (-k - 1..=k).collect(),
            };
            strip_counts = centers.into_iter().zip(strips.counts.iter().copied()).collect();
        } else {
            let all: Vec<C64> = zeros.iter().map(|z| z.0).collect();
            for zm in zeros.iter_mut().filter(|z| z.1 > 1) {
                zm.1 = self.multiplicity(zm.0, &all)?;
            }
        }

        // rank order by Re(lambda - p0), ties by Im lambda
        let mut seq: Vec<(C64, usize)> = zeros.clone();
        seq.sort_by(|a, b| {
            let (da, db) = ((a.0 - p0).re, (b.0 - p0).re);
            if (da - db).abs() <= 1e-8 * (1.0 + da.abs()) {
                a.0.im.total_cmp(&b.0.im)
            } else {
                da.total_cmp(&db)
            }
        });
        let expanded: Vec<(C64, usize)> = seq.iter().flat_map(|&(z, m)| std::iter::repeat((z, m)).take(m)).collect();
        if expanded.len() != expected && !opts.verify_strips {
            // large remainders sit at low labels: verify a small window first
            if let Some(rep) = self.patch_low_window(k, &expanded, n_min, n_max)? {
                return Ok(rep);
            }
            return self.compute_spectrum(n_min, n_max, SpectrumOptions { verify_strips: true });
        }
        if expanded.len() != expected {
            let missing = labels.iter().copied().find(|&n| {
                let g = initial_guess(n, p0, bc).unwrap_or(p0);
                !expanded.iter().any(|(z, _)| (*z - g).norm() < 1.0)
            });
            return Err(match missing {
                Some(n) if expanded.len() < expected => Error::MissingIndex(n),
                _ => Error::StripMismatch(format!("located {} zeros, expected {expected}", expanded.len())),
            });
        }
        let mut eigenvalues = Vec::new();
        for (&n, &(z, m)) in labels.iter().zip(expanded.iter()) {
            if n < n_min || n > n_max {
                continue;
            }
            let g = initial_guess(n, p0, bc)?;
            eigenvalues.push(LabeledEigenvalue {
                n,
                lambda: z,
                remainder: z - g,
                multiplicity: m,
                norming: None,
                outside_theorem: false,
            });
        }
        let window_sums = dyadic_sums(&eigenvalues.iter().map(|e| (e.n, e.remainder.norm())).collect::<Vec<_>>());
        Ok(SpectrumReport { eigenvalues, window_sums, shift: self.shift(), p0, strip_counts })
    }

    /// Verified spectrum for |n| <= k0 joined with the fast-path zeros
    /// outside that window, for growing k0 < k. None if no k0 reconciles.
    fn patch_low_window(
        &self,
        k: i64,
        expanded: &[(C64, usize)],
        n_min: i64,
        n_max: i64,
    ) -> Result<Option<SpectrumReport>> {
        let bc = self.original.bc;
        let p0 = self.original.p0();
        let mut k0 = 8;
        while k0 < k {
            let lo = match bc {
                BoundaryCondition::Dirichlet => -k0,
                BoundaryCondition::Mixed { .. } => -k0 - 1,
            };
            let low = match self.compute_spectrum(lo, k0, SpectrumOptions { verify_strips: true }) {
                Ok(r) => r,
                Err(Error::StripMismatch(_)) | Err(Error::MissingIndex(_)) => {
                    k0 *= 2;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let (_, bounds) = self.label_window(k0);
            let (a, b) = (p0.re + bounds[0], p0.re + bounds[bounds.len() - 1]);
            let below: Vec<(C64, usize)> = expanded.iter().copied().filter(|z| z.0.re <= a).collect();
            let above: Vec<(C64, usize)> = expanded.iter().copied().filter(|z| z.0.re >= b).collect();
            let outer = (k - k0) as usize;
            if below.len() == outer && above.len() == outer {
                let below_labels = (lo - outer as i64..lo).zip(below);
                let above_labels = (k0 + 1..=k).zip(above);
                let mut outside = Vec::new();
                for (n, (z, m)) in below_labels.chain(above_labels) {
                    let g = initial_guess(n, p0, bc)?;
                    outside.push(LabeledEigenvalue {
                        n,
                        lambda: z,
                        remainder: z - g,
                        multiplicity: m,
                        norming: None,
                        outside_theorem: false,
                    });
                }
                if outside.iter().all(|e| e.remainder.norm() < 1.0) {
                    let mut eigenvalues: Vec<LabeledEigenvalue> =
                        outside.into_iter().chain(low.eigenvalues).filter(|e| e.n >= n_min && e.n <= n_max).collect();
                    eigenvalues.sort_by_key(|e| e.n);
                    let window_sums =
                        dyadic_sums(&eigenvalues.iter().map(|e| (e.n, e.remainder.norm())).collect::<Vec<_>>());
                    return Ok(Some(SpectrumReport {
                        eigenvalues,
                        window_sums,
                        shift: self.shift(),
                        p0,
                        strip_counts: Vec::new(),
                    }));
                }
            }
            k0 *= 2;
        }
        Ok(None)
    }

    fn dense(&self, lambda: C64) -> Result<(&DiracPotential, dirac::FundamentalSolution)> {
        let dp = self.original_dirac()?;
        Ok((dp, dirac::solve_u(dp, lambda, self.settings.tol, false, true)?))
    }

    /// ||U(., lambda)(1, 0)^t|| in L2(0, 1)^2.
    pub fn norming_constant(&self, lambda: C64) -> Result<f64> {
        let (dp, fs) = self.dense(lambda)?;
        Ok(dense_l2(&fs.nodes, lambda, |x| {
            let u = fs.at(dp, x);
            u.0[0][0].norm_sqr() + u.0[1][0].norm_sqr()
        }))
    }

    /// Fills in norming constants and the outside-theorem flag.
    pub fn norming_constants(&self, eigs: &mut [LabeledEigenvalue]) -> Result<()> {
        let real = self.original.is_real();
        let vals: Vec<f64> = eigs.par_iter().map(|e| self.norming_constant(e.lambda)).collect::<Result<_>>()?;
        for (e, a) in eigs.iter_mut().zip(vals) {
            e.norming = Some(a);
            e.outside_theorem = !(real && e.multiplicity == 1 && e.lambda.im.abs() <= 1e-8 * (1.0 + e.lambda.norm()));
        }
        Ok(())
    }

    /// ||u2(., lambda) - sin(lambda x - P(x))|| in L2(0, 1).
    pub fn eigenfunction_remainder(&self, lambda: C64) -> Result<f64> {
        let (dp, fs) = self.dense(lambda)?;
        Ok(dense_l2(&fs.nodes, lambda, |x| {
            let u2 = fs.at(dp, x).0[1][0];
            (u2 - (lambda * x - self.original.p.integral(x)).sin()).norm_sqr()
        }))
    }

    pub fn eigenfunction_asymptotics(&self, eigs: &[LabeledEigenvalue]) -> Result<Vec<(i64, f64)>> {
        eigs.par_iter().map(|e| Ok((e.n, self.eigenfunction_remainder(e.lambda)?))).collect()
    }
}

/// sqrt of the integral of `f2` over [0, 1], panels between dense nodes
/// refined so that |lambda| h stays below 1/2.
fn dense_l2<F: Fn(f64) -> f64>(nodes: &[f64], lambda: C64, f2: F) -> f64 {
    let g = GaussRule::cached(6);
    let mut s = 0.0;
    for w in nodes.windows(2) {
        let m = ((w[1] - w[0]) * lambda.norm() / 0.5).ceil().max(1.0) as usize;
        for i in 0..m {
            let a = w[0] + (w[1] - w[0]) * i as f64 / m as f64;
            let b = w[0] + (w[1] - w[0]) * (i + 1) as f64 / m as f64;
            s += g.integrate(a, b, |x| c64(f2(x))).re;
        }
    }
    s.sqrt()
}

/// Chain of eigen- and associated functions y_j = (1/j!) d^j y / d lambda^j.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport {
    pub lambda: C64,
    pub m: usize,
    /// Sup over x of the integrated chain equations for j = 0..m-1,
    /// relative to max |y_0|.
    pub residuals: Vec<f64>,
    /// Boundary defects at x = 1 for j = 0..m-1.
    pub boundary_defects: Vec<f64>,
    /// Boundary defect of y_m (nonzero when the order is exactly m).
    pub next_defect: f64,
}

pub fn associated_chain(problem: &Problem, lambda: C64, m: usize, tol: f64) -> Result<ChainReport> {
    if !(1..=3).contains(&m) {
        return Err(Error::Domain("chain length must be 1, 2 or 3".into()));
    }
    let dp = dirac::qd_only(problem);
    let [y, y1] = dirac::qd_solution::<4>(&dp, lambda, tol)?;
    let bd = match problem.bc {
        BoundaryCondition::Dirichlet => y,
        BoundaryCondition::Mixed { h } => y1 + y * h,
    };
    let level = (0..=12).find(|&l| dp.base_cell_count() << l >= 8192).unwrap_or(12);
    let (cells, nodes) = dirac::qd_nodes::<4>(&dp, lambda, level);
    let scale = nodes.iter().map(|n| n[0].0[0].norm()).fold(1.0, f64::max);
    let defects: Vec<f64> = (0..=m).map(|j| bd.0[j].norm() / scale).collect();
    if defects[m - 1] > CHAIN_TOL {
        return Err(Error::OrderLessThan { m, last: m - 1, defect: defects[m - 1] });
    }
    let mut residuals = vec![0.0f64; m];
    for j in 0..m {
        let (mut r1, mut r2) = (c64(0.0), c64(0.0));
        let mut sup: f64 = 0.0;
        for (i, c) in cells.iter().enumerate() {
            let (a, b) = (&nodes[i], &nodes[i + 1]);
            let avg = |k: usize, comp: usize| (a[comp].0[k] + b[comp].0[k]) * 0.5;
            let h = c64(c.h);
            r1 += b[0].0[j] - a[0].0[j] - h * avg(j, 1) - c.ir * avg(j, 0);
            let mut rhs = -c.ir * avg(j, 1) - c.ir2 * avg(j, 0) + (lambda * c.ip * 2.0 - lambda * lambda * h) * avg(j, 0);
            if j >= 1 {
                rhs += (c.ip * 2.0 - lambda * h * 2.0) * avg(j - 1, 0);
            }
            if j >= 2 {
                rhs -= h * avg(j - 2, 0);
            }
            r2 += b[1].0[j] - a[1].0[j] - rhs;
            sup = sup.max(r1.norm() + r2.norm());
        }
        residuals[j] = sup / scale;
    }
    Ok(ChainReport { lambda, m, residuals, boundary_defects: defects[..m].to_vec(), next_defect: defects[m] })
}
