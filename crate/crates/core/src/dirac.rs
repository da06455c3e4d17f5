//! Fundamental matrix of the Dirac system J U' + P U = lambda U, U(0) = I,
//! with P = [[0, -v], [-v, 2p]], and the characteristic functions.
//!
//! The integrator works on a fixed family of meshes: a base mesh split at
//! every break point (graded toward log centers), refined uniformly by
//! level. On each cell the coefficient matrix is replaced by its cell
//! integral and exponentiated exactly; the resulting symmetric second-order
//! scheme is extrapolated across levels (Romberg). Derivatives in lambda
//! are obtained by running the same scheme on truncated Taylor jets.

use crate::error::{Error, Result};
use crate::linalg::{CMat2, Jet, Mat2, Scalar};
use crate::miura::{self, MiuraPotential, SeedPolicy};
use crate::potentials::{sorted_unique, BoundaryCondition, Potential, Problem};
use crate::quadrature::{self, GaussRule};
use num_complex::Complex64 as C64;
use std::sync::{Arc, OnceLock};

pub const MAX_LEVEL: usize = 15;
const CACHED_LEVELS: usize = 13;
const BASE_WIDTH: f64 = 1.0 / 16.0;
const GRADING_DEPTH: i32 = 34;
const MAX_COLUMNS: usize = 4;

fn c64(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Integrals of the coefficients over one cell.
#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub x0: f64,
    pub h: f64,
    /// int p
    pub ip: C64,
    /// int v
    pub iv: C64,
    /// int r
    pub ir: C64,
    /// int r^2
    pub ir2: C64,
}

pub struct DiracPotential {
    p: Potential,
    miura: MiuraPotential,
    base: Vec<(f64, f64)>,
    log_centers: Vec<f64>,
    levels: Vec<OnceLock<Arc<Vec<Cell>>>>,
}

impl std::fmt::Debug for DiracPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiracPotential")
            .field("base_cells", &self.base.len())
            .field("c", &self.miura.c())
            .field("h1", &self.miura.h1())
            .finish()
    }
}

fn base_mesh(knots: &[f64], centers: &[f64]) -> Vec<(f64, f64)> {
    let is_center = |x: f64| centers.iter().any(|c| (c - x).abs() < 1e-15);
    let mut cells = Vec::new();
    let uniform = |a: f64, b: f64, cells: &mut Vec<(f64, f64)>| {
        let n = ((b - a) / BASE_WIDTH).ceil().max(1.0) as usize;
        for i in 0..n {
            let lo = a + (b - a) * i as f64 / n as f64;
            let hi = if i + 1 == n { b } else { a + (b - a) * (i + 1) as f64 / n as f64 };
            cells.push((lo, hi));
        }
    };
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let (ga, gb) = (is_center(a), is_center(b));
        let mid = 0.5 * (a + b);
        let graded_left = |a: f64, m: f64, cells: &mut Vec<(f64, f64)>| {
            // points a + (m - a) 2^-j, j = 1..depth
            let mut pts: Vec<f64> = (1..=GRADING_DEPTH).rev().map(|j| a + (m - a) * 2f64.powi(-j)).collect();
            pts.insert(0, a);
            for w in pts.windows(2) {
                cells.push((w[0], w[1]));
            }
            *pts.last().unwrap()
        };
        match (ga, gb) {
            (false, false) => uniform(a, b, &mut cells),
            (true, false) => {
                let e = graded_left(a, mid, &mut cells);
                uniform(e, b, &mut cells);
            }
            (false, true) => {
                let mut right = Vec::new();
                let mut pts: Vec<f64> = (1..=GRADING_DEPTH).rev().map(|j| b - (b - mid) * 2f64.powi(-j)).collect();
                pts.insert(0, b);
                for w in pts.windows(2) {
                    right.push((w[1], w[0]));
                }
                uniform(a, *pts.last().unwrap(), &mut cells);
                right.reverse();
                cells.extend(right);
            }
            (true, true) => {
                let e = graded_left(a, mid, &mut cells);
                uniform(e, mid, &mut cells);
                let mut pts: Vec<f64> = (1..=GRADING_DEPTH).rev().map(|j| b - (b - mid) * 2f64.powi(-j)).collect();
                pts.insert(0, b);
                let mut right = Vec::new();
                for w in pts.windows(2) {
                    right.push((w[1], w[0]));
                }
                uniform(mid, *pts.last().unwrap(), &mut cells);
                right.reverse();
                cells.extend(right);
            }
        }
    }
    cells.retain(|(lo, hi)| hi > lo);
    cells
}

impl DiracPotential {
    pub fn new(p: &Potential, miura: MiuraPotential) -> Self {
        let mut knots = vec![0.0, 1.0];
        knots.extend(p.singular_set());
        knots.extend(miura.singular_set());
        let knots = sorted_unique(knots.into_iter().filter(|x| (0.0..=1.0).contains(x)).collect());
        let mut centers = p.log_centers();
        centers.extend(miura.r().log_centers());
        let centers = sorted_unique(centers);
        let base = base_mesh(&knots, &centers);
        DiracPotential {
            p: p.clone(),
            miura,
            base,
            log_centers: centers,
            levels: (0..CACHED_LEVELS).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn p(&self) -> &Potential {
        &self.p
    }

    pub fn miura(&self) -> &MiuraPotential {
        &self.miura
    }

    pub fn base_cell_count(&self) -> usize {
        self.base.len()
    }

    /// P(x) = int_0^x p
    pub fn p_integral(&self, x: f64) -> C64 {
        self.p.integral(x)
    }

    pub fn v(&self, x: f64) -> Result<C64> {
        self.miura.v(x)
    }

    /// Q(x) = [[-p, -v], [-v, p]]
    pub fn q_matrix(&self, x: f64) -> Result<CMat2> {
        let p = self.p.evaluate(x)?;
        let v = self.v(x)?;
        Ok(Mat2::new(-p, -v, -v, p))
    }

    /// P(x) = [[0, -v], [-v, 2p]]
    pub fn p_matrix(&self, x: f64) -> Result<CMat2> {
        let p = self.p.evaluate(x)?;
        let v = self.v(x)?;
        Ok(Mat2::new(c64(0.0), -v, -v, p * 2.0))
    }

    /// Points where p or v are not smooth.
    pub fn singular_set(&self) -> Vec<f64> {
        let mut s = self.p.singular_set();
        s.extend(self.miura.singular_set());
        sorted_unique(s)
    }

    fn touches_center(&self, a: f64, b: f64) -> bool {
        self.log_centers.iter().any(|&c| (c - a).abs() < 1e-15 || (c - b).abs() < 1e-15)
    }

    fn compute_level(&self, level: usize) -> Vec<Cell> {
        let r = self.miura.r();
        let split = 1usize << level;
        let g = GaussRule::cached(6);
        let mut cells = Vec::with_capacity(self.base.len() * split);
        for &(a, b) in &self.base {
            let mut xl = a;
            let mut pl = self.p.integral(a);
            let mut vl = self.miura.v_integral(a);
            let mut rl = r.integral(a);
            for i in 0..split {
                let xr = if i + 1 == split { b } else { a + (b - a) * (i + 1) as f64 / split as f64 };
                let pr = self.p.integral(xr);
                let vr = self.miura.v_integral(xr);
                let rr = r.integral(xr);
                let ir2 = if self.touches_center(xl, xr) {
                    quadrature::integrate(
                        |x| r.evaluate(x).map(|z| z * z).unwrap_or(c64(0.0)),
                        xl,
                        xr,
                        &[],
                        1e-16,
                    )
                    .unwrap_or_else(|_| g.integrate(xl, xr, |x| r.evaluate(x).map(|z| z * z).unwrap_or(c64(0.0))))
                } else {
                    g.integrate(xl, xr, |x| r.evaluate(x).map(|z| z * z).unwrap_or(c64(0.0)))
                };
                cells.push(Cell { x0: xl, h: xr - xl, ip: pr - pl, iv: vr - vl, ir: rr - rl, ir2 });
                xl = xr;
                pl = pr;
                vl = vr;
                rl = rr;
            }
        }
        cells
    }

    pub fn cells(&self, level: usize) -> Arc<Vec<Cell>> {
        if level < CACHED_LEVELS {
            self.levels[level].get_or_init(|| Arc::new(self.compute_level(level))).clone()
        } else {
            Arc::new(self.compute_level(level))
        }
    }

    /// Integrals of p and v over [a, b] (used for partial cells).
    fn partial(&self, a: f64, b: f64) -> (C64, C64) {
        (
            self.p.integral(b) - self.p.integral(a),
            self.miura.v_integral(b) - self.miura.v_integral(a),
        )
    }
}

/// Builds the Miura potential with an admissible Prufer seed and assembles
/// the Dirac potential.
pub fn build_dirac(problem: &Problem, seed: &SeedPolicy) -> Result<DiracPotential> {
    let ps = miura::choose_theta0(&problem.r, seed)?;
    let mp = miura::miura_v(ps, &problem.r)?;
    Ok(DiracPotential::new(&problem.p, mp))
}

fn dirac_step<T: Scalar>(ip: C64, iv: C64, h: f64, lam: T) -> Mat2<T> {
    let lh = lam * c64(h);
    Mat2::new(T::cst(-iv), T::cst(ip * 2.0) - lh, lh, T::cst(iv)).exp_traceless()
}

fn qd_step<T: Scalar>(c: &Cell, lam: T) -> Mat2<T> {
    let h = c64(c.h);
    let lower = T::cst(-c.ir2) + lam * (c.ip * 2.0) - lam * lam * h;
    Mat2::new(T::cst(c.ir), T::cst(h), lower, T::cst(-c.ir)).exp_traceless()
}

/// Result of extrapolation across levels.
struct Extrapolated {
    values: Vec<C64>,
    estimate: f64,
    level: usize,
}

/// Romberg extrapolation of level-indexed approximations with error
/// expansion in even powers of the cell size. The first `measured` entries
/// control termination.
fn romberg<F>(mut f: F, measured: usize, tol: f64) -> Result<Extrapolated>
where
    F: FnMut(usize) -> Result<Vec<C64>>,
{
    let mut rows: Vec<Vec<Vec<C64>>> = Vec::new();
    let mut prev_best: Option<Vec<C64>> = None;
    let mut last_est = f64::INFINITY;
    for level in 0..=MAX_LEVEL {
        let base = f(level)?;
        let mut row = vec![base];
        if let Some(prev) = rows.last() {
            let cols = (rows.len()).min(MAX_COLUMNS);
            for j in 1..=cols {
                let fac = 4f64.powi(j as i32) - 1.0;
                let hi = &row[j - 1];
                let lo = &prev[j - 1];
                let next: Vec<C64> = hi.iter().zip(lo).map(|(a, b)| a + (a - b) / fac).collect();
                row.push(next);
            }
        }
        let best = row.last().unwrap().clone();
        if let Some(pb) = &prev_best {
            let scale = best.iter().take(measured).map(|z| z.norm()).fold(1.0, f64::max);
            let est = best
                .iter()
                .zip(pb)
                .take(measured)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
                / scale;
            last_est = est;
            if rows.len() >= 2 && est <= tol {
                return Ok(Extrapolated { values: best, estimate: est, level });
            }
        }
        prev_best = Some(best);
        rows.push(row);
    }
    Err(Error::ToleranceNotReached { achieved: last_est, requested: tol })
}

fn flatten<const N: usize>(v: &[Jet<N>]) -> Vec<C64> {
    // values first, then higher coefficients
    let mut out = Vec::with_capacity(v.len() * N);
    for k in 0..N {
        for j in v {
            out.push(j.0[k]);
        }
    }
    out
}

fn unflatten<const N: usize>(v: &[C64], count: usize) -> Vec<Jet<N>> {
    (0..count)
        .map(|i| {
            let mut c = [c64(0.0); N];
            for (k, ck) in c.iter_mut().enumerate() {
                *ck = v[k * count + i];
            }
            Jet(c)
        })
        .collect()
}

/// (u1(1), u2(1)) for the first column of U, as jets in lambda.
pub fn dirac_column<const N: usize>(dp: &DiracPotential, lam: C64, tol: f64) -> Result<[Jet<N>; 2]> {
    let l = Jet::<N>::var(lam);
    let ex = romberg(
        |level| {
            let cells = dp.cells(level);
            let mut u = [Jet::<N>::one(), Jet::<N>::zero()];
            for c in cells.iter() {
                u = dirac_step(c.ip, c.iv, c.h, l).mul_vec(u);
            }
            Ok(flatten(&u))
        },
        2,
        tol,
    )?;
    let u = unflatten::<N>(&ex.values, 2);
    Ok([u[0], u[1]])
}

/// (y(1), y^[1](1)) for y(0) = 0, y^[1](0) = 1, as jets in lambda.
pub fn qd_solution<const N: usize>(dp: &DiracPotential, lam: C64, tol: f64) -> Result<[Jet<N>; 2]> {
    let l = Jet::<N>::var(lam);
    let ex = romberg(
        |level| {
            let cells = dp.cells(level);
            let mut y = [Jet::<N>::zero(), Jet::<N>::one()];
            for c in cells.iter() {
                y = qd_step(c, l).mul_vec(y);
            }
            Ok(flatten(&y))
        },
        2,
        tol,
    )?;
    let y = unflatten::<N>(&ex.values, 2);
    Ok([y[0], y[1]])
}

/// Quasi-derivative solution with y(0) = 0, y^[1](0) = 1 at every node of
/// the finest level used, as jets (y, y^[1]) together with the cells.
pub fn qd_trace<const N: usize>(
    dp: &DiracPotential,
    lam: C64,
    tol: f64,
) -> Result<(Vec<Cell>, Vec<[Jet<N>; 2]>)> {
    let l = Jet::<N>::var(lam);
    let mut kept: Option<(usize, Vec<[Jet<N>; 2]>)> = None;
    let mut prev: Option<Vec<[Jet<N>; 2]>> = None;
    for level in 0..=MAX_LEVEL {
        let cells = dp.cells(level);
        let mut y = [Jet::<N>::zero(), Jet::<N>::one()];
        let mut nodes = Vec::with_capacity(cells.len() + 1);
        nodes.push(y);
        for c in cells.iter() {
            y = qd_step(c, l).mul_vec(y);
            nodes.push(y);
        }
        if let Some(pv) = &prev {
            // Richardson at the coarse nodes.
            let mut est: f64 = 0.0;
            let mut scale: f64 = 1.0;
            let mut extrap = Vec::with_capacity(pv.len());
            for (i, coarse) in pv.iter().enumerate() {
                let fine = nodes[2 * i];
                let mut e = [Jet::<N>::zero(); 2];
                for k in 0..2 {
                    e[k] = fine[k] + (fine[k] - coarse[k]) * c64(1.0 / 3.0);
                    scale = scale.max(e[k].0[0].norm());
                    est = est.max((fine[k].0[0] - coarse[k].0[0]).norm() / 3.0);
                }
                extrap.push(e);
            }
            if level >= 2 && est <= tol * scale {
                kept = Some((level - 1, extrap));
                break;
            }
        }
        prev = Some(nodes);
    }
    match kept {
        Some((lv, nodes)) => Ok((dp.cells(lv).to_vec(), nodes)),
        None => Err(Error::ToleranceNotReached { achieved: f64::NAN, requested: tol }),
    }
}

/// Unextrapolated quasi-derivative solution jets at every node of `level`.
pub fn qd_nodes<const N: usize>(dp: &DiracPotential, lam: C64, level: usize) -> (Arc<Vec<Cell>>, Vec<[Jet<N>; 2]>) {
    let l = Jet::<N>::var(lam);
    let cells = dp.cells(level);
    let mut y = [Jet::<N>::zero(), Jet::<N>::one()];
    let mut nodes = Vec::with_capacity(cells.len() + 1);
    nodes.push(y);
    for c in cells.iter() {
        y = qd_step(c, l).mul_vec(y);
        nodes.push(y);
    }
    (cells, nodes)
}

/// Potential usable by the quasi-derivative routines only (no Prufer solve).
pub fn qd_only(problem: &Problem) -> DiracPotential {
    DiracPotential::new(&problem.p, MiuraPotential::explicit(&problem.r, Potential::zero()))
}

/// Fundamental matrix with optional lambda-derivative and dense output.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    pub lambda: C64,
    /// U(1, lambda)
    pub end: CMat2,
    /// dU/dlambda (1, lambda)
    pub end_dlambda: Option<CMat2>,
    pub nodes: Vec<f64>,
    pub values: Vec<CMat2>,
    /// max |det U - 1| over returned values
    pub det_drift: f64,
    pub error_estimate: f64,
}

impl FundamentalSolution {
    /// U(x) by exact exponential of the partial cell from the nearest node.
    pub fn at(&self, dp: &DiracPotential, x: f64) -> CMat2 {
        if self.nodes.is_empty() {
            let (ip, iv) = dp.partial(0.0, x);
            return dirac_step(ip, iv, x, self.lambda);
        }
        let i = self.nodes.partition_point(|&t| t <= x).max(1) - 1;
        let x0 = self.nodes[i];
        if x == x0 {
            return self.values[i];
        }
        let (ip, iv) = dp.partial(x0, x);
        dirac_step(ip, iv, x - x0, self.lambda) * self.values[i]
    }
}

fn mat_to_vec<const N: usize>(m: &Mat2<Jet<N>>) -> Vec<Jet<N>> {
    vec![m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]]
}

fn vec_to_mat(v: &[C64]) -> CMat2 {
    Mat2::new(v[0], v[1], v[2], v[3])
}

/// U(x, lambda) solving U' = -J(lambda - P) U, U(0) = I.
pub fn solve_u(
    dp: &DiracPotential,
    lambda: C64,
    tol: f64,
    want_dlambda: bool,
    dense: bool,
) -> Result<FundamentalSolution> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let l = Jet::<2>::var(lambda);
    let measured = 4;
    let ex = romberg(
        |level| {
            let cells = dp.cells(level);
            let mut u = Mat2::<Jet<2>>::identity();
            for c in cells.iter() {
                u = dirac_step(c.ip, c.iv, c.h, l) * u;
            }
            Ok(flatten(&mat_to_vec(&u)))
        },
        measured,
        tol,
    )?;
    let end = vec_to_mat(&ex.values[..4]);
    let end_dlambda = if want_dlambda { Some(vec_to_mat(&ex.values[4..8])) } else { None };
    let mut out = FundamentalSolution {
        lambda,
        end,
        end_dlambda,
        nodes: Vec::new(),
        values: Vec::new(),
        det_drift: (end.det() - 1.0).norm(),
        error_estimate: ex.estimate,
    };
    if dense {
        // two Richardson columns at the nodes of the coarsest of three levels
        let sweep = |level: usize| {
            let cells = dp.cells(level);
            let mut u = CMat2::identity();
            let mut vals = Vec::with_capacity(cells.len() + 1);
            vals.push(u);
            for c in cells.iter() {
                u = dirac_step(c.ip, c.iv, c.h, lambda) * u;
                vals.push(u);
            }
            vals
        };
        let start = ex.level.saturating_sub(2);
        let mut hist: Vec<Vec<CMat2>> = Vec::new();
        let mut done = false;
        for level in start..=MAX_LEVEL {
            hist.push(sweep(level));
            if hist.len() > 3 {
                hist.remove(0);
            }
            if hist.len() < 3 {
                continue;
            }
            let (a, b, c) = (&hist[0], &hist[1], &hist[2]);
            let mut est: f64 = 0.0;
            let mut scale: f64 = 1.0;
            let mut extrap = Vec::with_capacity(a.len());
            for i in 0..a.len() {
                let (ta, tb, tc) = (a[i], b[2 * i], c[4 * i]);
                let t1b = tb + (tb - ta) * c64(1.0 / 3.0);
                let t1c = tc + (tc - tb) * c64(1.0 / 3.0);
                let t2 = t1c + (t1c - t1b) * c64(1.0 / 15.0);
                est = est.max((t2 - t1c).max_abs());
                scale = scale.max(tc.max_abs());
                extrap.push(t2);
            }
            if est <= tol * scale {
                let coarse_cells = dp.cells(level - 2);
                let mut nodes: Vec<f64> = coarse_cells.iter().map(|c| c.x0).collect();
                nodes.push(1.0);
                *extrap.last_mut().unwrap() = end;
                out.det_drift = extrap.iter().map(|m| (m.det() - 1.0).norm()).fold(0.0, f64::max);
                out.nodes = nodes;
                out.values = extrap;
                out.error_estimate = out.error_estimate.max(est / scale);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::ToleranceNotReached { achieved: f64::NAN, requested: tol });
        }
    }
    Ok(out)
}

/// Solver knobs shared by the spectral routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Settings {
    pub tol: f64,
    pub lambda_switch: f64,
    pub seed: SeedPolicy,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol: 1e-10, lambda_switch: 0.5, seed: SeedPolicy::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Dirac,
    QuasiDerivative,
}

/// Characteristic function (phi or psi by boundary condition) as a jet.
pub fn charfn_jet<const N: usize>(
    problem: &Problem,
    dp: &DiracPotential,
    lambda: C64,
    tol: f64,
    branch: Branch,
) -> Result<Jet<N>> {
    match (branch, problem.bc) {
        (Branch::Dirac, BoundaryCondition::Dirichlet) => {
            let [_, u2] = dirac_column::<N>(dp, lambda, tol)?;
            Ok(u2 * Jet::<N>::var(lambda).recip())
        }
        (Branch::Dirac, BoundaryCondition::Mixed { h }) => {
            let [u1, u2] = dirac_column::<N>(dp, lambda, tol)?;
            let k = dp.miura.h1() + h;
            Ok(u1 + u2 * Jet::<N>::var(lambda).recip() * k)
        }
        (Branch::QuasiDerivative, BoundaryCondition::Dirichlet) => {
            let [y, _] = qd_solution::<N>(dp, lambda, tol)?;
            Ok(y)
        }
        (Branch::QuasiDerivative, BoundaryCondition::Mixed { h }) => {
            let [y, y1] = qd_solution::<N>(dp, lambda, tol)?;
            Ok(y1 + y * h)
        }
    }
}

fn pick_branch(lambda: C64, lambda_switch: f64) -> Branch {
    if lambda.norm() < lambda_switch {
        Branch::QuasiDerivative
    } else {
        Branch::Dirac
    }
}

/// Characteristic function with automatic branch choice.
pub fn charfn<const N: usize>(
    problem: &Problem,
    dp: &DiracPotential,
    lambda: C64,
    settings: &Settings,
) -> Result<Jet<N>> {
    charfn_jet::<N>(problem, dp, lambda, settings.tol, pick_branch(lambda, settings.lambda_switch))
}

/// phi(lambda) for Dirichlet conditions (the boundary condition of `problem`
/// is ignored).
pub fn char_dirichlet(problem: &Problem, dp: &DiracPotential, lambda: C64, tol: f64) -> Result<C64> {
    let mut pr = problem.clone();
    pr.bc = BoundaryCondition::Dirichlet;
    Ok(charfn_jet::<1>(&pr, dp, lambda, tol, pick_branch(lambda, 0.5))?.0[0])
}

/// psi(mu) for mixed conditions with parameter h.
pub fn char_mixed(problem: &Problem, dp: &DiracPotential, mu: C64, h: C64, tol: f64) -> Result<C64> {
    let mut pr = problem.clone();
    pr.bc = BoundaryCondition::Mixed { h };
    Ok(charfn_jet::<1>(&pr, dp, mu, tol, pick_branch(mu, 0.5))?.0[0])
}

/// Eigenvector components and boundary residuals on a grid.
#[derive(Clone, Debug)]
pub struct EigenTrace {
    pub x: Vec<f64>,
    pub y: Vec<C64>,
    pub y_quasi: Vec<C64>,
    pub u1: Vec<C64>,
    pub u2: Vec<C64>,
    pub residual_left: f64,
    pub residual_right: f64,
}

pub fn eigenfunction_trace(
    problem: &Problem,
    dp: &DiracPotential,
    lambda: C64,
    grid: &[f64],
    tol: f64,
) -> Result<EigenTrace> {
    let fs = solve_u(dp, lambda, tol, false, true)?;
    let mut tr = EigenTrace {
        x: grid.to_vec(),
        y: Vec::new(),
        y_quasi: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
        residual_left: 0.0,
        residual_right: 0.0,
    };
    for &x in grid {
        let u = fs.at(dp, x);
        let (u1, u2) = (u.0[0][0], u.0[1][0]);
        tr.u1.push(u1);
        tr.u2.push(u2);
        tr.y.push(u2);
        tr.y_quasi.push(lambda * u1 + dp.miura.w(x) * u2);
    }
    let (u1e, u2e) = (fs.end.0[0][0], fs.end.0[1][0]);
    tr.residual_left = 0.0;
    tr.residual_right = match problem.bc {
        BoundaryCondition::Dirichlet => u2e.norm(),
        BoundaryCondition::Mixed { h } => (lambda * u1e + (dp.miura.h1() + h) * u2e).norm(),
    };
    Ok(tr)
}
