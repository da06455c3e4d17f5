//! Finite-difference reference for the pencil lambda^2 - lambda A1 - A0,
//! A0 ~ -d^2/dx^2 + q, A1 = 2 diag(p), solved through a dense companion
//! linearization.

use crate::error::{Error, Result};
use crate::potentials::{BoundaryCondition, Problem};
use crate::spectrum::{SpectralSolver, SpectrumOptions};
use faer::complex_native::c64;
use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

pub const MAX_M: usize = 2000;

#[derive(Clone, Debug)]
pub struct DiscretePencil {
    pub m: usize,
    pub h: f64,
    /// A0 as a tridiagonal matrix.
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    pub upper: Vec<C64>,
    /// Diagonal of A1.
    pub a1: Vec<C64>,
}

impl DiscretePencil {
    pub fn a0_dense(&self) -> Vec<Vec<C64>> {
        let m = self.m;
        let mut a = vec![vec![C64::new(0.0, 0.0); m]; m];
        for i in 0..m {
            a[i][i] = self.diag[i];
            if i + 1 < m {
                a[i][i + 1] = self.upper[i];
                a[i + 1][i] = self.lower[i];
            }
        }
        a
    }

    fn is_real(&self) -> bool {
        [&self.lower, &self.diag, &self.upper, &self.a1].iter().all(|v| v.iter().all(|z| z.im == 0.0))
    }
}

/// Nodes x_i = i h, i = 1..M, h = 1/(M+1). q enters through dual-cell
/// averages (r(x_i + h/2) - r(x_i - h/2)) / h, so a step of size kappa in r
/// adds kappa/h at the nearest node.
pub fn build_pencil(problem: &Problem, m: usize) -> Result<DiscretePencil> {
    if m < 3 || m > MAX_M {
        return Err(Error::Domain(format!("grid size must be in 3..={MAX_M}")));
    }
    if !problem.r.log_centers().is_empty() {
        return Err(Error::UnsupportedTerm("logarithmic term in r has no finite-difference treatment".into()));
    }
    let h = 1.0 / (m as f64 + 1.0);
    let ih2 = 1.0 / (h * h);
    let mut diag = Vec::with_capacity(m);
    let mut a1 = Vec::with_capacity(m);
    for i in 1..=m {
        let x = i as f64 * h;
        let q = (problem.r.evaluate(x + 0.5 * h)? - problem.r.evaluate(x - 0.5 * h)?) / h;
        diag.push(C64::new(2.0 * ih2, 0.0) + q);
        let p = problem.p.evaluate(x)?;
        if !p.is_finite() {
            return Err(Error::SingularPoint(x));
        }
        a1.push(2.0 * p);
    }
    let mut lower = vec![C64::new(-ih2, 0.0); m - 1];
    let upper = vec![C64::new(-ih2, 0.0); m - 1];
    if let BoundaryCondition::Mixed { h: hb } = problem.bc {
        // y' - r y + hb y = 0 at x = 1 with the one-sided difference
        // (3 y_{M+1} - 4 y_M + y_{M-1}) / (2h); eliminate y_{M+1}.
        let beta = 3.0 + 2.0 * h * (hb - problem.r.evaluate(1.0)?);
        if beta.norm() < 1e-12 {
            return Err(Error::Domain("degenerate boundary row".into()));
        }
        diag[m - 1] -= 4.0 * ih2 / beta;
        lower[m - 2] += ih2 / beta;
    }
    Ok(DiscretePencil { m, h, lower, diag, upper, a1 })
}

fn to_c64(z: C64) -> c64 {
    c64::new(z.re, z.im)
}

fn eig(mat: impl Fn(usize, usize) -> C64, n: usize, real: bool) -> Result<Vec<C64>> {
    let out: Vec<C64> = if real {
        let a = Mat::<f64>::from_fn(n, n, |i, j| mat(i, j).re);
        a.eigenvalues::<c64>().into_iter().map(|z| C64::new(z.re, z.im)).collect()
    } else {
        let a = Mat::<c64>::from_fn(n, n, |i, j| to_c64(mat(i, j)));
        a.complex_eigenvalues().into_iter().map(|z| C64::new(z.re, z.im)).collect()
    };
    if out.len() != n || out.iter().any(|z| !z.is_finite()) {
        return Err(Error::Eigensolver("non-finite companion eigenvalues".into()));
    }
    Ok(out)
}

fn a0_entry(dp: &DiscretePencil, i: usize, j: usize) -> C64 {
    if i == j {
        dp.diag[i]
    } else if j == i + 1 {
        dp.upper[i]
    } else if i == j + 1 {
        dp.lower[j]
    } else {
        C64::new(0.0, 0.0)
    }
}

/// All 2M eigenvalues of [[0, I], [A0, A1]] acting on (y, lambda y).
pub fn pencil_eigenvalues(dp: &DiscretePencil) -> Result<Vec<C64>> {
    let m = dp.m;
    let f = |i: usize, j: usize| -> C64 {
        match (i < m, j < m) {
            (true, true) => C64::new(0.0, 0.0),
            (true, false) => C64::new(if j - m == i { 1.0 } else { 0.0 }, 0.0),
            (false, true) => a0_entry(dp, i - m, j),
            (false, false) => {
                if i == j {
                    dp.a1[i - m]
                } else {
                    C64::new(0.0, 0.0)
                }
            }
        }
    };
    eig(f, 2 * m, dp.is_real())
}

/// Same spectrum from [[A1, A0], [I, 0]] acting on (lambda y, y).
pub fn second_companion_eigenvalues(dp: &DiscretePencil) -> Result<Vec<C64>> {
    let m = dp.m;
    let f = |i: usize, j: usize| -> C64 {
        match (i < m, j < m) {
            (true, true) => {
                if i == j {
                    dp.a1[i]
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            (true, false) => a0_entry(dp, i, j - m),
            (false, true) => C64::new(if i - m == j { 1.0 } else { 0.0 }, 0.0),
            (false, false) => C64::new(0.0, 0.0),
        }
    };
    eig(f, 2 * m, dp.is_real())
}

/// For each target the nearest eigenvalue.
pub fn nearest(eigs: &[C64], targets: &[C64]) -> Vec<C64> {
    targets
        .iter()
        .map(|t| *eigs.iter().min_by(|a, b| (*a - t).norm().total_cmp(&(*b - t).norm())).unwrap())
        .collect()
}

/// Extrapolates values at step sizes `hs` to h = 0 assuming an expansion in
/// even powers of h (Neville).
pub fn richardson(hs: &[f64], vals: &[C64]) -> C64 {
    let n = hs.len();
    let mut t: Vec<C64> = vals.to_vec();
    for k in 1..n {
        for i in (k..n).rev() {
            let (a, b) = (hs[i - k] * hs[i - k], hs[i] * hs[i]);
            t[i] = (t[i] * a - t[i - 1] * b) / (a - b);
        }
    }
    t[n - 1]
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub n: i64,
    pub m: usize,
    pub solver: C64,
    pub oracle: C64,
    pub diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub n: i64,
    pub extrapolated: C64,
    pub extrapolated_diff: f64,
    /// log2-type slope from the two finest grids.
    pub observed_order: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleTable {
    pub rows: Vec<OracleRow>,
    pub summary: Vec<OracleSummary>,
}

impl OracleTable {
    pub fn max_diff(&self, m: usize) -> f64 {
        self.rows.iter().filter(|r| r.m == m).map(|r| r.diff).fold(0.0, f64::max)
    }

    pub fn max_extrapolated_diff(&self) -> f64 {
        self.summary.iter().map(|s| s.extrapolated_diff).fold(0.0, f64::max)
    }

    pub fn min_order(&self) -> f64 {
        self.summary.iter().map(|s| s.observed_order).fold(f64::INFINITY, f64::min)
    }
}

/// Solver eigenvalues for n in [n_min, n_max] against the finite-difference
/// pencil on each grid of `m_list` (increasing).
pub fn oracle_compare(solver: &SpectralSolver, n_min: i64, n_max: i64, m_list: &[usize]) -> Result<OracleTable> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("M list must be non-empty and strictly increasing".into()));
    }
    let spec = solver.compute_spectrum(n_min, n_max, SpectrumOptions::default())?;
    let targets: Vec<C64> = spec.eigenvalues.iter().map(|e| e.lambda).collect();
    let per_m: Vec<Vec<C64>> = m_list
        .par_iter()
        .map(|&m| {
            let dp = build_pencil(solver.problem(), m)?;
            Ok(nearest(&pencil_eigenvalues(&dp)?, &targets))
        })
        .collect::<Result<_>>()?;
    let hs: Vec<f64> = m_list.iter().map(|&m| 1.0 / (m as f64 + 1.0)).collect();
    let mut rows = Vec::new();
    for (k, &m) in m_list.iter().enumerate() {
        for (e, &o) in spec.eigenvalues.iter().zip(&per_m[k]) {
            rows.push(OracleRow { n: e.n, m, solver: e.lambda, oracle: o, diff: (e.lambda - o).norm() });
        }
    }
    let mut summary = Vec::new();
    for (i, e) in spec.eigenvalues.iter().enumerate() {
        let vals: Vec<C64> = per_m.iter().map(|v| v[i]).collect();
        let extrapolated = richardson(&hs, &vals);
        let l = vals.len();
        let observed_order = if l >= 2 {
            let (d1, d2) = ((vals[l - 2] - e.lambda).norm(), (vals[l - 1] - e.lambda).norm());
            (d1 / d2).ln() / (hs[l - 2] / hs[l - 1]).ln()
        } else {
            f64::NAN
        };
        summary.push(OracleSummary {
            n: e.n,
            extrapolated,
            extrapolated_diff: (extrapolated - e.lambda).norm(),
            observed_order,
        });
    }
    Ok(OracleTable { rows, summary })
}
