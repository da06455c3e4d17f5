//! Truncated principal-value products over the eigenvalues, compared with
//! the characteristic functions.
//!
//! Pairing maps (each pair is multiplied before accumulating):
//! Dirichlet: (n, -n), n = 1..N, weight -(pi n)^2.
//! Mixed, generic: (n, -n-1), n = 0..N, weight -(pi (n + 1/2))^2.
//! Mixed, p0 = pi/2 + pi l: mu_0 alone, then (n, -n), n = 1..N, weight
//! -(pi n)^2.

use crate::error::{Error, Result};
use crate::potentials::BoundaryCondition;
use crate::spectrum::{LabeledEigenvalue, SpectralSolver, SpectrumReport};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

pub const EPS_CASE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    Generic,
    /// p0 = pi l (Dirichlet)
    PiL(i64),
    /// p0 = pi/2 + pi l (mixed)
    HalfPiL(i64),
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseTag::Generic => write!(f, "generic"),
            CaseTag::PiL(l) => write!(f, "p0=pi*{l}"),
            CaseTag::HalfPiL(l) => write!(f, "p0=pi/2+pi*{l}"),
        }
    }
}

pub fn case_tag(p0: C64, bc: BoundaryCondition) -> CaseTag {
    let offset = match bc {
        BoundaryCondition::Dirichlet => 0.0,
        BoundaryCondition::Mixed { .. } => 0.5 * PI,
    };
    let l = ((p0.re - offset) / PI).round();
    if (p0 - C64::new(offset + PI * l, 0.0)).norm() < EPS_CASE {
        match bc {
            BoundaryCondition::Dirichlet => CaseTag::PiL(l as i64),
            BoundaryCondition::Mixed { .. } => CaseTag::HalfPiL(l as i64),
        }
    } else {
        CaseTag::Generic
    }
}

/// Eigenvalues by label.
pub type Labels = HashMap<i64, C64>;

pub fn labels(eigs: &[LabeledEigenvalue]) -> Labels {
    eigs.iter().map(|e| (e.n, e.lambda)).collect()
}

fn get(eig: &Labels, n: i64) -> Result<C64> {
    eig.get(&n).copied().ok_or(Error::MissingIndex(n))
}

/// prod_{0<|n|<=N} (lambda_n - lambda) / (pi n).
pub fn vp_product_dirichlet(lambda: C64, eig: &Labels, n: usize, _p0: C64) -> Result<C64> {
    let mut acc = C64::new(1.0, 0.0);
    for k in 1..=n as i64 {
        let w = -(PI * k as f64).powi(2);
        acc *= (get(eig, k)? - lambda) * (get(eig, -k)? - lambda) / w;
    }
    Ok(acc)
}

/// Truncated product for psi with the pairing selected by the case tag.
pub fn vp_product_mixed(mu: C64, eig: &Labels, n: usize, p0: C64) -> Result<C64> {
    let mut acc = C64::new(1.0, 0.0);
    match case_tag(p0, BoundaryCondition::Mixed { h: C64::new(0.0, 0.0) }) {
        CaseTag::HalfPiL(_) => {
            acc *= get(eig, 0)? - mu;
            for k in 1..=n as i64 {
                let w = -(PI * k as f64).powi(2);
                acc *= (get(eig, k)? - mu) * (get(eig, -k)? - mu) / w;
            }
        }
        _ => {
            for k in 0..=n as i64 {
                let w = -(PI * (k as f64 + 0.5)).powi(2);
                acc *= (get(eig, k)? - mu) * (get(eig, -k - 1)? - mu) / w;
            }
        }
    }
    Ok(acc)
}

pub fn vp_product(lambda: C64, eig: &Labels, n: usize, p0: C64, bc: BoundaryCondition) -> Result<C64> {
    match bc {
        BoundaryCondition::Dirichlet => vp_product_dirichlet(lambda, eig, n, p0),
        BoundaryCondition::Mixed { .. } => vp_product_mixed(lambda, eig, n, p0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProductRow {
    pub lambda: C64,
    pub n: usize,
    pub product: C64,
    pub reference: C64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductDiagnostics {
    pub case: CaseTag,
    pub rows: Vec<ProductRow>,
    /// (N, prod over 0<|n|<=N of lambda_n / (pi n)); for mixed conditions
    /// mu_n / (pi (n + 1/2)) with the generic pairing.
    pub prod1: Vec<(usize, C64)>,
    /// (r, prod (lambda_n - z) / (nu_n - z)) at z = r e^{i pi/3}, nu_n the
    /// leading asymptotic term.
    pub prod2: Vec<(f64, C64)>,
}

pub const PROD2_RADII: [f64; 3] = [10.0, 20.0, 40.0];

/// Compares truncated products with phi/psi at the test points for every
/// N in `n_list` (strictly increasing, covered by `spectrum`).
pub fn product_report(
    solver: &SpectralSolver,
    spectrum: &SpectrumReport,
    tests: &[C64],
    n_list: &[usize],
) -> Result<ProductDiagnostics> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("N list must be non-empty and strictly increasing".into()));
    }
    let bc = solver.problem().bc;
    let p0 = spectrum.p0;
    let eig = labels(&spectrum.eigenvalues);
    let references: Vec<C64> = tests.par_iter().map(|&z| solver.reference_charfn(z)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (&z, &reference) in tests.iter().zip(&references) {
        for &n in n_list {
            let product = vp_product(z, &eig, n, p0, bc)?;
            let rel_error = (product - reference).norm() / reference.norm().max(f64::MIN_POSITIVE);
            rows.push(ProductRow { lambda: z, n, product, reference, rel_error });
        }
    }
    let mut prod1 = Vec::new();
    for &n in n_list {
        let mut acc = C64::new(1.0, 0.0);
        for k in 1..=n as i64 {
            acc *= match bc {
                BoundaryCondition::Dirichlet => get(&eig, k)? * get(&eig, -k)? / -(PI * k as f64).powi(2),
                BoundaryCondition::Mixed { .. } => {
                    get(&eig, k - 1)? * get(&eig, -k)? / -(PI * (k as f64 - 0.5)).powi(2)
                }
            };
        }
        prod1.push((n, acc));
    }
    let nmax = *n_list.last().unwrap() as i64;
    let nu = |k: i64| match bc {
        BoundaryCondition::Dirichlet => C64::new(PI * k as f64, 0.0) + p0,
        BoundaryCondition::Mixed { .. } => C64::new(PI * (k as f64 + 0.5), 0.0) + p0,
    };
    let indices: Vec<i64> = match bc {
        BoundaryCondition::Dirichlet => (-nmax..=nmax).filter(|&k| k != 0).collect(),
        BoundaryCondition::Mixed { .. } => (-nmax - 1..=nmax).collect(),
    };
    let mut prod2 = Vec::new();
    for r in PROD2_RADII {
        let z = C64::from_polar(r, PI / 3.0);
        let mut acc = C64::new(1.0, 0.0);
        for &k in &indices {
            acc *= (get(&eig, k)? - z) / (nu(k) - z);
        }
        prod2.push((r, acc));
    }
    Ok(ProductDiagnostics { case: case_tag(p0, bc), rows, prod1, prod2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Closed-form spectra for p = cst, r = 0: lambda = cst +- sqrt(cst^2 + k^2)
    /// with k = pi n (Dirichlet) or pi (n + 1/2) (mixed, h = 0).
    fn constant_p_labels(cst: C64, n: i64, mixed: bool) -> Labels {
        let mut m = Labels::new();
        for k in 1..=n + 1 {
            let kk = if mixed { PI * (k as f64 - 0.5) } else { PI * k as f64 };
            let d = (cst * cst + kk * kk).sqrt();
            if mixed {
                m.insert(k - 1, cst + d);
                m.insert(-k, cst - d);
            } else {
                m.insert(k, cst + d);
                m.insert(-k, cst - d);
            }
        }
        m
    }

    #[test]
    fn case_tags() {
        let d = BoundaryCondition::Dirichlet;
        let mx = BoundaryCondition::Mixed { h: c(0.0, 0.0) };
        assert_eq!(case_tag(c(PI, 0.0), d), CaseTag::PiL(1));
        assert_eq!(case_tag(c(0.0, 0.0), d), CaseTag::PiL(0));
        assert_eq!(case_tag(c(PI + 1e-6, 0.0), d), CaseTag::Generic);
        assert_eq!(case_tag(c(PI / 2.0, 0.0), mx), CaseTag::HalfPiL(0));
        assert_eq!(case_tag(c(-PI / 2.0, 0.0), mx), CaseTag::HalfPiL(-1));
        assert_eq!(case_tag(c(PI / 2.0, 0.1), mx), CaseTag::Generic);
    }

    #[test]
    fn free_products() {
        let mut eig = Labels::new();
        for k in 1..=20000i64 {
            eig.insert(k, c(PI * k as f64, 0.0));
            eig.insert(-k, c(-PI * k as f64, 0.0));
        }
        let v = vp_product_dirichlet(c(PI / 2.0, 0.0), &eig, 10000, c(0.0, 0.0)).unwrap();
        assert!((v - 2.0 / PI).norm() < 1e-4);
        assert_eq!(vp_product_dirichlet(c(PI, 0.0), &eig, 5, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(matches!(vp_product_dirichlet(c(1.0, 0.0), &eig, 20001, c(0.0, 0.0)), Err(Error::MissingIndex(20001))));
        let mut mix = Labels::new();
        for k in -4097..=4096i64 {
            mix.insert(k, c(PI * (k as f64 + 0.5), 0.0));
        }
        let v = vp_product_mixed(c(0.0, 0.0), &mix, 4096, c(0.0, 0.0)).unwrap();
        assert!((v - 1.0).norm() < 1e-3);
        assert_eq!(vp_product_mixed(c(PI / 2.0, 0.0), &mix, 10, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn constant_p_products_converge_with_plus_sign() {
        // phi = sin k / k, psi = cos k with k^2 = lambda^2 - 2 c lambda
        for cst in [c(0.3, 0.0), c(PI, 0.0), c(0.4, 0.2)] {
            let eig = constant_p_labels(cst, 4100, false);
            for &z in &[c(1.0, 1.0), c(-2.0, 0.5)] {
                let k = (z * z - 2.0 * cst * z).sqrt();
                let exact = k.sin() / k;
                let e64 = (vp_product_dirichlet(z, &eig, 64, cst).unwrap() - exact).norm();
                let e1k = (vp_product_dirichlet(z, &eig, 1024, cst).unwrap() - exact).norm();
                assert!(e1k < e64 && e1k < 1e-2 * exact.norm(), "{cst} {z} {e64} {e1k}");
            }
        }
        for cst in [c(0.3, 0.0), c(PI / 2.0, 0.0)] {
            let eig = constant_p_labels(cst, 4100, true);
            for &z in &[c(0.0, 0.7), c(1.5, -0.5)] {
                let exact = (z * z - 2.0 * cst * z).sqrt().cos();
                let e64 = (vp_product_mixed(z, &eig, 64, cst).unwrap() - exact).norm();
                let e1k = (vp_product_mixed(z, &eig, 1024, cst).unwrap() - exact).norm();
                assert!(e1k < e64 && e1k < 1e-2 * exact.norm(), "{cst} {z} {e64} {e1k}");
            }
        }
    }
}
