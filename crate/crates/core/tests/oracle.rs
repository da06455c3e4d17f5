mod common;

use common::{c, random_problem};
use edsl::dirac::Settings;
use edsl::oracle::{build_pencil, oracle_compare, pencil_eigenvalues};
use edsl::potentials::{BoundaryCondition, Potential, PotentialTerm, Problem};
use edsl::spectrum::SpectralSolver;
use std::f64::consts::PI;

#[test]
fn random_smooth_problem_matches_oracle() {
    let pr = random_problem(11, 3, BoundaryCondition::Dirichlet);
    let s = SpectralSolver::new(&pr, Settings::default()).unwrap();
    let tab = oracle_compare(&s, -8, 8, &[200, 400, 800]).unwrap();
    // the n = 8 truncation error of the three-point stencil is (8 pi)^3 h^2 / 24
    let h = 1.0 / 801.0;
    assert!(tab.max_diff(800) < 1.1 * (8.0 * PI).powi(3) * h * h / 24.0, "{}", tab.max_diff(800));
    assert!(tab.max_extrapolated_diff() < 1e-5, "{}", tab.max_extrapolated_diff());
    for r in &tab.summary {
        assert!((r.observed_order - 2.0).abs() < 0.05, "{r:?}");
    }
}

#[test]
fn delta_refinement() {
    let r = Potential::new(vec![PotentialTerm::step(0.5, c(2.0, 0.0)).unwrap()]);
    let pr = Problem::new(Potential::zero(), r, BoundaryCondition::Dirichlet);
    let s = SpectralSolver::new(&pr, Settings::default()).unwrap();
    let aligned = oracle_compare(&s, -5, 5, &[199, 399, 799]).unwrap();
    assert!(aligned.min_order() >= 1.5, "{}", aligned.min_order());
    assert!(aligned.max_extrapolated_diff() < 1e-6);
    // delta between nodes: still converges to the same eigenvalues
    let even = oracle_compare(&s, -5, 5, &[200, 800]).unwrap();
    assert!(even.max_diff(800) < 0.5 * even.max_diff(200));
}

#[test]
fn zero_potentials_leave_only_truncation_error() {
    let pr = Problem::new(Potential::zero(), Potential::zero(), BoundaryCondition::Dirichlet);
    let s = SpectralSolver::new(&pr, Settings::default()).unwrap();
    let tab = oracle_compare(&s, -4, 4, &[150]).unwrap();
    let h = 1.0 / 151.0;
    for r in &tab.rows {
        let fd = 2.0 / h * (r.n.abs() as f64 * PI * h / 2.0).sin();
        assert!((r.diff - (PI * r.n.abs() as f64 - fd)).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn p_zero_pencil_is_square_root_of_a0() {
    let r = Potential::new(vec![PotentialTerm::poly(vec![c(0.0, 0.0), c(1.5, 0.0), c(-0.7, 0.0)])]);
    let pr = Problem::new(Potential::zero(), r, BoundaryCondition::Dirichlet);
    let dp = build_pencil(&pr, 40).unwrap();
    let eigs = pencil_eigenvalues(&dp).unwrap();
    // A0 symmetric tridiagonal: check lambda^2 against its characteristic polynomial
    for z in eigs {
        let mu = z * z;
        let (mut d0, mut d1) = (c(1.0, 0.0), dp.diag[0] - mu);
        for i in 1..dp.m {
            let d2 = (dp.diag[i] - mu) * d1 - dp.lower[i - 1] * dp.upper[i - 1] * d0;
            d0 = d1;
            d1 = d2;
            let s = d1.norm().max(1.0);
            d0 /= s;
            d1 /= s;
        }
        assert!(d1.norm() < 1e-6 * (1.0 + mu.norm()), "{z} {}", d1.norm());
    }
}
