#![allow(dead_code)]

use edsl::potentials::{BoundaryCondition, Potential, PotentialTerm, Problem};
use edsl::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Real bandlimited p and q = r' with modes up to `k`, each scaled to unit
/// L2 norm on (0, 1).
pub fn random_problem(seed: u64, k: usize, bc: BoundaryCondition) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let (p0, pa, pb) = (draw(1)[0], draw(k), draw(k));
    let pn = (p0 * p0 + pa.iter().chain(&pb).map(|a| a * a / 2.0).sum::<f64>()).sqrt();
    // q = q0 + sum 2 pi j (-c_j sin + d_j cos) from r = q0 x + sum c_j cos + d_j sin
    let (q0, rc, rd) = (draw(1)[0], draw(k), draw(k));
    let qn = (q0 * q0
        + rc.iter().chain(&rd).enumerate().map(|(i, a)| (2.0 * PI * ((i % k) + 1) as f64 * a).powi(2) / 2.0).sum::<f64>())
    .sqrt();
    let cv = |v: &[f64], s: f64| v.iter().map(|a| c(a / s, 0.0)).collect::<Vec<_>>();
    let p = Potential::new(vec![PotentialTerm::constant(c(p0 / pn, 0.0)), PotentialTerm::trig(cv(&pa, pn), cv(&pb, pn))]);
    let r = Potential::new(vec![PotentialTerm::poly(vec![c(0.0, 0.0), c(q0 / qn, 0.0)]), PotentialTerm::trig(cv(&rc, qn), cv(&rd, qn))]);
    Problem::new(p, r, bc)
}
