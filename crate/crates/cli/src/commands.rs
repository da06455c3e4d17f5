use crate::table::{Cell, Table};
use edsl::config::RunConfig;
use edsl::dirac::{self, Settings};
use edsl::factorize;
use edsl::kernel::{self, Route};
use edsl::oracle;
use edsl::potentials::{BoundaryCondition, Problem};
use edsl::spectrum::{self, SpectralSolver, SpectrumOptions};
use edsl::{Error, Result, C64};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::PI;

pub const COMMANDS: [&str; 7] =
    ["spectrum", "charfn", "factor-check", "kernel-check", "chain-check", "oracle-compare", "norming"];

pub struct Outcome {
    pub table: Table,
    pub summary: String,
    /// Extra report fields (JSON output and metadata sidecar).
    pub report: Value,
    pub shift: C64,
}

fn cj(z: C64) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn re_im(z: C64) -> [Cell; 2] {
    [Cell::from(z.re), Cell::from(z.im)]
}

pub fn run(command: &str, cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let settings = cfg.settings()?;
    match command {
        "spectrum" => spectrum_cmd(cfg, &problem, settings),
        "charfn" => charfn_cmd(cfg, &problem, settings),
        "factor-check" => factor_cmd(cfg, &problem, settings),
        "kernel-check" => kernel_cmd(cfg, &problem, settings),
        "chain-check" => chain_cmd(cfg, &problem, settings),
        "oracle-compare" => oracle_cmd(cfg, &problem, settings),
        "norming" => norming_cmd(cfg, &problem, settings),
        other => Err(Error::Config { field: "<command>".into(), message: format!("unknown command `{other}`") }),
    }
}

fn spectrum_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let (a, b) = cfg.task.n_range([-10, 10])?;
    let solver = SpectralSolver::new(problem, settings)?;
    let opts = SpectrumOptions { verify_strips: cfg.task.verify_strips.unwrap_or(true) };
    let rep = solver.compute_spectrum(a, b, opts)?;
    let mut t = Table::new(&["n", "re_lambda", "im_lambda", "re_remainder", "im_remainder", "multiplicity"]);
    for e in &rep.eigenvalues {
        let [lr, li] = re_im(e.lambda);
        let [rr, ri] = re_im(e.remainder);
        t.push(vec![e.n.into(), lr, li, rr, ri, e.multiplicity.into()]);
    }
    let max_rem = rep.eigenvalues.iter().map(|e| e.remainder.norm()).fold(0.0, f64::max);
    let sums: Vec<Value> = rep.window_sums.iter().map(|w| json!({"lo": w.lo, "hi": w.hi, "sum": w.sum})).collect();
    Ok(Outcome {
        summary: format!("spectrum: {} eigenvalues, max |remainder| {:.3e}, shift {}", rep.eigenvalues.len(), max_rem, rep.shift),
        report: json!({"p0": cj(rep.p0), "window_sums": sums, "strip_counts": rep.strip_counts}),
        shift: rep.shift,
        table: t,
    })
}

fn charfn_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let tests = cfg.task.lambda_tests(&[C64::new(0.5, 0.0), C64::new(PI / 2.0, 0.0), C64::new(1.0, 1.0)])?;
    let dp = dirac::build_dirac(problem, &settings.seed)?;
    let rows: Vec<(C64, C64, C64, f64)> = tests
        .par_iter()
        .map(|&z| {
            let j = dirac::charfn::<2>(problem, &dp, z, &settings)?;
            let drift = dirac::solve_u(&dp, z, settings.tol, false, true)?.det_drift;
            Ok((z, j.0[0], j.0[1], drift))
        })
        .collect::<Result<_>>()?;
    let mut t =
        Table::new(&["re_lambda", "im_lambda", "re_value", "im_value", "re_derivative", "im_derivative", "det_drift"]);
    for (z, v, d, drift) in &rows {
        let [a, b] = re_im(*z);
        let [c, e] = re_im(*v);
        let [f, g] = re_im(*d);
        t.push(vec![a, b, c, e, f, g, (*drift).into()]);
    }
    let max_drift = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let name = match problem.bc {
        BoundaryCondition::Dirichlet => "phi",
        BoundaryCondition::Mixed { .. } => "psi",
    };
    Ok(Outcome {
        summary: format!("charfn: {} points of {name}, max det drift {:.3e}", rows.len(), max_drift),
        report: json!({"function": name, "max_det_drift": max_drift}),
        shift: C64::new(0.0, 0.0),
        table: t,
    })
}

fn factor_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let n_list = cfg.task.n_list(&[64, 256, 1024])?;
    let tests = cfg.task.lambda_tests(&[C64::new(1.0, 1.0), C64::new(-2.0, 0.5), C64::new(0.5, -0.3)])?;
    let solver = SpectralSolver::new(problem, settings)?;
    let nmax = *n_list.last().unwrap() as i64;
    let lo = match problem.bc {
        BoundaryCondition::Dirichlet => -nmax,
        BoundaryCondition::Mixed { .. } => -nmax - 1,
    };
    let opts = SpectrumOptions { verify_strips: cfg.task.verify_strips.unwrap_or(nmax <= 64) };
    let spec = solver.compute_spectrum(lo, nmax, opts)?;
    let rep = factorize::product_report(&solver, &spec, &tests, &n_list)?;
    let mut t = Table::new(&[
        "re_lambda",
        "im_lambda",
        "N",
        "re_product",
        "im_product",
        "re_reference",
        "im_reference",
        "rel_error",
    ]);
    for r in &rep.rows {
        let [a, b] = re_im(r.lambda);
        let [c, d] = re_im(r.product);
        let [e, f] = re_im(r.reference);
        t.push(vec![a, b, r.n.into(), c, d, e, f, r.rel_error.into()]);
    }
    let last = rep.rows.iter().filter(|r| r.n == nmax as usize).map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(Outcome {
        summary: format!("factor-check: case {}, {} rows, max rel_error at N={} {:.3e}", rep.case, rep.rows.len(), nmax, last),
        report: json!({
            "case": rep.case.to_string(),
            "prod1": rep.prod1.iter().map(|(n, v)| json!({"N": n, "value": cj(*v)})).collect::<Vec<_>>(),
            "prod2": rep.prod2.iter().map(|(r, v)| json!({"r": r, "value": cj(*v)})).collect::<Vec<_>>(),
        }),
        shift: spec.shift,
        table: t,
    })
}

fn kernel_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let tests = cfg.task.lambda_tests(&[C64::new(1.0, 0.0), C64::new(5.0, -1.0), C64::new(-12.0, 0.5)])?;
    let route: Route = cfg.task.route.map(Into::into).unwrap_or(Route::Neumann);
    let n_max = cfg.task.n_max.unwrap_or(match route {
        Route::Neumann => 8,
        Route::Kernel => 2,
    });
    if n_max == 0 || (route == Route::Kernel && n_max > 2) {
        return Err(Error::Config { field: "task.n_max".into(), message: "kernel route supports 1 or 2".into() });
    }
    let dp = dirac::build_dirac(problem, &settings.seed)?;
    let jobs: Vec<(C64, usize)> = tests.iter().flat_map(|&z| (1..=n_max).map(move |n| (z, n))).collect();
    let out: Vec<(C64, kernel::Defect)> = jobs
        .par_iter()
        .map(|&(z, n)| Ok((z, kernel::verify_representation(&dp, z, n, settings.tol, route)?)))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["re_lambda", "im_lambda", "N", "tail", "defect"]);
    let mut violations = 0;
    for (z, d) in &out {
        let [a, b] = re_im(*z);
        t.push(vec![a, b, d.n.into(), d.tail.into(), d.defect.into()]);
        if route == Route::Neumann && d.defect > d.tail + 10.0 * settings.tol {
            violations += 1;
        }
    }
    let qn = kernel::q_tilde_norm_on(&dp, 0.0, 1.0)?;
    Ok(Outcome {
        summary: format!("kernel-check: {} rows, ||Q~||_2 = {:.3e}, bound violations {}", out.len(), qn, violations),
        report: json!({"q_tilde_norm": qn, "violations": violations}),
        shift: C64::new(0.0, 0.0),
        table: t,
    })
}

fn chain_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let guess = cfg
        .task
        .lambda
        .ok_or_else(|| Error::Config { field: "task.lambda".into(), message: "eigenvalue guess required".into() })?
        .0;
    let m = cfg.task.m.unwrap_or(2);
    let solver = SpectralSolver::new(problem, settings)?;
    let lam = solver.refine(guess)?.lambda;
    let rep = spectrum::associated_chain(problem, lam, m, settings.tol)?;
    let mut t = Table::new(&["j", "residual", "boundary_defect"]);
    for j in 0..m {
        t.push(vec![j.into(), rep.residuals[j].into(), rep.boundary_defects[j].into()]);
    }
    let max_res = rep.residuals.iter().copied().fold(0.0, f64::max);
    Ok(Outcome {
        summary: format!("chain-check: lambda {}, m {}, max residual {:.3e}, next defect {:.3e}", lam, m, max_res, rep.next_defect),
        report: json!({"lambda": cj(lam), "next_defect": rep.next_defect}),
        shift: solver.shift(),
        table: t,
    })
}

fn oracle_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let (a, b) = cfg.task.n_range([-5, 5])?;
    let m_list = cfg.task.m_list(&[200, 400, 800])?;
    let solver = SpectralSolver::new(problem, settings)?;
    let tab = oracle::oracle_compare(&solver, a, b, &m_list)?;
    let mut t = Table::new(&["n", "M", "re_solver", "im_solver", "re_oracle", "im_oracle", "diff"]);
    for r in &tab.rows {
        let [c, d] = re_im(r.solver);
        let [e, f] = re_im(r.oracle);
        t.push(vec![r.n.into(), r.m.into(), c, d, e, f, r.diff.into()]);
    }
    let finest = *m_list.last().unwrap();
    let summary: Vec<Value> = tab
        .summary
        .iter()
        .map(|s| json!({"n": s.n, "extrapolated": cj(s.extrapolated), "extrapolated_diff": s.extrapolated_diff, "observed_order": s.observed_order}))
        .collect();
    Ok(Outcome {
        summary: format!(
            "oracle-compare: max diff at M={} {:.3e}, extrapolated {:.3e}, min observed order {:.2}",
            finest,
            tab.max_diff(finest),
            tab.max_extrapolated_diff(),
            tab.min_order()
        ),
        report: json!({"extrapolation": summary}),
        shift: solver.shift(),
        table: t,
    })
}

fn norming_cmd(cfg: &RunConfig, problem: &Problem, settings: Settings) -> Result<Outcome> {
    let (a, b) = cfg.task.n_range([-10, 10])?;
    let solver = SpectralSolver::new(problem, settings)?;
    let opts = SpectrumOptions { verify_strips: cfg.task.verify_strips.unwrap_or(true) };
    let mut rep = solver.compute_spectrum(a, b, opts)?;
    solver.norming_constants(&mut rep.eigenvalues)?;
    let rems = solver.eigenfunction_asymptotics(&rep.eigenvalues)?;
    let mut t = Table::new(&["n", "re_lambda", "im_lambda", "alpha", "eigenfunction_remainder", "outside_theorem"]);
    for (e, (_, y)) in rep.eigenvalues.iter().zip(&rems) {
        let [lr, li] = re_im(e.lambda);
        let alpha = e.norming.unwrap_or(f64::NAN);
        t.push(vec![e.n.into(), lr, li, alpha.into(), (*y).into(), (e.outside_theorem as i64).into()]);
    }
    let a_sums = spectrum::dyadic_sums(
        &rep.eigenvalues.iter().map(|e| (e.n, (e.norming.unwrap_or(f64::NAN) - 1.0).abs())).collect::<Vec<_>>(),
    );
    let y_sums = spectrum::dyadic_sums(&rems);
    let flagged = rep.eigenvalues.iter().filter(|e| e.outside_theorem).count();
    let ws = |v: &[spectrum::WindowSum]| v.iter().map(|w| json!({"lo": w.lo, "hi": w.hi, "sum": w.sum})).collect::<Vec<_>>();
    Ok(Outcome {
        summary: format!("norming: {} eigenvalues, {} outside theorem", rep.eigenvalues.len(), flagged),
        report: json!({"alpha_window_sums": ws(&a_sums), "remainder_window_sums": ws(&y_sums)}),
        shift: rep.shift,
        table: t,
    })
}
