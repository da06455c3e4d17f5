//! JSON run configuration: problem, solver settings, task parameters and
//! output settings.

use crate::dirac::Settings;
use crate::error::{Error, Result};
use crate::kernel::Route;
use crate::miura::SeedPolicy;
use crate::potentials::{BoundaryCondition, Potential, PotentialTerm, Problem};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Complex number read from `{"re": .., "im": ..}`, a plain number or a
/// `[re, im]` pair; always written as an object.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "CRepr", into = "CObj")]
pub struct CValue(pub C64);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CObj {
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CRepr {
    Num(f64),
    Pair([f64; 2]),
    Obj(CObj),
}

impl From<CRepr> for CValue {
    fn from(r: CRepr) -> Self {
        CValue(match r {
            CRepr::Num(x) => C64::new(x, 0.0),
            CRepr::Pair([a, b]) => C64::new(a, b),
            CRepr::Obj(o) => C64::new(o.re, o.im),
        })
    }
}

impl From<CValue> for CObj {
    fn from(c: CValue) -> Self {
        CObj { re: c.0.re, im: c.0.im }
    }
}

fn cvec(v: &[CValue]) -> Vec<C64> {
    v.iter().map(|c| c.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TermConfig {
    Grid { nodes: Vec<f64>, values: Vec<CValue> },
    Poly { coeffs: Vec<CValue> },
    Constant { value: CValue },
    Step { x0: f64, jump: CValue },
    Log { x0: f64, strength: CValue },
    Trig {
        #[serde(default)]
        cos: Vec<CValue>,
        #[serde(default)]
        sin: Vec<CValue>,
    },
}

impl TermConfig {
    fn build(&self, field: &str) -> Result<PotentialTerm> {
        let bad = |sub: &str, message: String| Error::Config { field: format!("{field}.{sub}"), message };
        let finite = |sub: &str, v: &[CValue]| -> Result<()> {
            match v.iter().position(|c| !c.0.is_finite()) {
                Some(i) => Err(bad(&format!("{sub}[{i}]"), "must be finite".into())),
                None => Ok(()),
            }
        };
        match self {
            TermConfig::Grid { nodes, values } => {
                finite("values", values)?;
                PotentialTerm::grid(nodes.clone(), cvec(values)).map_err(|e| bad("nodes", e.to_string()))
            }
            TermConfig::Poly { coeffs } => {
                finite("coeffs", coeffs)?;
                Ok(PotentialTerm::poly(cvec(coeffs)))
            }
            TermConfig::Constant { value } => {
                finite("value", std::slice::from_ref(value))?;
                Ok(PotentialTerm::constant(value.0))
            }
            TermConfig::Step { x0, jump } => {
                finite("jump", std::slice::from_ref(jump))?;
                PotentialTerm::step(*x0, jump.0).map_err(|_| bad("x0", format!("{x0} must lie strictly inside (0, 1)")))
            }
            TermConfig::Log { x0, strength } => {
                finite("strength", std::slice::from_ref(strength))?;
                PotentialTerm::log(*x0, strength.0).map_err(|_| bad("x0", format!("{x0} must lie in [0, 1]")))
            }
            TermConfig::Trig { cos, sin } => {
                finite("cos", cos)?;
                finite("sin", sin)?;
                Ok(PotentialTerm::trig(cvec(cos), cvec(sin)))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    #[default]
    Dirichlet,
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub accept: f64,
    pub floor: f64,
    pub tau_max: f64,
    pub tol: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        let s = SeedPolicy::default();
        SeedConfig { accept: s.accept, floor: s.floor, tau_max: s.tau_max, tol: s.tol }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub lambda_switch: f64,
    pub theta0: SeedConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = Settings::default();
        SolverConfig { tol: s.tol, lambda_switch: s.lambda_switch, theta0: SeedConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_range: Option<[i64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_tests: Option<Vec<CValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<usize>>,
    /// Eigenvalue guess for chain-check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<CValue>,
    /// Chain length for chain-check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Highest Neumann order for kernel-check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify_strips: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteConfig {
    Neumann,
    Kernel,
}

impl From<RouteConfig> for Route {
    fn from(r: RouteConfig) -> Self {
        match r {
            RouteConfig::Neumann => Route::Neumann,
            RouteConfig::Kernel => Route::Kernel,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub p: Vec<TermConfig>,
    #[serde(default)]
    pub r: Vec<TermConfig>,
    #[serde(default)]
    pub bc: BcKind,
    #[serde(default)]
    pub h: CValue,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            let field = match e.classify() {
                serde_json::error::Category::Syntax | serde_json::error::Category::Eof => "<json>".to_string(),
                _ => format!("line {} column {}", e.line(), e.column()),
            };
            config_err(&field, e.to_string())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn problem(&self) -> Result<Problem> {
        let build = |terms: &[TermConfig], name: &str| -> Result<Potential> {
            let t = terms.iter().enumerate().map(|(i, t)| t.build(&format!("{name}[{i}]"))).collect::<Result<_>>()?;
            Ok(Potential::new(t))
        };
        let p = build(&self.p, "p")?;
        let r = build(&self.r, "r")?;
        let bc = match self.bc {
            BcKind::Dirichlet => {
                if self.h.0 != C64::new(0.0, 0.0) {
                    return Err(config_err("h", "only used with mixed boundary conditions"));
                }
                BoundaryCondition::Dirichlet
            }
            BcKind::Mixed => {
                if !self.h.0.is_finite() {
                    return Err(config_err("h", "must be finite"));
                }
                BoundaryCondition::Mixed { h: self.h.0 }
            }
        };
        Ok(Problem::new(p, r, bc))
    }

    pub fn settings(&self) -> Result<Settings> {
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(config_err("solver.tol", "must lie in (0, 1)"));
        }
        if !(s.lambda_switch > 0.0 && s.lambda_switch.is_finite()) {
            return Err(config_err("solver.lambda_switch", "must be positive"));
        }
        let t = &s.theta0;
        if !(t.accept > 0.0 && t.floor > 0.0 && t.floor <= t.accept) {
            return Err(config_err("solver.theta0", "need 0 < floor <= accept"));
        }
        if !(t.tau_max >= 1.0 && t.tol > 0.0) {
            return Err(config_err("solver.theta0", "need tau_max >= 1 and tol > 0"));
        }
        Ok(Settings {
            tol: s.tol,
            lambda_switch: s.lambda_switch,
            seed: SeedPolicy { accept: t.accept, floor: t.floor, tau_max: t.tau_max, tol: t.tol },
        })
    }
}

impl TaskConfig {
    pub fn n_range(&self, default: [i64; 2]) -> Result<(i64, i64)> {
        let [a, b] = self.n_range.unwrap_or(default);
        if a > b {
            return Err(config_err("task.n_range", "lower end exceeds upper end"));
        }
        Ok((a, b))
    }

    pub fn n_list(&self, default: &[usize]) -> Result<Vec<usize>> {
        let v = self.n_list.clone().unwrap_or_else(|| default.to_vec());
        if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("task.n_list", "must be non-empty, positive and strictly increasing"));
        }
        Ok(v)
    }

    pub fn m_list(&self, default: &[usize]) -> Result<Vec<usize>> {
        let v = self.m_list.clone().unwrap_or_else(|| default.to_vec());
        if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("task.m_list", "must be non-empty and strictly increasing"));
        }
        if let Some(m) = v.iter().find(|&&m| !(3..=crate::oracle::MAX_M).contains(&m)) {
            return Err(config_err("task.m_list", format!("grid size {m} outside 3..={}", crate::oracle::MAX_M)));
        }
        Ok(v)
    }

    pub fn lambda_tests(&self, default: &[C64]) -> Result<Vec<C64>> {
        let v = self.lambda_tests.as_ref().map(|v| cvec(v)).unwrap_or_else(|| default.to_vec());
        if v.is_empty() {
            return Err(config_err("task.lambda_tests", "must not be empty"));
        }
        if let Some(i) = v.iter().position(|z| !z.is_finite()) {
            return Err(config_err(&format!("task.lambda_tests[{i}]"), "must be finite"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let v: Vec<CValue> = serde_json::from_str(r#"[1.5, [1, 2], {"re": 0, "im": -1}, {"re": 3}]"#).unwrap();
        assert_eq!(cvec(&v), vec![C64::new(1.5, 0.0), C64::new(1.0, 2.0), C64::new(0.0, -1.0), C64::new(3.0, 0.0)]);
        assert_eq!(serde_json::to_string(&v[1]).unwrap(), r#"{"re":1.0,"im":2.0}"#);
    }

    #[test]
    fn defaults_and_round_trip() {
        let cfg = RunConfig::from_json(
            r#"{"p": [{"type": "constant", "value": 0.3}],
                "r": [{"type": "step", "x0": 0.5, "jump": 2}, {"type": "trig", "cos": [0.1]}],
                "bc": "mixed", "h": [0.5, 0],
                "task": {"n_range": [-3, 3]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), cfg.to_json());
        let pr = cfg.problem().unwrap();
        assert_eq!(pr.bc, BoundaryCondition::Mixed { h: C64::new(0.5, 0.0) });
        assert_eq!(cfg.task.n_range([0, 0]).unwrap(), (-3, 3));
    }

    #[test]
    fn validation_names_field() {
        let cfg = RunConfig::from_json(r#"{"p": [], "r": [{"type": "poly", "coeffs": [0]}, {"type": "step", "x0": 0, "jump": 1}]}"#)
            .unwrap();
        match cfg.problem() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "r[1].x0"),
            other => panic!("{other:?}"),
        }
        let err = RunConfig::from_json(r#"{"p": [{"type": "cubic"}]}"#).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        let err = RunConfig::from_json(r#"{"p": [], "solver": {"tolerance": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("tolerance"), "{err}");
        let mut cfg = RunConfig::from_json(r#"{"solver": {"tol": 0}}"#).unwrap();
        assert!(matches!(cfg.settings(), Err(Error::Config { ref field, .. }) if field == "solver.tol"));
        cfg.solver.tol = 1e-8;
        cfg.task.n_list = Some(vec![64, 16]);
        assert!(cfg.task.n_list(&[1]).is_err());
    }
}
