//! JSON configuration: problem, family and plan sections.

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::approx::CellRule;
use crate::boundary::{
    BoundaryOperator, CanonicalBoundaryOperator, FractionalBoundaryOperator, FractionalTerm,
    MultipointBoundaryOperator, PointEvaluation,
};
use crate::bvpsolve::BvProblem;
use crate::error::BvpError;
use crate::funcspace::chebyshev;
use crate::funcspace::expr::Expression;
use crate::funcspace::{FunctionRep, Interval, SobolevIndex};
use crate::odecore::OdeSystem;
use crate::paramlab::{FamilyMember, ParameterFamily, DEFAULT_PROBE_DEGREE};
use crate::C64;

/// Adaptive tolerance for sampling expression-valued functions.
const EXPRESSION_TOL: f64 = 1e-15;

/// A configuration problem pinned to a location in the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `problem.boundary.alphas[1]`.
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            _ if !self.path.is_empty() => write!(f, "{}: {}", self.path, self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = std::result::Result<T, ConfigError>;

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        line: None,
        column: None,
        message: message.into(),
    }
}

fn wrap<T>(path: &str, r: crate::Result<T>) -> CResult<T> {
    r.map_err(|e| err(path, e.to_string()))
}

fn typed<T: DeserializeOwned>(value: &Value, path: &str) -> CResult<T> {
    serde_path_to_error::deserialize(value.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let full = match (path.is_empty(), inner == ".") {
            (_, true) => path.to_string(),
            (true, false) => inner,
            (false, false) => format!("{path}.{inner}"),
        };
        err(&full, e.into_inner().to_string())
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    version: Option<u32>,
    problem: Value,
    #[serde(default)]
    family: Option<RawFamily>,
    #[serde(default)]
    plan: Option<RawPlan>,
    #[serde(default)]
    solver: Option<RawSolver>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    interval: [f64; 2],
    r: usize,
    #[serde(default = "one")]
    m: usize,
    #[serde(default)]
    n: usize,
    #[serde(default = "default_p")]
    p: Value,
    coefficients: Vec<Value>,
    rhs: Value,
    boundary: Value,
    target: Vec<Value>,
}

fn one() -> usize {
    1
}

fn default_p() -> Value {
    Value::from(2.0)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawBoundary {
    Canonical {
        #[serde(default)]
        t0: Option<f64>,
        #[serde(default)]
        alphas: Option<Vec<Value>>,
        #[serde(default)]
        phi: Option<Value>,
        #[serde(default)]
        conditions: Vec<RawCondition>,
    },
    Multipoint {
        #[serde(default)]
        t0: Option<f64>,
        #[serde(default)]
        alphas: Option<Vec<Value>>,
        points: Vec<f64>,
        betas: Vec<Value>,
    },
    Fractional {
        terms: Vec<RawTerm>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    row: usize,
    #[serde(default)]
    order: usize,
    point: f64,
    weights: Vec<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    order: f64,
    weight: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    #[serde(default)]
    mu0: f64,
    #[serde(default = "default_base_label")]
    label0: String,
    members: Vec<RawMember>,
}

fn default_base_label() -> String {
    "mu0".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMember {
    #[serde(default)]
    label: Option<String>,
    mu: f64,
    #[serde(default)]
    distance: Option<f64>,
    #[serde(default)]
    problem: Option<serde_json::Map<String, Value>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlan {
    degrees: Vec<usize>,
    #[serde(default)]
    cells: Option<Value>,
    #[serde(default)]
    probes: Option<usize>,
    #[serde(default)]
    probe_degree: Option<usize>,
}

/// Solver settings stored in the file; command-line flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub rank_tol: Option<f64>,
}

/// An approximation plan description, resolved against the base problem
/// by the caller.
#[derive(Debug, Clone)]
pub struct PlanSpec {
    pub degrees: Vec<usize>,
    pub rule: CellRule,
    pub probes: usize,
    pub probe_degree: usize,
}

/// A fully parsed configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub problem: BvProblem,
    pub family: Option<ParameterFamily>,
    pub plan: Option<PlanSpec>,
    pub solver: RawSolver,
}

/// Parses a configuration document.
pub fn parse_config(text: &str) -> CResult<Config> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError {
        path: String::new(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: e.to_string(),
    })?;
    let raw: RawConfig = typed(&root, "")?;
    if let Some(v) = raw.version {
        if v != 1 {
            return Err(err("version", format!("unsupported schema version {v}; expected 1")));
        }
    }
    let mu0 = raw.family.as_ref().map_or(0.0, |f| f.mu0);
    let problem = build_problem(&raw.problem, mu0, "problem")?;
    let family = match &raw.family {
        None => None,
        Some(fam) => Some(build_family(&raw.problem, problem.clone(), fam)?),
    };
    let plan = raw.plan.map(build_plan).transpose()?;
    Ok(Config {
        problem,
        family,
        plan,
        solver: raw.solver.unwrap_or_default(),
    })
}

fn build_family(base_value: &Value, base: BvProblem, raw: &RawFamily) -> CResult<ParameterFamily> {
    let mut members = vec![FamilyMember {
        label: raw.label0.clone(),
        distance: 0.0,
        problem: base,
    }];
    for (i, m) in raw.members.iter().enumerate() {
        let path = format!("family.members[{i}]");
        let mut value = base_value.clone();
        if let Some(over) = &m.problem {
            let obj = value.as_object_mut().ok_or_else(|| err("problem", "must be an object"))?;
            for (k, v) in over {
                obj.insert(k.clone(), v.clone());
            }
        }
        let problem = build_problem(&value, m.mu, &format!("{path}.problem"))?;
        members.push(FamilyMember {
            label: m.label.clone().unwrap_or_else(|| format!("mu={}", m.mu)),
            distance: m.distance.unwrap_or((m.mu - raw.mu0).abs()),
            problem,
        });
    }
    wrap("family", ParameterFamily::new(members, &raw.label0))
}

fn build_plan(raw: RawPlan) -> CResult<PlanSpec> {
    let rule = match &raw.cells {
        None => CellRule::PowerOfTwo,
        Some(Value::String(s)) if s == "power_of_two" => CellRule::PowerOfTwo,
        Some(Value::String(s)) if s == "degree_squared" => CellRule::DegreeSquared,
        Some(v @ Value::Array(_)) => CellRule::Fixed(typed(v, "plan.cells")?),
        Some(_) => {
            return Err(err(
                "plan.cells",
                "expected \"power_of_two\", \"degree_squared\" or a list of cell counts",
            ))
        }
    };
    Ok(PlanSpec {
        degrees: raw.degrees,
        rule,
        probes: raw.probes.unwrap_or(4),
        probe_degree: raw.probe_degree.unwrap_or(DEFAULT_PROBE_DEGREE),
    })
}

fn parse_p(v: &Value, path: &str) -> CResult<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| err(path, "not a number")),
        Value::String(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        _ => Err(err(path, "expected a number >= 1 or \"inf\"")),
    }
}

/// Builds the problem described by `value` at parameter `mu`.
pub fn build_problem(value: &Value, mu: f64, path: &str) -> CResult<BvProblem> {
    let raw: RawProblem = typed(value, path)?;
    let interval = wrap(&format!("{path}.interval"), Interval::new(raw.interval[0], raw.interval[1]))?;
    let p = parse_p(&raw.p, &format!("{path}.p"))?;
    let index = wrap(path, SobolevIndex::new(raw.n, raw.r, raw.m, p))?;
    let ctx = Ctx { interval, mu };
    if raw.coefficients.len() != raw.r {
        return Err(err(
            &format!("{path}.coefficients"),
            format!("expected {} coefficient matrices (A_0 … A_{{r-1}}), got {}", raw.r, raw.coefficients.len()),
        ));
    }
    let coeffs = raw
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, v)| ctx.matrix_function(v, raw.m, raw.m, &format!("{path}.coefficients[{j}]")))
        .collect::<CResult<Vec<_>>>()?;
    let system = wrap(&format!("{path}.coefficients"), OdeSystem::new(index, interval, coeffs))?;
    let rhs = ctx.matrix_function(&raw.rhs, raw.m, 1, &format!("{path}.rhs"))?;
    let boundary = ctx.boundary(&raw.boundary, index, &format!("{path}.boundary"))?;
    let target_path = format!("{path}.target");
    if raw.target.len() != index.boundary_dim() {
        return Err(err(
            &target_path,
            format!("expected {} entries, got {}", index.boundary_dim(), raw.target.len()),
        ));
    }
    let target = raw
        .target
        .iter()
        .enumerate()
        .map(|(i, v)| complex_literal(v, &format!("{target_path}[{i}]")))
        .collect::<CResult<Vec<C64>>>()?;
    wrap(path, BvProblem::new(system, rhs, boundary, DVector::from_vec(target)))
}

/// A complex literal: a number or `{"re": x, "im": y}`.
fn complex_literal(v: &Value, path: &str) -> CResult<C64> {
    match v {
        Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        Value::Object(o) => {
            let part = |key: &str| -> CResult<f64> {
                match o.get(key) {
                    None => Ok(0.0),
                    Some(Value::Number(n)) => Ok(n.as_f64().unwrap_or(f64::NAN)),
                    Some(_) => Err(err(&format!("{path}.{key}"), "expected a number")),
                }
            };
            if o.keys().any(|k| k != "re" && k != "im") {
                return Err(err(path, "complex literals only have the fields `re` and `im`"));
            }
            Ok(C64::new(part("re")?, part("im")?))
        }
        _ => Err(err(path, "expected a number or {\"re\": …, \"im\": …}")),
    }
}

/// Nested arrays describing a `rows × cols` matrix; a flat list is accepted
/// for column vectors and a bare entry for `1 × 1`.
fn matrix_entries<'a>(v: &'a Value, rows: usize, cols: usize, path: &str) -> CResult<Vec<(&'a Value, String)>> {
    match v {
        Value::Array(outer) => {
            let nested = outer.iter().all(|x| x.is_array());
            if nested {
                if outer.len() != rows {
                    return Err(err(path, format!("expected {rows} rows, got {}", outer.len())));
                }
                let mut out = Vec::with_capacity(rows * cols);
                for (i, row) in outer.iter().enumerate() {
                    let row = row.as_array().unwrap();
                    if row.len() != cols {
                        return Err(err(&format!("{path}[{i}]"), format!("expected {cols} columns, got {}", row.len())));
                    }
                    out.extend(row.iter().enumerate().map(|(j, x)| (x, format!("{path}[{i}][{j}]"))));
                }
                Ok(out)
            } else if cols == 1 && outer.len() == rows {
                Ok(outer.iter().enumerate().map(|(i, x)| (x, format!("{path}[{i}]"))).collect())
            } else if rows == 1 && outer.len() == cols {
                Ok(outer.iter().enumerate().map(|(j, x)| (x, format!("{path}[{j}]"))).collect())
            } else {
                Err(err(path, format!("expected a {rows}x{cols} matrix")))
            }
        }
        _ if rows == 1 && cols == 1 => Ok(vec![(v, path.to_string())]),
        _ => Err(err(path, format!("expected a {rows}x{cols} matrix (nested arrays)"))),
    }
}

fn numeric_matrix(v: &Value, rows: usize, cols: usize, path: &str) -> CResult<DMatrix<C64>> {
    let entries = matrix_entries(v, rows, cols, path)?
        .into_iter()
        .map(|(x, p)| complex_literal(x, &p))
        .collect::<CResult<Vec<_>>>()?;
    Ok(DMatrix::from_row_slice(rows, cols, &entries))
}

struct Ctx {
    interval: Interval,
    mu: f64,
}

impl Ctx {
    fn matrix_function(&self, v: &Value, rows: usize, cols: usize, path: &str) -> CResult<FunctionRep> {
        let entries = matrix_entries(v, rows, cols, path)?
            .into_iter()
            .map(|(x, p)| self.scalar_function(x, &p))
            .collect::<CResult<Vec<_>>>()?;
        wrap(path, FunctionRep::from_entries(rows, cols, &entries))
    }

    fn expression_function(&self, re: Option<&Value>, im: Option<&Value>, path: &str) -> CResult<FunctionRep> {
        let part = |v: Option<&Value>, key: &str| -> CResult<Option<Expression>> {
            let p = format!("{path}.{key}");
            let src = match v {
                None => return Ok(None),
                Some(Value::Number(n)) => n.to_string(),
                Some(Value::String(s)) => s.clone(),
                Some(_) => return Err(err(&p, "expected an expression string or a number")),
            };
            let e = Expression::parse(&src).map_err(|e| err(&p, e.to_string()))?;
            // catches unknown names and functions before sampling
            e.eval(self.interval.a(), self.mu).map_err(|e| err(&p, e.to_string()))?;
            Ok(Some(e))
        };
        let (re, im) = (part(re, "re")?, part(im, "im")?);
        let fre = re.as_ref().map(|e| e.bind(self.mu)).transpose();
        let fre = wrap(path, fre)?;
        let fim = im.as_ref().map(|e| e.bind(self.mu)).transpose();
        let fim = wrap(path, fim)?;
        let f = FunctionRep::from_fn_adaptive(self.interval, 1, 1, EXPRESSION_TOL, |t, o| {
            let r = fre.as_ref().map_or(0.0, |f| f(t));
            let i = fim.as_ref().map_or(0.0, |f| f(t));
            o[0] = C64::new(r, i);
        });
        let f = wrap(path, f)?;
        let bad = f.chebyshev_coeffs().unwrap().iter().flatten().any(|c| !c.re.is_finite() || !c.im.is_finite());
        if bad {
            return Err(err(path, "expression is not finite on the interval"));
        }
        Ok(f)
    }

    fn scalar_function(&self, v: &Value, path: &str) -> CResult<FunctionRep> {
        match v {
            Value::Number(n) => Ok(FunctionRep::scalar_constant(self.interval, n.as_f64().unwrap_or(f64::NAN))),
            Value::String(_) => self.expression_function(Some(v), None, path)
                .map_err(|e| ConfigError { path: path.to_string(), ..e }),
            Value::Object(o) => {
                let keys: Vec<&str> = o.keys().map(String::as_str).collect();
                match keys.as_slice() {
                    k if k.iter().all(|x| *x == "re" || *x == "im") && !k.is_empty() => {
                        self.expression_function(o.get("re"), o.get("im"), path)
                    }
                    ["chebyshev"] => {
                        let c: Vec<Value> = typed(&o["chebyshev"], &format!("{path}.chebyshev"))?;
                        let coeffs = c
                            .iter()
                            .enumerate()
                            .map(|(i, x)| complex_literal(x, &format!("{path}.chebyshev[{i}]")))
                            .collect::<CResult<Vec<_>>>()?;
                        wrap(path, FunctionRep::chebyshev(self.interval, 1, 1, vec![coeffs]))
                    }
                    ["polynomial"] => {
                        let c: Vec<f64> = typed(&o["polynomial"], &format!("{path}.polynomial"))?;
                        Ok(FunctionRep::polynomial(self.interval, &c))
                    }
                    ["steps"] => self.steps(&o["steps"], &format!("{path}.steps")),
                    k if k.contains(&"samples") && k.iter().all(|x| *x == "samples" || *x == "rough") => {
                        let rough = match o.get("rough") {
                            None => false,
                            Some(Value::Bool(b)) => *b,
                            Some(_) => return Err(err(&format!("{path}.rough"), "expected true or false")),
                        };
                        let f = self.samples(&o["samples"], rough, &format!("{path}.samples"))?;
                        Ok(if rough { f.declare_rough() } else { f })
                    }
                    _ => Err(err(
                        path,
                        "unknown function form; use a number, an expression, {re, im}, {chebyshev}, {polynomial}, {steps} or {samples}",
                    )),
                }
            }
            _ => Err(err(path, "expected a function specification")),
        }
    }

    fn steps(&self, v: &Value, path: &str) -> CResult<FunctionRep> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            breaks: Vec<f64>,
            values: Vec<Value>,
        }
        let raw: Raw = typed(v, path)?;
        let values = raw
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| Ok(vec![complex_literal(x, &format!("{path}.values[{i}]"))?]))
            .collect::<CResult<Vec<_>>>()?;
        wrap(path, FunctionRep::step(self.interval, 1, 1, raw.breaks, values))
    }

    /// Interpolant of samples `(t_j, v_j)`: the Chebyshev interpolant when
    /// the `t_j` are the Chebyshev–Lobatto points of the interval, else the
    /// continuous piecewise-linear one.
    fn samples(&self, v: &Value, rough: bool, path: &str) -> CResult<FunctionRep> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            t: Vec<f64>,
            values: Vec<Value>,
        }
        let raw: Raw = typed(v, path)?;
        if raw.t.len() != raw.values.len() || raw.t.len() < 2 {
            return Err(err(path, "need at least two samples with matching `t` and `values`"));
        }
        let vals = raw
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| complex_literal(x, &format!("{path}.values[{i}]")))
            .collect::<CResult<Vec<_>>>()?;
        if !rough && self.is_lobatto_grid(&raw.t) {
            let mut v = vals;
            // Lobatto points run from b down to a
            v.reverse();
            let coeffs = chebyshev::interpolate_lobatto(&v);
            return wrap(path, FunctionRep::chebyshev(self.interval, 1, 1, vec![coeffs]));
        }
        let pieces = raw
            .t
            .windows(2)
            .zip(vals.windows(2))
            .map(|(t, y)| vec![vec![y[0], (y[1] - y[0]) / (t[1] - t[0])]])
            .collect();
        wrap(path, FunctionRep::piecewise(self.interval, 1, 1, raw.t, pieces))
    }

    fn is_lobatto_grid(&self, t: &[f64]) -> bool {
        let n = t.len() - 1;
        let tol = 1e-12 * self.interval.length();
        let nodes = self.interval.lobatto_points(n);
        n >= 2 && nodes.iter().zip(t).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn alphas(&self, v: &Option<Vec<Value>>, index: SobolevIndex, path: &str) -> CResult<Vec<DMatrix<C64>>> {
        let (rm, m, order) = (index.boundary_dim(), index.m, index.order());
        match v {
            None => Ok(vec![DMatrix::zeros(rm, m); order]),
            Some(list) => {
                if list.len() != order {
                    return Err(err(path, format!("expected {order} matrices (orders 0..n+r-1), got {}", list.len())));
                }
                list.iter()
                    .enumerate()
                    .map(|(s, x)| numeric_matrix(x, rm, m, &format!("{path}[{s}]")))
                    .collect()
            }
        }
    }

    fn boundary(&self, v: &Value, index: SobolevIndex, path: &str) -> CResult<BoundaryOperator> {
        let raw: RawBoundary = typed(v, path)?;
        let (rm, m) = (index.boundary_dim(), index.m);
        let iv = self.interval;
        match raw {
            RawBoundary::Canonical {
                t0,
                alphas,
                phi,
                conditions,
            } => {
                let t0 = t0.unwrap_or(iv.a());
                let alphas = self.alphas(&alphas, index, &format!("{path}.alphas"))?;
                let phi = phi
                    .map(|p| self.matrix_function(&p, rm, m, &format!("{path}.phi")))
                    .transpose()?;
                let evals = conditions
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let cp = format!("{path}.conditions[{i}]");
                        if c.row >= rm {
                            return Err(err(&format!("{cp}.row"), format!("row must be below {rm}")));
                        }
                        if c.weights.len() != m {
                            return Err(err(&format!("{cp}.weights"), format!("expected {m} weights")));
                        }
                        let mut coefficient = DMatrix::zeros(rm, m);
                        for (j, w) in c.weights.iter().enumerate() {
                            coefficient[(c.row, j)] = complex_literal(w, &format!("{cp}.weights[{j}]"))?;
                        }
                        Ok(PointEvaluation {
                            order: c.order,
                            point: c.point,
                            coefficient,
                        })
                    })
                    .collect::<CResult<Vec<_>>>()?;
                let op = if evals.is_empty() {
                    CanonicalBoundaryOperator::new(index, iv, t0, alphas, phi.unwrap_or_else(|| FunctionRep::zeros(iv, rm, m)))
                } else {
                    CanonicalBoundaryOperator::from_point_evaluations(index, iv, t0, &evals, Some(alphas), phi)
                };
                Ok(BoundaryOperator::Canonical(wrap(path, op)?))
            }
            RawBoundary::Multipoint {
                t0,
                alphas,
                points,
                betas,
            } => {
                let alphas = self.alphas(&alphas, index, &format!("{path}.alphas"))?;
                let betas = betas
                    .iter()
                    .enumerate()
                    .map(|(j, b)| numeric_matrix(b, rm, m, &format!("{path}.betas[{j}]")))
                    .collect::<CResult<Vec<_>>>()?;
                let op = MultipointBoundaryOperator::new(index, iv, t0.unwrap_or(iv.a()), alphas, points, betas);
                Ok(BoundaryOperator::Multipoint(wrap(path, op)?))
            }
            RawBoundary::Fractional { terms } => {
                let terms = terms
                    .iter()
                    .enumerate()
                    .map(|(j, t)| {
                        Ok(FractionalTerm {
                            order: t.order,
                            weight: self.matrix_function(&t.weight, rm, m, &format!("{path}.terms[{j}].weight"))?,
                        })
                    })
                    .collect::<CResult<Vec<_>>>()?;
                Ok(BoundaryOperator::Fractional(wrap(path, FractionalBoundaryOperator::new(index, iv, terms))?))
            }
        }
    }
}

impl From<ConfigError> for BvpError {
    fn from(e: ConfigError) -> Self {
        BvpError::InvalidInput(e.to_string())
    }
}
